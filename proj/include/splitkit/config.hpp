#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "splitkit/linalg.hpp"

namespace splitkit {

enum class Algorithm { admm, prsm, scprsm, spb_scprsm, sto_admm, sto_spb_scprsm };

inline std::string to_string(Algorithm a)
{
    switch (a) {
    case Algorithm::admm: return "admm";
    case Algorithm::prsm: return "prsm";
    case Algorithm::scprsm: return "scprsm";
    case Algorithm::spb_scprsm: return "spb_scprsm";
    case Algorithm::sto_admm: return "sto_admm";
    case Algorithm::sto_spb_scprsm: return "sto_spb_scprsm";
    }
    return "?";
}

inline std::optional<Algorithm> parse_algorithm(const std::string& s)
{
    for (Algorithm a : {Algorithm::admm, Algorithm::prsm, Algorithm::scprsm, Algorithm::spb_scprsm,
                        Algorithm::sto_admm, Algorithm::sto_spb_scprsm})
        if (to_string(a) == s) return a;
    return std::nullopt;
}

inline bool is_stochastic(Algorithm a) noexcept
{
    return a == Algorithm::sto_admm || a == Algorithm::sto_spb_scprsm;
}

/// A semi-proximal weight matrix. Zero and scaled-identity weights are kept
/// as tags so the common configurations never cost O(d^2).
class SemiProximal {
public:
    enum class Kind { zero, scaled_identity, explicit_matrix };

    static SemiProximal zero() { return SemiProximal{}; }

    static SemiProximal identity(double scale = 1.0)
    {
        SemiProximal s;
        s.kind_ = scale == 0.0 ? Kind::zero : Kind::scaled_identity;
        s.scale_ = scale;
        return s;
    }

    static SemiProximal matrix(DenseMatrix m)
    {
        SemiProximal s;
        s.kind_ = Kind::explicit_matrix;
        s.matrix_ = std::move(m);
        return s;
    }

    Kind kind() const noexcept { return kind_; }
    bool is_zero() const noexcept { return kind_ == Kind::zero; }
    bool is_isotropic() const noexcept { return kind_ != Kind::explicit_matrix; }
    /// The c in c*I; 0 for the zero weight. Only meaningful when is_isotropic().
    double scale() const noexcept { return kind_ == Kind::zero ? 0.0 : scale_; }
    const DenseMatrix& explicit_matrix() const noexcept { return matrix_; }

    DenseMatrix materialize(std::size_t n) const
    {
        if (kind_ == Kind::explicit_matrix) {
            if (matrix_.rows() != n || matrix_.cols() != n) {
                fail(ErrorKind::dimension_mismatch, "semi-proximal matrix must be " + std::to_string(n) + "x" +
                                                        std::to_string(n));
            }
            return matrix_;
        }
        return DenseMatrix::identity(n, scale());
    }

    DenseVector apply(const DenseVector& v) const
    {
        if (kind_ == Kind::explicit_matrix) return matrix_ * v;
        return scale() * v;
    }

    std::string describe() const
    {
        switch (kind_) {
        case Kind::zero: return "0";
        case Kind::scaled_identity: {
            std::ostringstream os;
            os.precision(17);
            os << scale_ << "*I";
            return os.str();
        }
        case Kind::explicit_matrix: return "explicit(" + std::to_string(matrix_.rows()) + "x" +
                                           std::to_string(matrix_.cols()) + ")";
        }
        return "?";
    }

private:
    Kind kind_ = Kind::zero;
    double scale_ = 0.0;
    DenseMatrix matrix_;
};

/// Step sizes eta_k for the stochastic x-subproblem.
struct StepSchedule {
    enum class Kind { power, strongly_convex, constant };

    Kind kind = Kind::power;
    double c = 1.0;     // power: eta_k = c * k^-p
    double p = 0.5;
    double mu_sc = 1.0; // strongly_convex: eta_k = 1 / (k mu_sc)
    double eta = 1.0;   // constant

    static StepSchedule power(double c, double p) { return {Kind::power, c, p, 1.0, 1.0}; }
    static StepSchedule strongly_convex(double mu_sc) { return {Kind::strongly_convex, 1.0, 0.5, mu_sc, 1.0}; }
    static StepSchedule constant(double eta) { return {Kind::constant, 1.0, 0.5, 1.0, eta}; }

    std::string describe() const
    {
        std::ostringstream os;
        os.precision(17);
        switch (kind) {
        case Kind::power: os << "power(C=" << c << ",p=" << p << ")"; break;
        case Kind::strongly_convex: os << "strongly_convex(mu=" << mu_sc << ")"; break;
        case Kind::constant: os << "constant(eta=" << eta << ")"; break;
        }
        return os.str();
    }
};

inline std::vector<std::string> schedule_violations(const StepSchedule& s)
{
    std::vector<std::string> v;
    switch (s.kind) {
    case StepSchedule::Kind::power:
        if (!(s.c > 0.0)) v.push_back("power schedule needs C > 0");
        if (!(s.p > 0.0 && s.p < 1.0)) v.push_back("power schedule needs p in (0, 1)");
        break;
    case StepSchedule::Kind::strongly_convex:
        if (!(s.mu_sc > 0.0)) v.push_back("strongly convex schedule needs mu_sc > 0");
        break;
    case StepSchedule::Kind::constant:
        if (!(s.eta > 0.0)) v.push_back("constant schedule needs eta > 0");
        break;
    }
    return v;
}

inline double schedule_eta(const StepSchedule& s, std::uint64_t k)
{
    if (k < 1) fail(ErrorKind::k_out_of_range, "schedule_eta: k must be >= 1");
    if (auto v = schedule_violations(s); !v.empty()) fail(ErrorKind::invalid_config, v.front());
    switch (s.kind) {
    case StepSchedule::Kind::power: return s.c * std::pow(static_cast<double>(k), -s.p);
    case StepSchedule::Kind::strongly_convex: return 1.0 / (static_cast<double>(k) * s.mu_sc);
    case StepSchedule::Kind::constant: return s.eta;
    }
    return s.eta;
}

/// Upper end of the admissible gamma interval for a given alpha in [0, 1):
/// (1 - alpha + sqrt((1 + alpha)^2 + 4(1 - alpha^2))) / 2.
inline double gamma_upper_bound(double alpha)
{
    if (!(alpha >= 0.0 && alpha < 1.0)) fail(ErrorKind::alpha_out_of_range, "alpha must lie in [0, 1)");
    return 0.5 * (1.0 - alpha + std::sqrt((1.0 + alpha) * (1.0 + alpha) + 4.0 * (1.0 - alpha * alpha)));
}

/// How the x-subproblem is solved when a closed form exists.
enum class XStepPath { automatic, generic };

/// Which iterates enter the running averages.
/// `staggered`: x-bar over x_1..x_t, y-bar and lambda-bar over y_2..y_{t+1}.
/// `uniform`: all three over indices 1..t (plotting convenience only).
enum class ErgodicIndex { staggered, uniform };

struct SolverConfig {
    std::string name;
    Algorithm algorithm = Algorithm::sto_spb_scprsm;
    double alpha = 0.9;
    double gamma = 0.9;
    double beta = 1.0;
    SemiProximal s = SemiProximal::identity(1.0);
    SemiProximal t = SemiProximal::zero();
    StepSchedule schedule = StepSchedule::power(1e-5, 0.5);
    std::uint64_t max_iters = 50000;
    std::uint64_t seed = 0;
    std::size_t minibatch = 1;
    XStepPath x_path = XStepPath::automatic;
    ErgodicIndex ergodic = ErgodicIndex::staggered;
};

/// The parameters each algorithm actually runs with.
struct EffectiveParameters {
    double alpha;
    double gamma;
    double beta;
    SemiProximal s;
    SemiProximal t;
};

inline EffectiveParameters effective_parameters(const SolverConfig& c)
{
    switch (c.algorithm) {
    case Algorithm::admm:
    case Algorithm::sto_admm: return {0.0, 1.0, c.beta, SemiProximal::zero(), SemiProximal::zero()};
    case Algorithm::prsm: return {1.0, 1.0, c.beta, SemiProximal::zero(), SemiProximal::zero()};
    case Algorithm::scprsm: return {c.alpha, c.alpha, c.beta, SemiProximal::zero(), SemiProximal::zero()};
    case Algorithm::spb_scprsm:
    case Algorithm::sto_spb_scprsm: return {c.alpha, c.gamma, c.beta, c.s, c.t};
    }
    return {c.alpha, c.gamma, c.beta, c.s, c.t};
}

inline void check_semi_proximal(const SemiProximal& w, const char* name, std::vector<std::string>& out)
{
    if (w.kind() == SemiProximal::Kind::explicit_matrix) {
        const auto& m = w.explicit_matrix();
        if (!m.square()) {
            out.push_back(std::string(name) + " must be square");
        } else if (!is_symmetric(m)) {
            out.push_back(std::string(name) + " must be symmetric");
        } else if (!is_psd(m, psd_tolerance)) {
            out.push_back(std::string(name) + " must be positive semidefinite");
        }
    } else if (!(w.scale() >= 0.0)) {
        out.push_back(std::string(name) + " scale must be >= 0");
    }
}

/// Every violated constraint; an empty list means the configuration is valid.
inline std::vector<std::string> validate_config(const SolverConfig& c)
{
    std::vector<std::string> v;
    if (!(c.beta > 0.0)) v.push_back("beta must be > 0");
    if (c.max_iters < 1) v.push_back("max_iters must be >= 1");
    if (c.minibatch < 1) v.push_back("minibatch must be >= 1");

    switch (c.algorithm) {
    case Algorithm::admm:
    case Algorithm::sto_admm:
    case Algorithm::prsm: break;
    case Algorithm::scprsm:
        if (!(c.alpha > 0.0 && c.alpha < 1.0)) v.push_back("scprsm needs alpha in (0, 1)");
        break;
    case Algorithm::spb_scprsm:
    case Algorithm::sto_spb_scprsm:
        if (!(c.alpha >= 0.0 && c.alpha < 1.0)) {
            v.push_back("alpha must lie in [0, 1)");
        } else {
            const double ub = gamma_upper_bound(c.alpha);
            if (!(c.gamma > 0.0 && c.gamma < ub)) {
                std::ostringstream os;
                os.precision(6);
                os << "gamma = " << c.gamma << " outside (0, " << ub << ") for alpha = " << c.alpha;
                v.push_back(os.str());
            }
        }
        check_semi_proximal(c.s, "S", v);
        check_semi_proximal(c.t, "T", v);
        break;
    }
    if (is_stochastic(c.algorithm)) {
        for (auto& s : schedule_violations(c.schedule)) v.push_back(std::move(s));
    }
    return v;
}

inline void require_valid(const SolverConfig& c)
{
    auto v = validate_config(c);
    if (v.empty()) return;
    std::string msg;
    for (const auto& s : v) msg += (msg.empty() ? "" : "; ") + s;
    fail(ErrorKind::invalid_config, msg);
}

} // namespace splitkit
