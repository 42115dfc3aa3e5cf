#pragma once

// Numerical certificates for the relaxed splitting scheme. Block matrices
// act on v = (y, lambda) in R^{d2 + m}; G and P act on w = (x, y, lambda).
//
//   M = [ I            0          ]     K = (1-a) b [ B^T B   B^T                  ]
//       [ a b B   (a+g) b I       ]                 [ B       (2-a-g)/(1-a) I      ]
//
//   H = 1/(a+g) [ (a+g-ag) b B^T B   -a B^T ]      G = diag(S, [T 0; 0 0] + H)
//               [ -a B               I / b  ]      P = diag(S, T)
//
// with a = alpha, g = gamma, b = beta. M^T H M = diag((1-a) b B^T B, (a+g) b I).
//
// The operator F(w) behind the variational inequality is affine with a
// skew-symmetric linear part, so <w - w', F(w) - F(w')> = 0 and its
// monotonicity needs no runtime check.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "splitkit/config.hpp"
#include "splitkit/linalg.hpp"
#include "splitkit/solvers.hpp"

namespace splitkit {

enum class Regime { gamma_lt_1, gamma_eq_1, gamma_gt_1 };

inline std::string to_string(Regime r)
{
    switch (r) {
    case Regime::gamma_lt_1: return "gamma_lt_1";
    case Regime::gamma_eq_1: return "gamma_eq_1";
    case Regime::gamma_gt_1: return "gamma_gt_1";
    }
    return "?";
}

inline Regime classify_regime(double gamma)
{
    if (std::abs(gamma - 1.0) <= 1e-12) return Regime::gamma_eq_1;
    return gamma < 1.0 ? Regime::gamma_lt_1 : Regime::gamma_gt_1;
}

struct ContractionCertificate {
    double alpha = 0.0;
    double gamma = 0.0;
    double beta = 0.0;
    Regime regime = Regime::gamma_lt_1;
    DenseMatrix B, S, T;
    DenseMatrix M, K, H, G, P, MtHM;
    std::optional<double> c1, c2, c3, tau;
    std::optional<std::pair<double, double>> delta_interval;
    double delta = std::numeric_limits<double>::quiet_NaN();
    /// Smallest eigenvalue of K - c1 M^T H M once verified.
    std::optional<double> contraction_margin;
    bool verified = false;
};

/// The open interval ((g-1)/(1-a), (1+a)/(g-1) - (1+a)/(1-a)) for gamma > 1,
/// or nullopt when it is empty.
inline std::optional<std::pair<double, double>> delta_interval(double alpha, double gamma)
{
    if (!(alpha >= 0.0 && alpha < 1.0)) fail(ErrorKind::alpha_out_of_range, "alpha must lie in [0, 1)");
    if (!(gamma > 1.0)) return std::nullopt;
    const double lo = (gamma - 1.0) / (1.0 - alpha);
    const double hi = (1.0 + alpha) / (gamma - 1.0) - (1.0 + alpha) / (1.0 - alpha);
    if (!(lo < hi)) return std::nullopt;
    return std::pair{lo, hi};
}

inline ContractionCertificate build_matrices(double alpha, double gamma, double beta, const DenseMatrix& b,
                                             const DenseMatrix& s, const DenseMatrix& t)
{
    if (!(alpha >= 0.0 && alpha < 1.0)) fail(ErrorKind::alpha_out_of_range, "alpha must lie in [0, 1)");
    if (!(gamma > 0.0)) fail(ErrorKind::invalid_config, "gamma must be > 0");
    if (!(beta > 0.0)) fail(ErrorKind::invalid_config, "beta must be > 0");
    if (!s.square()) fail(ErrorKind::dimension_mismatch, "S must be square");
    if (!t.square() || t.rows() != b.cols()) fail(ErrorKind::dimension_mismatch, "T must be d2 x d2 with B m x d2");

    const std::size_t m = b.rows(), d2 = b.cols(), d1 = s.rows(), nv = d2 + m;
    const double ag = alpha + gamma;
    const DenseMatrix bt = b.transpose();
    const DenseMatrix btb = gram(b);

    ContractionCertificate c;
    c.alpha = alpha;
    c.gamma = gamma;
    c.beta = beta;
    c.regime = classify_regime(gamma);
    c.B = b;
    c.S = s;
    c.T = t;

    c.M = DenseMatrix(nv, nv);
    c.M.set_block(0, 0, DenseMatrix::identity(d2));
    c.M.set_block(d2, 0, (alpha * beta) * b);
    c.M.set_block(d2, d2, DenseMatrix::identity(m, ag * beta));

    c.K = DenseMatrix(nv, nv);
    c.K.set_block(0, 0, ((1.0 - alpha) * beta) * btb);
    c.K.set_block(0, d2, ((1.0 - alpha) * beta) * bt);
    c.K.set_block(d2, 0, ((1.0 - alpha) * beta) * b);
    c.K.set_block(d2, d2, DenseMatrix::identity(m, (2.0 - alpha - gamma) * beta));

    c.H = DenseMatrix(nv, nv);
    c.H.set_block(0, 0, ((ag - alpha * gamma) * beta / ag) * btb);
    c.H.set_block(0, d2, (-alpha / ag) * bt);
    c.H.set_block(d2, 0, (-alpha / ag) * b);
    c.H.set_block(d2, d2, DenseMatrix::identity(m, 1.0 / (ag * beta)));

    c.G = DenseMatrix(d1 + nv, d1 + nv);
    c.G.set_block(0, 0, s);
    c.G.set_block(d1, d1, c.H);
    DenseMatrix ty = c.G.block(d1, d1, d2, d2);
    ty += t;
    c.G.set_block(d1, d1, ty);

    c.P = DenseMatrix(d1 + d2, d1 + d2);
    c.P.set_block(0, 0, s);
    c.P.set_block(d1, d1, t);

    c.MtHM = c.M.transpose() * c.H * c.M;
    return c;
}

/// Builds the certificate for a solver configuration on a problem.
inline ContractionCertificate build_matrices(const SplittingProblem& p, const SolverConfig& cfg)
{
    const EffectiveParameters e = effective_parameters(cfg);
    return build_matrices(e.alpha, e.gamma, e.beta, p.constraint().b(), e.s.materialize(p.d1()),
                          e.t.materialize(p.d2()));
}

/// max-norm distance between M^T H M and diag((1-a) b B^T B, (a+g) b I).
inline double mthm_identity_error(const ContractionCertificate& c)
{
    const std::size_t m = c.B.rows(), d2 = c.B.cols();
    DenseMatrix expect(d2 + m, d2 + m);
    expect.set_block(0, 0, ((1.0 - c.alpha) * c.beta) * gram(c.B));
    expect.set_block(d2, d2, DenseMatrix::identity(m, (c.alpha + c.gamma) * c.beta));
    return max_abs_diff(c.MtHM, expect);
}

inline bool check_mthm_identity(const ContractionCertificate& c)
{
    return mthm_identity_error(c) <= 1e-10;
}

inline ContractionCertificate compute_constants(ContractionCertificate c, std::optional<double> delta = std::nullopt)
{
    const double a = c.alpha, g = c.gamma;
    c.c1.reset();
    c.c2.reset();
    c.c3.reset();
    c.tau.reset();
    c.delta_interval.reset();
    c.delta = std::numeric_limits<double>::quiet_NaN();
    switch (c.regime) {
    case Regime::gamma_lt_1:
        c.c1 = (1.0 - std::sqrt(1.0 - (a + g) * (1.0 - g))) / (a + g);
        break;
    case Regime::gamma_eq_1:
        c.c2 = (1.0 - a) / (1.0 + a);
        break;
    case Regime::gamma_gt_1: {
        const auto iv = delta_interval(a, g);
        if (!iv || !(g < gamma_upper_bound(a))) {
            fail(ErrorKind::empty_delta_interval, "no admissible delta for alpha = " + std::to_string(a) +
                                                      ", gamma = " + std::to_string(g));
        }
        const auto [lo, hi] = *iv;
        const double d = delta.value_or(0.5 * (lo + hi));
        if (!(d > lo && d < hi)) fail(ErrorKind::invalid_config, "delta override outside the admissible interval");
        const double c2 = (1.0 - a) / (1.0 + a);
        c.delta_interval = iv;
        c.delta = d;
        c.c2 = c2;
        c.c3 = d * (g - 1.0) * (1.0 - a) / (1.0 + a);
        c.tau = c2 * std::min(1.0 - (g - 1.0) / ((1.0 - a) * d), ((g - 1.0) / (a + g)) * (hi - d));
        break;
    }
    }
    return c;
}

/// Smallest eigenvalue of K - factor * M^T H M.
inline double contraction_margin(const ContractionCertificate& c, double factor)
{
    return min_eigenvalue(c.K - factor * c.MtHM);
}

/// K >= c1 M^T H M up to 1e-10 (gamma < 1 only).
inline bool verify_contraction(ContractionCertificate& c)
{
    if (c.regime != Regime::gamma_lt_1) {
        fail(ErrorKind::wrong_regime, "the K >= c1 M^T H M certificate applies to gamma < 1");
    }
    if (!c.c1) c = compute_constants(std::move(c));
    c.contraction_margin = contraction_margin(c, *c.c1);
    c.verified = *c.contraction_margin >= -1e-10;
    return c.verified;
}

/// Reference point w* = (x*, y*, lambda*).
struct SaddlePoint {
    DenseVector x, y, lambda;
};

inline SaddlePoint saddle_point(const ReferenceSolution& r) { return {r.x, r.y, r.lambda}; }

struct LyapunovReport {
    std::vector<double> values; // Phi_k for k = 1 .. K
    std::size_t violations = 0;
    double worst_increase = 0.0;
};

namespace detail {

inline void require_matching(const SplittingProblem& p, const SolverConfig& cfg, const ContractionCertificate& cert,
                             const SaddlePoint& w_star)
{
    const EffectiveParameters e = effective_parameters(cfg);
    auto same = [](double u, double v) { return std::abs(u - v) <= 1e-12 * std::max(1.0, std::abs(u)); };
    if (!same(e.alpha, cert.alpha) || !same(e.gamma, cert.gamma) || !same(e.beta, cert.beta) ||
        max_abs_diff(e.s.materialize(p.d1()), cert.S) > 0.0 || max_abs_diff(e.t.materialize(p.d2()), cert.T) > 0.0 ||
        cert.G.rows() != p.d1() + p.d2() + p.m()) {
        fail(ErrorKind::config_mismatch, "certificate was built for different parameters");
    }
    if (w_star.x.dim() != p.d1() || w_star.y.dim() != p.d2() || w_star.lambda.dim() != p.m()) {
        fail(ErrorKind::dimension_mismatch, "reference point dimensions");
    }
}

} // namespace detail

/// Phi_k = ||w_k - w*||_G^2 (+ c2 ||y_k - y_{k-1}||_T^2 when gamma >= 1)
///         (+ c3 beta ||r_k||^2 when gamma > 1).
/// `cert` must already carry its constants (see compute_constants).
inline double lyapunov_value(const SplittingProblem& p, const IterateState& s, const DenseVector& y_prev,
                             const ContractionCertificate& c, const SaddlePoint& w_star)
{
    const std::size_t d1 = p.d1(), d2 = p.d2(), m = p.m();
    DenseVector dw(d1 + d2 + m);
    for (std::size_t i = 0; i < d1; ++i) dw[i] = s.x[i] - w_star.x[i];
    for (std::size_t i = 0; i < d2; ++i) dw[d1 + i] = s.y[i] - w_star.y[i];
    for (std::size_t i = 0; i < m; ++i) dw[d1 + d2 + i] = s.lambda[i] - w_star.lambda[i];
    double phi = std::pow(weighted_norm(dw, c.G), 2);
    if (c.regime != Regime::gamma_lt_1) {
        const DenseVector dy = s.y - y_prev;
        phi += *c.c2 * dot(dy, c.T * dy);
    }
    if (c.regime == Regime::gamma_gt_1) {
        const DenseVector r = p.constraint().residual(s.x, s.y);
        phi += *c.c3 * c.beta * dot(r, r);
    }
    return phi;
}

/// Phi_1 .. Phi_K for the states w_0 .. w_K of a batch run under `cfg`.
/// Violations count Phi_{k+1} > Phi_k + slack from k = 1 on, where slack is
/// the rounding allowance plus `extra_slack` (the stochastic term, zero for
/// batch runs).
inline LyapunovReport lyapunov_trace(const SplittingProblem& p, const std::vector<IterateState>& states,
                                     const SolverConfig& cfg, const ContractionCertificate& cert,
                                     const SaddlePoint& w_star, double extra_slack = 0.0)
{
    detail::require_matching(p, cfg, cert, w_star);
    const ContractionCertificate c = (cert.c1 || cert.c2) ? cert : compute_constants(cert);
    LyapunovReport out;
    for (std::size_t k = 1; k < states.size(); ++k) {
        const double phi = lyapunov_value(p, states[k], states[k - 1].y, c, w_star);
        if (!out.values.empty()) {
            const double prev = out.values.back();
            const double inc = phi - prev;
            const double slack = 1e-12 * (1.0 + std::abs(prev)) + extra_slack;
            if (inc > slack) ++out.violations;
            out.worst_increase = std::max(out.worst_increase, inc);
        }
        out.values.push_back(phi);
    }
    return out;
}

} // namespace splitkit
