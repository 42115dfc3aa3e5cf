#pragma once

// Two-block splitting problem
//
//     min  theta1(x) + theta2(y)   s.t.  A x + B y = b
//
// where theta1(x) = c * E_xi loss(x, xi) + (ridge/2)||x||^2 over the rows of
// a design matrix, and theta2 is a separable regularizer with a cheap prox.
// The scale c ("loss_scale") is the number of per-sample terms folded into
// theta1: n for the summed least-squares loss 0.5||Dx - r||^2, 1 for the
// averaged logistic loss. Stochastic solvers multiply the sampled
// subgradient by c so that it is unbiased for theta1.

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "splitkit/design_matrix.hpp"
#include "splitkit/linalg.hpp"

namespace splitkit {

enum class Theta1Kind { least_squares, logistic, custom };
enum class Theta2Kind { l1, group_l2, custom };

inline std::string to_string(Theta1Kind k)
{
    switch (k) {
    case Theta1Kind::least_squares: return "least-squares";
    case Theta1Kind::logistic: return "logistic";
    case Theta1Kind::custom: return "custom";
    }
    return "?";
}

inline std::string to_string(Theta2Kind k)
{
    switch (k) {
    case Theta2Kind::l1: return "l1";
    case Theta2Kind::group_l2: return "group-l2";
    case Theta2Kind::custom: return "custom";
    }
    return "?";
}

/// One training sample xi: the design row d_xi and its response r_xi.
struct SampleRef {
    std::size_t index = 0;
    DenseVector row;
    double response = 0.0;
};

/// Oracles for a user-supplied theta1. `sample_subgradient` is required for the
/// stochastic solvers; `batch_x_solver` (argmin_x theta1(x) + 0.5 x^T H x - q^T x)
/// is required for the batch solvers.
struct CustomTheta1 {
    std::function<double(const DenseVector& x)> value;
    std::function<DenseVector(const DenseVector& x, std::size_t sample)> sample_subgradient;
    std::function<DenseVector(const DenseVector& q, const DenseMatrix& h)> batch_x_solver;
};

/// Oracles for a user-supplied theta2: prox(v, s) = argmin_u theta2(u) + (s/2)||u - v||^2.
struct CustomTheta2 {
    std::function<double(const DenseVector& y)> value;
    std::function<DenseVector(const DenseVector& v, double scale)> prox;
};

/// A x + B y = b. The `x_minus_y` form (A = I, B = -I, b = 0) is stored
/// structurally so that high-dimensional problems never materialize I.
class Constraint {
public:
    static Constraint x_minus_y(std::size_t d)
    {
        Constraint c;
        c.identity_pair_ = true;
        c.d1_ = c.d2_ = c.m_ = d;
        return c;
    }

    static Constraint general(DenseMatrix a, DenseMatrix b, DenseVector rhs)
    {
        if (a.rows() != b.rows() || a.rows() != rhs.dim()) {
            fail(ErrorKind::dimension_mismatch, "constraint: A, B and b must share the row count");
        }
        Constraint c;
        c.d1_ = a.cols();
        c.d2_ = b.cols();
        c.m_ = a.rows();
        c.a_ = std::move(a);
        c.b_ = std::move(b);
        c.rhs_ = std::move(rhs);
        return c;
    }

    bool is_x_minus_y() const noexcept { return identity_pair_; }
    std::size_t d1() const noexcept { return d1_; }
    std::size_t d2() const noexcept { return d2_; }
    std::size_t m() const noexcept { return m_; }

    DenseMatrix a() const { return identity_pair_ ? DenseMatrix::identity(d1_) : a_; }
    DenseMatrix b() const { return identity_pair_ ? DenseMatrix::identity(d2_, -1.0) : b_; }
    DenseVector rhs() const { return identity_pair_ ? DenseVector(m_) : rhs_; }

    DenseVector apply_a(const DenseVector& x) const { return identity_pair_ ? x : a_ * x; }
    DenseVector apply_b(const DenseVector& y) const { return identity_pair_ ? -1.0 * y : b_ * y; }
    DenseVector apply_at(const DenseVector& v) const { return identity_pair_ ? v : transpose_times(a_, v); }
    DenseVector apply_bt(const DenseVector& v) const { return identity_pair_ ? -1.0 * v : transpose_times(b_, v); }

    /// A x + B y - b
    DenseVector residual(const DenseVector& x, const DenseVector& y) const
    {
        if (x.dim() != d1_ || y.dim() != d2_) fail(ErrorKind::dimension_mismatch, "constraint_residual");
        if (identity_pair_) return x - y;
        DenseVector r = a_ * x;
        r += b_ * y;
        r -= rhs_;
        return r;
    }

private:
    bool identity_pair_ = false;
    std::size_t d1_ = 0, d2_ = 0, m_ = 0;
    DenseMatrix a_, b_;
    DenseVector rhs_;
};

class SplittingProblem {
public:
    /// 0.5||Dx - r||^2 + mu||y||_1  s.t. x - y = 0
    static SplittingProblem lasso(std::shared_ptr<const DesignMatrix> design, DenseVector response, double mu)
    {
        SplittingProblem p = regression(std::move(design), std::move(response), mu);
        p.theta2_ = Theta2Kind::l1;
        return p;
    }

    /// 0.5||Dx - r||^2 + mu sum_g ||y_g||_2  s.t. x - y = 0
    static SplittingProblem group_lasso(std::shared_ptr<const DesignMatrix> design, DenseVector response,
                                        IndexPartition groups, double mu)
    {
        SplittingProblem p = regression(std::move(design), std::move(response), mu);
        if (groups.dim() != p.d2()) fail(ErrorKind::invalid_partition, "groups must partition y's indices");
        p.theta2_ = Theta2Kind::group_l2;
        p.groups_ = std::move(groups);
        return p;
    }

    /// (1/n) sum log(1 + exp(-r_i (d_i^T x + x0))) + mu||y||_1  s.t. x - y = 0
    static SplittingProblem logistic(std::shared_ptr<const DesignMatrix> design, DenseVector labels, double mu,
                                     double intercept = 0.0)
    {
        for (double r : labels)
            if (r != 1.0 && r != -1.0) fail(ErrorKind::bad_dimensions, "logistic labels must be -1 or +1");
        SplittingProblem p = regression(std::move(design), std::move(labels), mu);
        p.theta1_ = Theta1Kind::logistic;
        p.theta2_ = Theta2Kind::l1;
        p.loss_scale_ = 1.0;
        p.intercept_ = intercept;
        return p;
    }

    static SplittingProblem custom(Constraint constraint, std::size_t n_samples, CustomTheta1 t1, CustomTheta2 t2)
    {
        SplittingProblem p;
        p.constraint_ = std::move(constraint);
        p.n_samples_ = n_samples;
        p.theta1_ = Theta1Kind::custom;
        p.theta2_ = Theta2Kind::custom;
        p.custom1_ = std::move(t1);
        p.custom2_ = std::move(t2);
        p.loss_scale_ = 1.0;
        return p;
    }

    std::size_t d1() const noexcept { return constraint_.d1(); }
    std::size_t d2() const noexcept { return constraint_.d2(); }
    std::size_t m() const noexcept { return constraint_.m(); }
    std::size_t n_samples() const noexcept { return n_samples_; }

    Theta1Kind theta1_kind() const noexcept { return theta1_; }
    Theta2Kind theta2_kind() const noexcept { return theta2_; }
    double mu() const noexcept { return mu_; }
    double ridge() const noexcept { return ridge_; }
    double loss_scale() const noexcept { return loss_scale_; }
    double intercept() const noexcept { return intercept_; }
    const std::optional<IndexPartition>& groups() const noexcept { return groups_; }
    const Constraint& constraint() const noexcept { return constraint_; }
    const DesignMatrix& design() const { return *design_; }
    bool has_design() const noexcept { return static_cast<bool>(design_); }
    const DenseVector& response() const noexcept { return response_; }
    const CustomTheta1& custom_theta1() const noexcept { return custom1_; }
    const CustomTheta2& custom_theta2() const noexcept { return custom2_; }

    SplittingProblem& set_mu(double mu)
    {
        if (!(mu >= 0.0)) fail(ErrorKind::invalid_config, "mu must be >= 0");
        mu_ = mu;
        return *this;
    }

    /// Adds (ridge/2)||x||^2 to theta1, making it ridge-strongly convex.
    SplittingProblem& set_ridge(double ridge)
    {
        if (!(ridge >= 0.0)) fail(ErrorKind::invalid_config, "ridge must be >= 0");
        ridge_ = ridge;
        return *this;
    }

    SplittingProblem& set_loss_scale(double c)
    {
        if (!(c > 0.0)) fail(ErrorKind::invalid_config, "loss scale must be > 0");
        loss_scale_ = c;
        return *this;
    }

    SplittingProblem& set_intercept(double x0)
    {
        intercept_ = x0;
        return *this;
    }

    SplittingProblem& set_constraint(Constraint c)
    {
        constraint_ = std::move(c);
        return *this;
    }

    SampleRef sample(std::size_t i) const
    {
        if (i >= n_samples_) fail(ErrorKind::dimension_mismatch, "sample index out of range");
        if (!design_) return SampleRef{i, DenseVector{}, 0.0};
        return SampleRef{i, design_->row(i), response_[i]};
    }

private:
    static SplittingProblem regression(std::shared_ptr<const DesignMatrix> design, DenseVector response, double mu)
    {
        if (!design) fail(ErrorKind::empty_dataset, "null design matrix");
        if (design->rows() != response.dim()) {
            fail(ErrorKind::dimension_mismatch, "design rows " + std::to_string(design->rows()) +
                                                    " != responses " + std::to_string(response.dim()));
        }
        if (!(mu >= 0.0)) fail(ErrorKind::invalid_config, "mu must be >= 0");
        SplittingProblem p;
        p.constraint_ = Constraint::x_minus_y(design->cols());
        p.n_samples_ = design->rows();
        p.loss_scale_ = static_cast<double>(design->rows());
        p.theta1_ = Theta1Kind::least_squares;
        p.mu_ = mu;
        p.design_ = std::move(design);
        p.response_ = std::move(response);
        return p;
    }

    Constraint constraint_;
    std::size_t n_samples_ = 0;
    Theta1Kind theta1_ = Theta1Kind::least_squares;
    Theta2Kind theta2_ = Theta2Kind::l1;
    double mu_ = 0.0;
    double ridge_ = 0.0;
    double loss_scale_ = 1.0;
    double intercept_ = 0.0;
    std::optional<IndexPartition> groups_;
    std::shared_ptr<const DesignMatrix> design_;
    DenseVector response_;
    CustomTheta1 custom1_;
    CustomTheta2 custom2_;
};

// ---------------------------------------------------------------------------
// Oracles

namespace detail {

/// log(1 + exp(-z)) without overflow.
inline double log1p_exp_neg(double z) noexcept
{
    return z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
}

/// 1 / (1 + exp(z)) without overflow.
inline double inv_one_plus_exp(double z) noexcept
{
    if (z > 0) {
        const double e = std::exp(-z);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(z));
}

/// Derivative of the per-sample loss with respect to the margin d^T x:
/// the per-sample subgradient is this scalar times d.
inline double sample_loss_slope(const SplittingProblem& p, double margin, double response)
{
    switch (p.theta1_kind()) {
    case Theta1Kind::least_squares: return margin - response;
    case Theta1Kind::logistic: return -response * inv_one_plus_exp(response * (margin + p.intercept()));
    case Theta1Kind::custom: break;
    }
    fail(ErrorKind::unsupported_theta1, "no closed-form per-sample loss for a custom theta1");
}

inline double sample_loss(const SplittingProblem& p, double margin, double response)
{
    switch (p.theta1_kind()) {
    case Theta1Kind::least_squares: return 0.5 * (margin - response) * (margin - response);
    case Theta1Kind::logistic: return log1p_exp_neg(response * (margin + p.intercept()));
    case Theta1Kind::custom: break;
    }
    fail(ErrorKind::unsupported_theta1, "no closed-form per-sample loss for a custom theta1");
}

} // namespace detail

inline double theta1_value(const SplittingProblem& p, const DenseVector& x)
{
    if (x.dim() != p.d1()) fail(ErrorKind::dimension_mismatch, "theta1: x dim");
    double v = 0.0;
    if (p.theta1_kind() == Theta1Kind::custom) {
        if (!p.custom_theta1().value) fail(ErrorKind::unsupported_theta1, "custom theta1 has no value oracle");
        v = p.custom_theta1().value(x);
    } else {
        const auto& d = p.design();
        double s = 0.0;
        for (std::size_t i = 0; i < p.n_samples(); ++i)
            s += detail::sample_loss(p, d.row_dot(i, x.span()), p.response()[i]);
        v = p.loss_scale() * s / static_cast<double>(p.n_samples());
    }
    if (p.ridge() > 0.0) v += 0.5 * p.ridge() * dot(x, x);
    return v;
}

inline double theta2_value(const SplittingProblem& p, const DenseVector& y)
{
    if (y.dim() != p.d2()) fail(ErrorKind::dimension_mismatch, "theta2: y dim");
    switch (p.theta2_kind()) {
    case Theta2Kind::l1: return p.mu() * norm1(y);
    case Theta2Kind::group_l2: {
        double s = 0.0;
        for (const auto& b : p.groups()->blocks()) {
            double sq = 0.0;
            for (std::size_t i : b) sq += y[i] * y[i];
            s += std::sqrt(sq);
        }
        return p.mu() * s;
    }
    case Theta2Kind::custom:
        if (!p.custom_theta2().value) fail(ErrorKind::unsupported_theta1, "custom theta2 has no value oracle");
        return p.custom_theta2().value(y);
    }
    return 0.0;
}

/// theta(u) = theta1(x) + theta2(y) over the full data set.
inline double objective(const SplittingProblem& p, const DenseVector& x, const DenseVector& y)
{
    return theta1_value(p, x) + theta2_value(p, y);
}

/// Per-sample subgradient of loss(x, xi), without the loss scale or ridge.
inline DenseVector theta1_subgradient(const SplittingProblem& p, const DenseVector& x, const SampleRef& s)
{
    if (x.dim() != p.d1()) fail(ErrorKind::dimension_mismatch, "theta1_subgradient: x dim");
    if (p.theta1_kind() == Theta1Kind::custom) {
        if (!p.custom_theta1().sample_subgradient) {
            fail(ErrorKind::unsupported_theta1, "custom theta1 without a registered subgradient oracle");
        }
        return p.custom_theta1().sample_subgradient(x, s.index);
    }
    if (s.row.dim() != p.d1()) fail(ErrorKind::dimension_mismatch, "theta1_subgradient: sample row dim");
    const double slope = detail::sample_loss_slope(p, dot(s.row, x), s.response);
    return slope * s.row;
}

/// Unbiased estimate of a subgradient of theta1 at x from a minibatch:
/// c * mean_j loss'(x, xi_j) + ridge * x.
inline DenseVector stochastic_gradient(const SplittingProblem& p, const DenseVector& x,
                                       std::span<const std::size_t> batch)
{
    if (batch.empty()) fail(ErrorKind::empty_dataset, "empty minibatch");
    DenseVector g(p.d1());
    const double w = p.loss_scale() / static_cast<double>(batch.size());
    if (p.theta1_kind() == Theta1Kind::custom) {
        for (std::size_t i : batch) axpy(w, theta1_subgradient(p, x, SampleRef{i, {}, 0.0}), g);
    } else {
        const auto& d = p.design();
        for (std::size_t i : batch) {
            const double slope = detail::sample_loss_slope(p, d.row_dot(i, x.span()), p.response()[i]);
            d.row_axpy(i, w * slope, g.span());
        }
    }
    if (p.ridge() > 0.0) axpy(p.ridge(), x, g);
    return g;
}

/// Full-data gradient of theta1 (smooth built-in models only).
inline DenseVector theta1_gradient(const SplittingProblem& p, const DenseVector& x)
{
    if (p.theta1_kind() == Theta1Kind::custom) fail(ErrorKind::unsupported_theta1, "theta1_gradient: custom theta1");
    std::vector<std::size_t> all(p.n_samples());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return stochastic_gradient(p, x, all);
}

/// argmin_u theta2(u) + (scale/2)||u - v||^2
inline DenseVector theta2_prox(const SplittingProblem& p, const DenseVector& v, double scale)
{
    if (!(scale > 0.0)) fail(ErrorKind::nonpositive_scale, "theta2_prox: scale must be > 0");
    if (v.dim() != p.d2()) fail(ErrorKind::dimension_mismatch, "theta2_prox: v dim");
    switch (p.theta2_kind()) {
    case Theta2Kind::l1: return soft_threshold(v, p.mu() / scale);
    case Theta2Kind::group_l2: return block_soft_threshold(v, *p.groups(), p.mu() / scale);
    case Theta2Kind::custom:
        if (!p.custom_theta2().prox) fail(ErrorKind::subproblem_unsolvable, "custom theta2 without a prox oracle");
        return p.custom_theta2().prox(v, scale);
    }
    return v;
}

inline DenseVector constraint_residual(const SplittingProblem& p, const DenseVector& x, const DenseVector& y)
{
    return p.constraint().residual(x, y);
}

} // namespace splitkit
