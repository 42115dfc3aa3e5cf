#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "splitkit/config.hpp"
#include "splitkit/problem.hpp"
#include "splitkit/rng.hpp"
#include "splitkit/trace.hpp"

namespace splitkit {

/// w_k = (x_k, y_k, lambda_k) plus the half-step multiplier and the running
/// averages. `k` counts completed steps (the starting point is w_0); `t` is
/// the number of terms currently in the averages.
struct IterateState {
    std::uint64_t k = 0;
    DenseVector x, y, lambda, lambda_half;
    DenseVector x_bar, y_bar, lambda_bar;
    std::uint64_t t = 0;
    CounterRng rng;

    static IterateState start(const SplittingProblem& p, std::uint64_t seed)
    {
        IterateState s;
        s.x = s.x_bar = DenseVector(p.d1());
        s.y = s.y_bar = DenseVector(p.d2());
        s.lambda = s.lambda_half = s.lambda_bar = DenseVector(p.m());
        s.rng = CounterRng(seed);
        return s;
    }
};

/// Factorizations reused across steps of one run. Safe to omit; the steps
/// then refactor every call.
struct Workspace {
    std::vector<double> batch_key;
    std::optional<Cholesky> batch_factor;
    bool batch_woodbury = false;
    std::optional<DenseMatrix> outer_gram; // D D^T
};

namespace detail {

inline void require_state(const SplittingProblem& p, const IterateState& s)
{
    if (s.x.dim() != p.d1() || s.y.dim() != p.d2() || s.lambda.dim() != p.m()) {
        fail(ErrorKind::dimension_mismatch, "iterate state does not match the problem dimensions");
    }
}

/// A^T lambda - beta A^T (B y - b): the part of the x-subproblem's linear
/// term that comes from the augmented Lagrangian.
inline DenseVector x_coupling(const SplittingProblem& p, const DenseVector& lambda, const DenseVector& y, double beta)
{
    const auto& c = p.constraint();
    DenseVector v = lambda;
    if (c.is_x_minus_y()) {
        axpy(beta, y, v);
        return v;
    }
    DenseVector by = c.apply_b(y);
    by -= c.rhs();
    axpy(-beta, by, v);
    return c.apply_at(v);
}

/// beta A^T A + S as a dense matrix.
inline DenseMatrix x_curvature(const SplittingProblem& p, double beta, const SemiProximal& s)
{
    const auto& c = p.constraint();
    DenseMatrix h = s.materialize(p.d1());
    if (c.is_x_minus_y()) {
        for (std::size_t i = 0; i < p.d1(); ++i) h(i, i) += beta;
    } else {
        const DenseMatrix a = c.a();
        h += beta * gram(a);
    }
    return h;
}

/// x = (-g + lambda + beta y + (s + 1/eta) x_k) / (beta + s + 1/eta)
inline DenseVector x_closed_form(const IterateState& st, double beta, double s, const DenseVector& g, double eta)
{
    if (!(eta > 0.0)) fail(ErrorKind::nonpositive_eta, "eta must be > 0");
    const double w = s + 1.0 / eta;
    const double den = beta + w;
    DenseVector x(st.x.dim());
    for (std::size_t i = 0; i < x.dim(); ++i) x[i] = (-g[i] + st.lambda[i] + beta * st.y[i] + w * st.x[i]) / den;
    return x;
}

/// Linearized x-subproblem by a dense solve of its stationarity system
/// (beta A^T A + I/eta + S) x = A^T lambda - beta A^T (B y_k - b) + x_k/eta + S x_k - g.
inline DenseVector x_linearized_dense(const SplittingProblem& p, const IterateState& st, double beta,
                                      const SemiProximal& s, const DenseVector& g, double eta)
{
    if (!(eta > 0.0)) fail(ErrorKind::nonpositive_eta, "eta must be > 0");
    DenseMatrix h = x_curvature(p, beta, s);
    for (std::size_t i = 0; i < p.d1(); ++i) h(i, i) += 1.0 / eta;
    DenseVector rhs = x_coupling(p, st.lambda, st.y, beta);
    axpy(1.0 / eta, st.x, rhs);
    rhs += s.apply(st.x);
    rhs -= g;
    return Cholesky(h).solve(rhs);
}

inline DenseVector x_linearized(const SplittingProblem& p, const IterateState& st, double beta, const SemiProximal& s,
                                const DenseVector& g, double eta, XStepPath path)
{
    if (path == XStepPath::automatic && p.constraint().is_x_minus_y() && s.is_isotropic()) {
        return x_closed_form(st, beta, s.scale(), g, eta);
    }
    return x_linearized_dense(p, st, beta, s, g, eta);
}

/// Solves (a D^T D + kappa I) x = v, by the n x n Woodbury system when n < d.
inline DenseVector solve_gram_shifted(const DesignMatrix& d, double a, double kappa, const DenseVector& v, Workspace& ws)
{
    const std::vector<double> key{0.0, a, kappa};
    const bool woodbury = d.rows() < d.cols();
    if (ws.batch_key != key || !ws.batch_factor) {
        if (woodbury) {
            if (!ws.outer_gram) ws.outer_gram = d.outer_gram();
            DenseMatrix k = a * *ws.outer_gram;
            for (std::size_t i = 0; i < k.rows(); ++i) k(i, i) += kappa;
            ws.batch_factor.emplace(k);
        } else {
            DenseMatrix h = a * d.gram();
            for (std::size_t i = 0; i < h.rows(); ++i) h(i, i) += kappa;
            ws.batch_factor.emplace(h);
        }
        ws.batch_key = key;
        ws.batch_woodbury = woodbury;
    }
    if (!ws.batch_woodbury) return ws.batch_factor->solve(v);
    DenseVector u = ws.batch_factor->solve(d.times(v));
    DenseVector x = v;
    axpy(-a, d.transpose_times(u), x);
    return (1.0 / kappa) * x;
}

/// argmin theta1(x) + 0.5 x^T H x - q^T x for the logistic loss by damped Newton.
inline DenseVector logistic_newton(const SplittingProblem& p, const DenseMatrix& h, const DenseVector& q, DenseVector x,
                                   Workspace& ws, bool isotropic, double kappa)
{
    const auto& d = p.design();
    const std::size_t n = p.n_samples();
    const double a = p.loss_scale() / static_cast<double>(n);
    auto phi = [&](const DenseVector& z) { return theta1_value(p, z) + 0.5 * dot(z, h * z) - dot(q, z); };

    double f = phi(x);
    for (int it = 0; it < 100; ++it) {
        DenseVector grad = theta1_gradient(p, x);
        grad += h * x;
        grad -= q;
        if (norm_inf(grad) <= 1e-14 * (1.0 + norm_inf(q))) break;

        std::vector<double> w(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double r = p.response()[i];
            const double s = inv_one_plus_exp(r * (d.row_dot(i, x.span()) + p.intercept()));
            w[i] = a * s * (1.0 - s);
        }
        DenseVector step;
        if (isotropic && n < p.d1()) {
            // (kappa I + D^T W D)^-1 v via the n x n system kappa I + W^1/2 D D^T W^1/2.
            if (!ws.outer_gram) ws.outer_gram = d.outer_gram();
            DenseMatrix k(n, n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) k(i, j) = std::sqrt(w[i] * w[j]) * (*ws.outer_gram)(i, j);
            for (std::size_t i = 0; i < n; ++i) k(i, i) += kappa;
            DenseVector dv = d.times(grad);
            for (std::size_t i = 0; i < n; ++i) dv[i] *= std::sqrt(w[i]);
            DenseVector u = Cholesky(k).solve(dv);
            for (std::size_t i = 0; i < n; ++i) u[i] *= std::sqrt(w[i]);
            step = grad;
            axpy(-1.0, d.transpose_times(u), step);
            step = (1.0 / kappa) * step;
        } else {
            DenseMatrix hess = h;
            for (std::size_t i = 0; i < n; ++i) {
                const DenseVector row = d.row(i);
                for (std::size_t r = 0; r < row.dim(); ++r) {
                    if (row[r] == 0.0) continue;
                    for (std::size_t c = 0; c < row.dim(); ++c) hess(r, c) += w[i] * row[r] * row[c];
                }
            }
            if (p.ridge() > 0.0)
                for (std::size_t i = 0; i < hess.rows(); ++i) hess(i, i) += p.ridge();
            step = Cholesky(hess).solve(grad);
        }

        const double slope = dot(grad, step);
        double t = 1.0;
        DenseVector trial = x;
        axpy(-1.0, step, trial);
        double ft = phi(trial);
        // Near the minimizer phi stops resolving the decrease; full steps are
        // then safe (quadratic convergence region) and only the gradient matters.
        const bool local = norm_inf(step) <= 1e-6 * (1.0 + norm_inf(x));
        if (!local) {
            for (int ls = 0; ls < 60 && ft > f - 1e-4 * t * slope; ++ls) {
                t *= 0.5;
                trial = x;
                axpy(-t, step, trial);
                ft = phi(trial);
            }
        }
        const double moved = t * norm_inf(step);
        x = trial;
        f = ft;
        if (moved <= 1e-15 * (1.0 + norm_inf(x))) break;
    }
    return x;
}

/// Exact x-subproblem: argmin theta1(x) - lambda^T A x + (beta/2)||Ax + By_k - b||^2 + 0.5||x - x_k||_S^2.
inline DenseVector x_exact(const SplittingProblem& p, const IterateState& st, double beta, const SemiProximal& s,
                           XStepPath path, Workspace& ws)
{
    DenseVector q = x_coupling(p, st.lambda, st.y, beta);
    q += s.apply(st.x);
    const bool isotropic = path == XStepPath::automatic && p.constraint().is_x_minus_y() && s.is_isotropic();

    switch (p.theta1_kind()) {
    case Theta1Kind::custom: {
        const auto& solver = p.custom_theta1().batch_x_solver;
        if (!solver) fail(ErrorKind::subproblem_unsolvable, "custom theta1 without a batch x-subproblem solver");
        DenseMatrix h = x_curvature(p, beta, s);
        if (p.ridge() > 0.0)
            for (std::size_t i = 0; i < h.rows(); ++i) h(i, i) += p.ridge();
        return solver(q, h);
    }
    case Theta1Kind::least_squares: {
        const auto& d = p.design();
        const double a = p.loss_scale() / static_cast<double>(p.n_samples());
        axpy(a, d.transpose_times(p.response()), q);
        if (isotropic) return solve_gram_shifted(d, a, p.ridge() + beta + s.scale(), q, ws);
        DenseMatrix h = a * d.gram();
        h += x_curvature(p, beta, s);
        if (p.ridge() > 0.0)
            for (std::size_t i = 0; i < h.rows(); ++i) h(i, i) += p.ridge();
        return Cholesky(h).solve(q);
    }
    case Theta1Kind::logistic: {
        const DenseMatrix h = x_curvature(p, beta, s);
        return logistic_newton(p, h, q, st.x, ws, isotropic, p.ridge() + beta + s.scale());
    }
    }
    return st.x;
}

/// sigma when M = sigma I (relative tolerance 1e-12), otherwise nullopt.
inline std::optional<double> scaled_identity_factor(const DenseMatrix& m)
{
    if (!m.square() || m.rows() == 0) return std::nullopt;
    const double sigma = m(0, 0);
    const double tol = 1e-12 * std::max(1.0, std::abs(sigma));
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            if (std::abs(m(i, j) - (i == j ? sigma : 0.0)) > tol) return std::nullopt;
    return sigma;
}

/// y-subproblem: argmin theta2(y) - lambda_half^T B y + (beta/2)||A x + B y - b||^2 + 0.5||y - y_k||_T^2.
/// Reduces to one prox call when beta B^T B + T = sigma I.
inline DenseVector y_exact(const SplittingProblem& p, const DenseVector& x_new, const DenseVector& lambda_half,
                           const DenseVector& y_k, double beta, const SemiProximal& t)
{
    const auto& c = p.constraint();
    if (c.is_x_minus_y() && t.is_isotropic()) {
        const double sigma = beta + t.scale();
        DenseVector v(p.d2());
        for (std::size_t i = 0; i < v.dim(); ++i)
            v[i] = (beta * x_new[i] - lambda_half[i] + t.scale() * y_k[i]) / sigma;
        return theta2_prox(p, v, sigma);
    }
    const DenseMatrix b = c.b();
    DenseMatrix q = beta * gram(b);
    q += t.materialize(p.d2());
    const auto sigma = scaled_identity_factor(q);
    if (!sigma || !(*sigma > 0.0)) {
        fail(ErrorKind::subproblem_unsolvable, "y-subproblem needs beta B^T B + T to be a positive multiple of I");
    }
    DenseVector ax = c.apply_a(x_new);
    ax -= c.rhs();
    DenseVector w = lambda_half;
    axpy(-beta, ax, w);
    DenseVector v = transpose_times(b, w);
    v += t.apply(y_k);
    return theta2_prox(p, (1.0 / *sigma) * v, *sigma);
}

inline void running_mean(DenseVector& bar, const DenseVector& v, std::uint64_t t)
{
    const double inv = 1.0 / static_cast<double>(t);
    for (std::size_t i = 0; i < bar.dim(); ++i) bar[i] += (v[i] - bar[i]) * inv;
}

/// Bumps k, checks for blow-up and folds the new iterate into the averages.
inline void finish_step(IterateState& next, const IterateState& prev, ErgodicIndex mode)
{
    next.k = prev.k + 1;
    if (!next.x.all_finite() || !next.y.all_finite() || !next.lambda.all_finite()) {
        fail(ErrorKind::divergence, "non-finite iterate at k = " + std::to_string(next.k));
    }
    if (mode == ErgodicIndex::staggered) {
        // x-bar_t averages x_1..x_t, y-bar_t averages y_2..y_{t+1}.
        if (prev.k >= 1) {
            next.t = prev.k;
            running_mean(next.x_bar, prev.x, next.t);
            running_mean(next.y_bar, next.y, next.t);
            running_mean(next.lambda_bar, next.lambda, next.t);
        }
    } else {
        next.t = next.k;
        running_mean(next.x_bar, next.x, next.t);
        running_mean(next.y_bar, next.y, next.t);
        running_mean(next.lambda_bar, next.lambda, next.t);
    }
}

inline std::vector<std::size_t> draw_minibatch(const SplittingProblem& p, std::size_t size, CounterRng& rng)
{
    if (p.n_samples() == 0) fail(ErrorKind::empty_dataset, "stochastic step on a problem without samples");
    std::vector<std::size_t> batch(size);
    for (auto& i : batch) i = static_cast<std::size_t>(rng.uniform_index(p.n_samples()));
    return batch;
}

/// Shared body of the relaxed two-multiplier scheme. `x_update` fills next.x.
template <class XUpdate>
IterateState relaxed_step(const SplittingProblem& p, const IterateState& st, const SolverConfig& cfg, XUpdate&& x_update)
{
    require_state(p, st);
    IterateState next = st;
    next.x = x_update(next);
    const double beta = cfg.beta;
    next.lambda_half = st.lambda;
    axpy(-cfg.alpha * beta, p.constraint().residual(next.x, st.y), next.lambda_half);
    next.y = y_exact(p, next.x, next.lambda_half, st.y, beta, cfg.t);
    next.lambda = next.lambda_half;
    axpy(-cfg.gamma * beta, p.constraint().residual(next.x, next.y), next.lambda);
    finish_step(next, st, cfg.ergodic);
    return next;
}

template <class XUpdate>
IterateState admm_step(const SplittingProblem& p, const IterateState& st, const SolverConfig& cfg, XUpdate&& x_update)
{
    require_state(p, st);
    IterateState next = st;
    next.x = x_update(next);
    const double beta = cfg.beta;
    next.lambda_half = st.lambda;
    next.y = y_exact(p, next.x, st.lambda, st.y, beta, SemiProximal::zero());
    next.lambda = st.lambda;
    axpy(-beta, p.constraint().residual(next.x, next.y), next.lambda);
    finish_step(next, st, cfg.ergodic);
    return next;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Closed-form stochastic x-updates for the x - y = 0 encoding

/// Lasso / group-lasso x-step with the sampled least-squares gradient
/// g = c (d^T x_k - r) d. With c = 1 and S = I this is the textbook update
/// ((r - d^T x_k) d + lambda + beta y + (1 + 1/eta) x_k) / (beta + 1 + 1/eta).
inline DenseVector x_update_lasso(const IterateState& st, const SolverConfig& cfg, const SampleRef& s, double eta,
                                  double grad_scale = 1.0)
{
    if (!(eta > 0.0)) fail(ErrorKind::nonpositive_eta, "eta must be > 0");
    if (s.row.dim() != st.x.dim()) fail(ErrorKind::dimension_mismatch, "x_update_lasso: sample row dim");
    const double slope = grad_scale * (dot(s.row, st.x) - s.response);
    const DenseVector g = slope * s.row;
    const SemiProximal sp = effective_parameters(cfg).s;
    if (sp.is_isotropic()) return detail::x_closed_form(st, cfg.beta, sp.scale(), g, eta);
    DenseMatrix h = sp.materialize(st.x.dim());
    for (std::size_t i = 0; i < h.rows(); ++i) h(i, i) += cfg.beta + 1.0 / eta;
    DenseVector rhs = st.lambda;
    axpy(cfg.beta, st.y, rhs);
    axpy(1.0 / eta, st.x, rhs);
    rhs += sp.apply(st.x);
    rhs -= g;
    return Cholesky(h).solve(rhs);
}

/// The group-lasso x-step is the lasso one; only the y-step differs.
inline DenseVector x_update_group_lasso(const IterateState& st, const SolverConfig& cfg, const SampleRef& s,
                                        double eta, double grad_scale = 1.0)
{
    return x_update_lasso(st, cfg, s, eta, grad_scale);
}

/// Logistic x-step: the numerator gains +c r d / (1 + exp(r (d^T x_k + x0))).
inline DenseVector x_update_logistic(const IterateState& st, const SolverConfig& cfg, const SampleRef& s, double eta,
                                     double intercept = 0.0, double grad_scale = 1.0)
{
    if (!(eta > 0.0)) fail(ErrorKind::nonpositive_eta, "eta must be > 0");
    if (s.row.dim() != st.x.dim()) fail(ErrorKind::dimension_mismatch, "x_update_logistic: sample row dim");
    const double m = dot(s.row, st.x) + intercept;
    const double slope = -grad_scale * s.response * detail::inv_one_plus_exp(s.response * m);
    const DenseVector g = slope * s.row;
    const SemiProximal sp = effective_parameters(cfg).s;
    if (sp.is_isotropic()) return detail::x_closed_form(st, cfg.beta, sp.scale(), g, eta);
    DenseMatrix h = sp.materialize(st.x.dim());
    for (std::size_t i = 0; i < h.rows(); ++i) h(i, i) += cfg.beta + 1.0 / eta;
    DenseVector rhs = st.lambda;
    axpy(cfg.beta, st.y, rhs);
    axpy(1.0 / eta, st.x, rhs);
    rhs += sp.apply(st.x);
    rhs -= g;
    return Cholesky(h).solve(rhs);
}

/// Linearized x-subproblem for an arbitrary gradient g, always by a dense
/// solve of its stationarity system.
inline DenseVector x_update_generic(const SplittingProblem& p, const IterateState& st, const SolverConfig& cfg,
                                    const DenseVector& g, double eta)
{
    detail::require_state(p, st);
    if (g.dim() != p.d1()) fail(ErrorKind::dimension_mismatch, "x_update_generic: gradient dim");
    return detail::x_linearized_dense(p, st, cfg.beta, effective_parameters(cfg).s, g, eta);
}

// ---------------------------------------------------------------------------
// Steps. The SPB-SCPRSM steps read alpha, gamma, S and T straight from cfg;
// run_solver maps the named special cases onto them.

inline IterateState step_batch_admm(const SplittingProblem& p, const IterateState& st, const SolverConfig& cfg,
                                    Workspace* ws = nullptr)
{
    Workspace local;
    Workspace& w = ws ? *ws : local;
    return detail::admm_step(p, st, cfg, [&](const IterateState& s) {
        return detail::x_exact(p, s, cfg.beta, SemiProximal::zero(), cfg.x_path, w);
    });
}

inline IterateState step_batch_spb_scprsm(const SplittingProblem& p, const IterateState& st, const SolverConfig& cfg,
                                          Workspace* ws = nullptr)
{
    Workspace local;
    Workspace& w = ws ? *ws : local;
    return detail::relaxed_step(p, st, cfg, [&](const IterateState& s) {
        return detail::x_exact(p, s, cfg.beta, cfg.s, cfg.x_path, w);
    });
}

inline IterateState step_sto_spb_scprsm(const SplittingProblem& p, const IterateState& st, const SolverConfig& cfg,
                                        Workspace* = nullptr)
{
    return detail::relaxed_step(p, st, cfg, [&](IterateState& s) {
        const double eta = schedule_eta(cfg.schedule, s.k + 1);
        const auto batch = detail::draw_minibatch(p, cfg.minibatch, s.rng);
        const DenseVector g = stochastic_gradient(p, s.x, batch);
        return detail::x_linearized(p, s, cfg.beta, cfg.s, g, eta, cfg.x_path);
    });
}

inline IterateState step_sto_admm(const SplittingProblem& p, const IterateState& st, const SolverConfig& cfg,
                                  Workspace* = nullptr)
{
    return detail::admm_step(p, st, cfg, [&](IterateState& s) {
        const double eta = schedule_eta(cfg.schedule, s.k + 1);
        const auto batch = detail::draw_minibatch(p, cfg.minibatch, s.rng);
        const DenseVector g = stochastic_gradient(p, s.x, batch);
        return detail::x_linearized(p, s, cfg.beta, SemiProximal::zero(), g, eta, cfg.x_path);
    });
}

/// cfg with the algorithm's effective alpha, gamma, S, T written in.
inline SolverConfig resolved_config(const SolverConfig& cfg)
{
    const EffectiveParameters e = effective_parameters(cfg);
    SolverConfig c = cfg;
    c.alpha = e.alpha;
    c.gamma = e.gamma;
    c.s = e.s;
    c.t = e.t;
    return c;
}

/// One step of cfg.algorithm.
inline IterateState step(const SplittingProblem& p, const IterateState& st, const SolverConfig& cfg,
                         Workspace* ws = nullptr)
{
    switch (cfg.algorithm) {
    case Algorithm::admm: return step_batch_admm(p, st, cfg, ws);
    case Algorithm::sto_admm: return step_sto_admm(p, st, cfg, ws);
    case Algorithm::prsm:
    case Algorithm::scprsm:
    case Algorithm::spb_scprsm: return step_batch_spb_scprsm(p, st, resolved_config(cfg), ws);
    case Algorithm::sto_spb_scprsm: return step_sto_spb_scprsm(p, st, cfg, ws);
    }
    return st;
}

// ---------------------------------------------------------------------------
// Driver

struct RunOptions {
    std::uint64_t cadence = 1;
    bool timing = false;
    /// Called after every step with the state before and after it.
    std::function<void(const IterateState& prev, const IterateState& next)> observer;
    /// Optional potential recorded alongside each trace row.
    std::function<double(const IterateState&)> lyapunov;
};

struct RunResult {
    Trace trace;
    IterateState final_state;
};

inline TraceRecord make_record(const SplittingProblem& p, const IterateState& s)
{
    TraceRecord r;
    r.iteration = s.t;
    r.objective = objective(p, s.x_bar, s.y_bar);
    r.constraint_norm = norm2(p.constraint().residual(s.x_bar, s.y_bar));
    r.raw_objective = objective(p, s.x, s.y);
    return r;
}

/// Runs until the averages hold cfg.max_iters terms, recording every
/// `cadence`-th average. Under the default index convention this takes
/// max_iters + 1 steps.
inline RunResult run_solver(const SplittingProblem& p, const SolverConfig& cfg, const RunOptions& opt = {},
                            std::optional<IterateState> from = std::nullopt)
{
    require_valid(cfg);
    if (opt.cadence < 1) fail(ErrorKind::invalid_config, "cadence must be >= 1");
    RunResult out;
    out.trace.solver = cfg.name.empty() ? to_string(cfg.algorithm) : cfg.name;
    IterateState st = from ? std::move(*from) : IterateState::start(p, cfg.seed);
    detail::require_state(p, st);
    Workspace ws;
    const auto t0 = std::chrono::steady_clock::now();
    while (st.t < cfg.max_iters) {
        IterateState next = step(p, st, cfg, &ws);
        if (opt.observer) opt.observer(st, next);
        if (next.t >= 1 && next.t != st.t && next.t % opt.cadence == 0) {
            TraceRecord r = make_record(p, next);
            if (opt.timing) {
                r.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0)
                                .count();
            }
            if (opt.lyapunov) r.lyapunov = opt.lyapunov(next);
            out.trace.records.push_back(r);
        }
        st = std::move(next);
    }
    out.final_state = std::move(st);
    return out;
}

/// High-accuracy batch ADMM solve used as the optimal reference w*.
struct ReferenceSolution {
    DenseVector x, y, lambda;
    double f_star = 0.0;
    std::uint64_t iterations = 0;
    bool converged = false;
};

inline ReferenceSolution solve_reference(const SplittingProblem& p, double beta = 1.0, std::uint64_t max_iters = 20000,
                                         double tol = 1e-12)
{
    SolverConfig cfg;
    cfg.algorithm = Algorithm::admm;
    cfg.beta = beta;
    cfg.ergodic = ErgodicIndex::uniform;
    IterateState st = IterateState::start(p, 0);
    Workspace ws;
    ReferenceSolution out;
    for (std::uint64_t k = 0; k < max_iters; ++k) {
        IterateState next = step_batch_admm(p, st, cfg, &ws);
        const double scale = 1.0 + std::max(norm_inf(next.y), norm_inf(next.lambda));
        const double change = std::max({max_abs_diff(next.x, st.x), max_abs_diff(next.y, st.y),
                                        max_abs_diff(next.lambda, st.lambda)});
        st = std::move(next);
        out.iterations = k + 1;
        if (change <= tol * scale) {
            out.converged = true;
            break;
        }
    }
    out.x = st.x;
    out.y = st.y;
    out.lambda = st.lambda;
    out.f_star = objective(p, st.x, st.y);
    return out;
}

} // namespace splitkit
