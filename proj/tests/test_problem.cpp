#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>

#include "splitkit/problem.hpp"

using namespace splitkit;

namespace {

template <class F>
ErrorKind kind_of(F&& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no splitkit::Error thrown";
    return ErrorKind::io_error;
}

std::shared_ptr<const DesignMatrix> design(DenseMatrix m)
{
    return std::make_shared<const DesignMatrix>(std::move(m));
}

DenseMatrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& gen)
{
    std::normal_distribution<double> nd;
    DenseMatrix m(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) m(i, j) = nd(gen);
    return m;
}

DenseVector random_vector(std::size_t n, std::mt19937_64& gen, double scale = 1.0)
{
    std::normal_distribution<double> nd;
    DenseVector v(n);
    for (auto& e : v.span()) e = scale * nd(gen);
    return v;
}

} // namespace

TEST(Objective, LassoAtZero)
{
    const auto p = SplittingProblem::lasso(design(DenseMatrix{{1, 2}, {3, 4}, {0, 1}}), DenseVector{1, -2, 3}, 0.7);
    EXPECT_DOUBLE_EQ(objective(p, DenseVector(2), DenseVector(2)), 0.5 * (1 + 4 + 9));
}

TEST(Objective, LassoPenaltyTerm)
{
    const DenseMatrix d{{1, 2}, {3, 4}, {0, 1}};
    const DenseVector r{1, -2, 3};
    const auto p = SplittingProblem::lasso(design(d), r, 1.0);
    const DenseVector x{0.3, -0.1};
    const DenseVector res = d * x - r;
    EXPECT_NEAR(objective(p, x, DenseVector{1, -1}), 0.5 * dot(res, res) + 2.0, 1e-14);
}

TEST(Objective, LogisticAtZeroIsLog2)
{
    const auto p = SplittingProblem::logistic(design(DenseMatrix{{1, 2}, {-3, 4}, {0, 1}}), DenseVector{1, -1, 1}, 1.0);
    EXPECT_NEAR(objective(p, DenseVector(2), DenseVector(2)), std::log(2.0), 1e-15);
}

TEST(Objective, DimensionMismatch)
{
    const auto p = SplittingProblem::lasso(design(DenseMatrix{{1, 2}}), DenseVector{1}, 1.0);
    EXPECT_EQ(kind_of([&] { objective(p, DenseVector(3), DenseVector(2)); }), ErrorKind::dimension_mismatch);
}

TEST(Subgradient, SpecExamples)
{
    const auto ls = SplittingProblem::lasso(design(DenseMatrix{{1, 0}}), DenseVector{1}, 0.0);
    EXPECT_EQ(theta1_subgradient(ls, DenseVector(2), ls.sample(0)), (DenseVector{-1, 0}));

    const auto lg = SplittingProblem::logistic(design(DenseMatrix{{2}}), DenseVector{1}, 1.0);
    EXPECT_NEAR(theta1_subgradient(lg, DenseVector(1), lg.sample(0))[0], -1.0, 1e-15);

    const DenseVector d{3, -1, 2};
    const auto ls3 = SplittingProblem::lasso(design(DenseMatrix{{3, -1, 2}}), DenseVector{1}, 0.0);
    const DenseVector x = (1.0 / dot(d, d)) * d;
    EXPECT_LT(norm_inf(theta1_subgradient(ls3, x, ls3.sample(0))), 1e-15);
}

TEST(Subgradient, CustomWithoutOracle)
{
    auto p = SplittingProblem::custom(Constraint::x_minus_y(2), 3, CustomTheta1{}, CustomTheta2{});
    EXPECT_EQ(kind_of([&] { theta1_subgradient(p, DenseVector(2), SampleRef{0, {}, 0.0}); }),
              ErrorKind::unsupported_theta1);
}

TEST(Subgradient, MatchesFiniteDifferences)
{
    std::mt19937_64 gen(17);
    const std::size_t d = 6;
    const DenseMatrix dm = random_matrix(4, d, gen);
    const auto ls = SplittingProblem::lasso(design(dm), random_vector(4, gen), 0.1);
    const auto lg = SplittingProblem::logistic(design(dm), DenseVector{1, -1, -1, 1}, 1.0, 0.3);
    for (const SplittingProblem* p : {&ls, &lg}) {
        for (int trial = 0; trial < 20; ++trial) {
            const DenseVector x = random_vector(d, gen);
            const SampleRef s = p->sample(static_cast<std::size_t>(trial) % 4);
            const DenseVector g = theta1_subgradient(*p, x, s);
            const double h = 1e-6 * (1.0 + norm2(x));
            for (std::size_t j = 0; j < d; ++j) {
                DenseVector xp = x, xm = x;
                xp[j] += h;
                xm[j] -= h;
                const double fd = (detail::sample_loss(*p, dot(s.row, xp), s.response) -
                                   detail::sample_loss(*p, dot(s.row, xm), s.response)) /
                                  (2 * h);
                EXPECT_NEAR(g[j], fd, 1e-6 * std::max(1.0, std::abs(fd))) << to_string(p->theta1_kind());
            }
        }
    }
}

TEST(Subgradient, AveragedLeastSquaresIsFullGradient)
{
    std::mt19937_64 gen(23);
    for (int trial = 0; trial < 10; ++trial) {
        const DenseMatrix dm = random_matrix(5, 3, gen);
        const DenseVector r = random_vector(5, gen);
        const auto p = SplittingProblem::lasso(design(dm), r, 0.0);
        const DenseVector x = random_vector(3, gen);
        DenseVector sum(3);
        for (std::size_t i = 0; i < 5; ++i) sum += theta1_subgradient(p, x, p.sample(i));
        const DenseVector full = transpose_times(dm, dm * x - r);
        EXPECT_LT(max_abs_diff(sum, full), 1e-12);
        // The unbiased estimate is scaled by n, so its full-data mean is the gradient too.
        EXPECT_LT(max_abs_diff(theta1_gradient(p, x), full), 1e-12);
    }
}

TEST(Prox, SpecExamples)
{
    const auto l1 = SplittingProblem::lasso(design(DenseMatrix{{1, 0}}), DenseVector{0}, 1.0);
    EXPECT_EQ(theta2_prox(l1, DenseVector{2, -0.5}, 1.0), (DenseVector{1, 0}));

    const auto gl = SplittingProblem::group_lasso(design(DenseMatrix{{1, 0}}), DenseVector{0},
                                                  IndexPartition::contiguous({2}), 5.0);
    EXPECT_EQ(theta2_prox(gl, DenseVector{3, 4}, 1.0), (DenseVector{0, 0}));

    const auto free = SplittingProblem::lasso(design(DenseMatrix{{1, 0}}), DenseVector{0}, 0.0);
    EXPECT_EQ(theta2_prox(free, DenseVector{2, -0.5}, 3.0), (DenseVector{2, -0.5}));

    EXPECT_EQ(kind_of([&] { theta2_prox(l1, DenseVector{1, 1}, 0.0); }), ErrorKind::nonpositive_scale);
    EXPECT_EQ(kind_of([&] { theta2_prox(l1, DenseVector{1}, 1.0); }), ErrorKind::dimension_mismatch);
}

TEST(Prox, L1OptimalityCondition)
{
    std::mt19937_64 gen(29);
    const auto p = SplittingProblem::lasso(design(DenseMatrix(1, 8)), DenseVector{0}, 0.8);
    std::uniform_real_distribution<double> ud(0.2, 5.0);
    for (int trial = 0; trial < 30; ++trial) {
        const DenseVector v = random_vector(8, gen, 2.0);
        const double scale = ud(gen);
        const DenseVector u = theta2_prox(p, v, scale);
        for (std::size_t i = 0; i < 8; ++i) {
            const double sub = scale * (v[i] - u[i]);
            EXPECT_LE(std::abs(sub), p.mu() + 1e-12);
            if (u[i] != 0.0) {
                EXPECT_NEAR(sub, p.mu() * (u[i] > 0 ? 1 : -1), 1e-12);
            }
        }
    }
}

TEST(Residual, SpecExamples)
{
    const auto p = SplittingProblem::lasso(design(DenseMatrix{{1, 0}}), DenseVector{0}, 1.0);
    EXPECT_EQ(constraint_residual(p, DenseVector{0.5, 2}, DenseVector{0.5, 2}), (DenseVector{0, 0}));
    EXPECT_EQ(constraint_residual(p, DenseVector{1, 0}, DenseVector{0, 0}), (DenseVector{1, 0}));

    const auto q = SplittingProblem::custom(Constraint::general(DenseMatrix(1, 2), DenseMatrix(1, 3), DenseVector{1}),
                                            1, {}, {});
    EXPECT_EQ(constraint_residual(q, DenseVector{4, 5}, DenseVector{1, 2, 3}), (DenseVector{-1}));
    EXPECT_EQ(kind_of([&] { constraint_residual(q, DenseVector{4}, DenseVector{1, 2, 3}); }),
              ErrorKind::dimension_mismatch);
}

TEST(Model, Invariants)
{
    EXPECT_EQ(kind_of([] { SplittingProblem::lasso(design(DenseMatrix(2, 2)), DenseVector{1}, 1.0); }),
              ErrorKind::dimension_mismatch);
    EXPECT_EQ(kind_of([] { SplittingProblem::lasso(design(DenseMatrix(1, 2)), DenseVector{1}, -1.0); }),
              ErrorKind::invalid_config);
    EXPECT_EQ(kind_of([] {
                  SplittingProblem::group_lasso(design(DenseMatrix(1, 3)), DenseVector{1},
                                                IndexPartition::contiguous({2}), 1.0);
              }),
              ErrorKind::invalid_partition);
    EXPECT_EQ(kind_of([] {
                  Constraint::general(DenseMatrix(2, 2), DenseMatrix(1, 2), DenseVector{1});
              }),
              ErrorKind::dimension_mismatch);
    const auto p = SplittingProblem::lasso(design(DenseMatrix(3, 2)), DenseVector(3), 1.0);
    EXPECT_FALSE(p.groups().has_value());
    EXPECT_DOUBLE_EQ(p.loss_scale(), 3.0);
}

TEST(Model, RidgeAddsStrongConvexity)
{
    auto p = SplittingProblem::lasso(design(DenseMatrix{{1, 0}}), DenseVector{0}, 0.0);
    p.set_ridge(0.1);
    const DenseVector x{2, -1};
    EXPECT_NEAR(theta1_value(p, x), 0.5 * 4 + 0.05 * 5, 1e-15);
    const std::vector<std::size_t> batch{0};
    EXPECT_LT(max_abs_diff(stochastic_gradient(p, x, batch), DenseVector{2 + 0.2, -0.1}), 1e-15);
}
