#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "splitkit/data.hpp"

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

Dataset parse(const std::string& text, const LibsvmOptions& opt = {})
{
    std::istringstream in(text);
    return parse_libsvm(in, opt);
}

std::string dump(const Dataset& ds)
{
    std::ostringstream out;
    write_libsvm(out, ds);
    return out.str();
}

std::size_t count_nonzero(const DenseVector& v)
{
    std::size_t c = 0;
    for (double e : v) c += e != 0.0;
    return c;
}

} // namespace

TEST(GenLasso, DefaultShapes)
{
    const auto g = gen_lasso(200, 400, 100, 1e-3, 7);
    EXPECT_EQ(g.data.n(), 200u);
    EXPECT_EQ(g.data.d(), 400u);
    EXPECT_EQ(count_nonzero(*g.data.ground_truth), 100u);
    EXPECT_GT(g.mu, 0.0);
    EXPECT_NEAR(g.mu, 0.1 * norm_inf(g.data.design->transpose_times(g.data.r)), 0.0);
    EXPECT_EQ(g.manifest["seed"], 7);
    EXPECT_EQ(g.manifest["d"], 400);
}

TEST(GenLasso, ZeroSparsityIsPureNoise)
{
    const auto g = gen_lasso(50, 20, 0, 1e-3, 3);
    EXPECT_EQ(count_nonzero(*g.data.ground_truth), 0u);
    EXPECT_GT(g.mu, 0.0);
    EXPECT_LT(norm_inf(g.data.r), 0.5);
}

TEST(GenLasso, NoiseConcentrates)
{
    // mean of ||r - D x||^2 / n over 20 seeds against noise_var, 3 standard errors
    const double var = 1e-3;
    const std::size_t n = 200;
    double sum = 0.0, sum_sq = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto g = gen_lasso(n, 40, 10, var, seed);
        const DenseVector e = g.data.r - g.data.design->times(*g.data.ground_truth);
        const double est = dot(e.span(), e.span()) / n;
        sum += est;
        sum_sq += est * est;
    }
    const double mean = sum / 20;
    const double se = std::sqrt((sum_sq / 20 - mean * mean) / 19);
    EXPECT_LT(std::abs(mean - var), 3 * se + 1e-12);
}

TEST(GenLasso, SeedDeterministic)
{
    const auto a = gen_lasso(30, 60, 10, 1e-3, 11);
    const auto b = gen_lasso(30, 60, 10, 1e-3, 11);
    EXPECT_EQ(a.data.design->dense(), b.data.design->dense());
    EXPECT_EQ(a.data.r, b.data.r);
    EXPECT_EQ(dump(a.data), dump(b.data));
    EXPECT_EQ(a.manifest.dump(), b.manifest.dump());
    const auto c = gen_lasso(30, 60, 10, 1e-3, 12);
    EXPECT_NE(a.data.r, c.data.r);
}

TEST(GenLasso, BadDimensions)
{
    EXPECT_EQ(kind_of([] { gen_lasso(10, 5, 6, 1e-3, 0); }), ErrorKind::bad_dimensions);
    EXPECT_EQ(kind_of([] { gen_lasso(0, 5, 1, 1e-3, 0); }), ErrorKind::bad_dimensions);
    EXPECT_EQ(kind_of([] { gen_lasso(5, 5, 1, -1.0, 0); }), ErrorKind::bad_dimensions);
}

TEST(GenGroupLasso, Defaults)
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto g = gen_group_lasso(200, 10, 50, 0.05, seed);
        ASSERT_TRUE(g.data.groups);
        EXPECT_EQ(g.data.groups->size(), 10u);
        EXPECT_GE(g.data.d(), 10u);
        EXPECT_LE(g.data.d(), 500u);
        EXPECT_EQ(g.data.groups->dim(), g.data.d());
        for (const auto& b : g.data.groups->blocks()) {
            EXPECT_GE(b.size(), 1u);
            EXPECT_LE(b.size(), 50u);
            std::size_t nz = 0;
            for (auto j : b) nz += (*g.data.ground_truth)[j] != 0.0;
            EXPECT_EQ(nz, static_cast<std::size_t>(std::llround(0.05 * b.size())));
        }
        const DenseVector dtr = g.data.design->transpose_times(g.data.r);
        double best = 0.0;
        for (const auto& b : g.data.groups->blocks())
            for (auto j : b) best = std::max(best, std::abs(dtr[j]));
        EXPECT_EQ(g.mu, 0.1 * best);
    }
}

TEST(GenGroupLasso, Boundaries)
{
    const auto singles = gen_group_lasso(20, 6, 1, 1.0, 1);
    EXPECT_EQ(*singles.data.groups, IndexPartition::singletons(6));
    EXPECT_EQ(count_nonzero(*singles.data.ground_truth), 6u);
    const auto dense = gen_group_lasso(20, 3, 8, 1.0, 2);
    EXPECT_EQ(count_nonzero(*dense.data.ground_truth), dense.data.d());
    EXPECT_EQ(kind_of([] { gen_group_lasso(20, 0, 5, 0.1, 0); }), ErrorKind::bad_dimensions);
    EXPECT_EQ(kind_of([] { gen_group_lasso(20, 2, 5, 1.5, 0); }), ErrorKind::bad_dimensions);
}

TEST(GenLogistic, LabelsAndNormalization)
{
    const auto g = gen_logistic(300, 50, 10, 4);
    EXPECT_EQ(g.data.kind, DatasetKind::binary);
    EXPECT_EQ(g.mu, 1.0);
    for (double r : g.data.r) EXPECT_TRUE(r == 1.0 || r == -1.0);
    for (std::size_t i = 0; i < g.data.n(); ++i) EXPECT_NEAR(g.data.design->row_norm_sq(i), 1.0, 1e-12);
    const auto raw = gen_logistic(10, 50, 10, 4, 1e-3, false);
    EXPECT_GT(std::abs(raw.data.design->row_norm_sq(0) - 1.0), 1e-6);
    EXPECT_EQ(kind_of([] { gen_logistic(10, 5, 6, 0); }), ErrorKind::bad_dimensions);
}

TEST(GenLogistic, PureNoiseIsBalanced)
{
    const auto g = gen_logistic(4000, 5, 0, 9, 1e-6);
    double s = 0.0;
    for (double r : g.data.r) s += r;
    EXPECT_LT(std::abs(s) / 4000, 0.05);
}

TEST(GenLogistic, SeedDeterministic)
{
    EXPECT_EQ(dump(gen_logistic(40, 30, 5, 8).data), dump(gen_logistic(40, 30, 5, 8).data));
}

TEST(Libsvm, SpecExamples)
{
    auto ds = parse("1 1:0.5 3:-2\n");
    EXPECT_EQ(ds.n(), 1u);
    EXPECT_EQ(ds.d(), 3u);
    EXPECT_EQ(ds.r, DenseVector{1.0});
    EXPECT_EQ(ds.design->row(0), (DenseVector{0.5, 0.0, -2.0}));

    ds = parse("1 2:1\n-1\n");
    EXPECT_EQ(ds.r, (DenseVector{1.0, -1.0}));
    EXPECT_EQ(ds.design->row(1), (DenseVector{0.0, 0.0}));

    EXPECT_EQ(kind_of([] { parse("1 3:1 2:1\n"); }), ErrorKind::non_increasing_indices);
    EXPECT_EQ(kind_of([] { parse("1 2:1 2:1\n"); }), ErrorKind::non_increasing_indices);
}

TEST(Libsvm, ParseErrorsCarryPosition)
{
    try {
        parse("1 1:2\n2 1:x\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::parse_error);
        EXPECT_NE(std::string(e.what()).find("line 2, column 5"), std::string::npos) << e.what();
    }
    EXPECT_EQ(kind_of([] { parse("abc 1:2\n"); }), ErrorKind::parse_error);
    EXPECT_EQ(kind_of([] { parse("1 0:2\n"); }), ErrorKind::parse_error);
    EXPECT_EQ(kind_of([] { parse("1 4\n"); }), ErrorKind::parse_error);
    EXPECT_EQ(kind_of([] { parse(""); }), ErrorKind::empty_file);
    EXPECT_EQ(kind_of([] { parse("\n  \n"); }), ErrorKind::empty_file);
    EXPECT_EQ(kind_of([] { read_libsvm("/nonexistent/file.svm"); }), ErrorKind::io_error);
}

TEST(Libsvm, BlankLinesAndCarriageReturns)
{
    const auto ds = parse("\n+1 1:1\r\n\n-1 2:3\r\n");
    EXPECT_EQ(ds.n(), 2u);
    EXPECT_EQ(ds.design->row(1), (DenseVector{0.0, 3.0}));
}

TEST(Libsvm, BinaryLabelMapping)
{
    LibsvmOptions opt;
    opt.kind = DatasetKind::binary;
    EXPECT_EQ(parse("2 1:1\n4 1:1\n2 1:1\n", opt).r, (DenseVector{-1.0, 1.0, -1.0}));
    EXPECT_EQ(parse("1 1:1\n1 1:1\n", opt).r, (DenseVector{1.0, 1.0}));
    EXPECT_EQ(kind_of([&] { parse("0 1:1\n1 1:1\n2 1:1\n", opt); }), ErrorKind::parse_error);
    EXPECT_EQ(parse("2 1:1\n4 1:1\n").r, (DenseVector{2.0, 4.0}));
}

TEST(Libsvm, StorageFollowsDensity)
{
    EXPECT_FALSE(parse("1 1:1 2:1\n").design->is_sparse());
    std::string text;
    for (int i = 0; i < 20; ++i) text += "1 " + std::to_string(i + 1) + ":1\n";
    const auto ds = parse(text + "1 100:1\n");
    EXPECT_TRUE(ds.design->is_sparse());
    EXPECT_EQ(ds.d(), 100u);
}

TEST(Libsvm, DimOverride)
{
    LibsvmOptions opt;
    opt.dim = 5;
    EXPECT_EQ(parse("1 2:1\n", opt).d(), 5u);
    opt.dim = 1;
    EXPECT_EQ(kind_of([&] { parse("1 2:1\n", opt); }), ErrorKind::bad_dimensions);
}

TEST(Libsvm, RoundTripExact)
{
    const auto g = gen_lasso(25, 12, 4, 1e-3, 5);
    const std::string text = dump(g.data);
    LibsvmOptions opt;
    opt.dim = g.data.d();
    const auto back = parse(text, opt);
    EXPECT_EQ(back.r, g.data.r);
    EXPECT_EQ(back.design->to_dense(), g.data.design->dense());
    EXPECT_EQ(dump(back), text);

    // Sparse storage round-trips too, through an actual file.
    std::string sparse;
    for (int i = 0; i < 30; ++i) sparse += "0.1 " + std::to_string(2 * i + 1) + ":" + format_double(1.0 / (i + 3)) + "\n";
    const auto s = parse(sparse);
    ASSERT_TRUE(s.design->is_sparse());
    const auto path = (std::filesystem::temp_directory_path() / "splitkit_roundtrip.svm").string();
    write_libsvm(path, s);
    const auto s2 = read_libsvm(path);
    std::filesystem::remove(path);
    EXPECT_EQ(s2.r, s.r);
    EXPECT_EQ(s2.design->to_dense(), s.design->to_dense());
}

TEST(Libsvm, SeventeenDigits)
{
    EXPECT_EQ(format_double(0.1), "0.10000000000000001");
    for (double v : {1.0 / 3.0, -2.5e-300, 6.02214076e23, 1e-14}) EXPECT_EQ(*parse_double(format_double(v)), v);
}

TEST(Libsvm, ReferenceFilesWhenSupplied)
{
    struct Expect {
        const char* env;
        std::size_t d, n;
    };
    int checked = 0;
    for (const Expect& e : {Expect{"SPLITKIT_BODYFAT", 14, 252}, Expect{"SPLITKIT_A9A", 123, 32561},
                            Expect{"SPLITKIT_E2006", 150360, 16087}}) {
        const char* path = std::getenv(e.env);
        if (!path) continue;
        const auto ds = read_libsvm(path);
        EXPECT_EQ(ds.d(), e.d) << e.env;
        EXPECT_EQ(ds.n(), e.n) << e.env;
        ++checked;
    }
    if (checked == 0) GTEST_SKIP() << "set SPLITKIT_BODYFAT / SPLITKIT_A9A / SPLITKIT_E2006 to check reference dataset shapes";
}

TEST(MakeProblem, Models)
{
    const auto g = gen_group_lasso(20, 3, 4, 0.5, 1);
    const auto p = make_problem(g.data, ModelKind::group_lasso, g.mu);
    EXPECT_EQ(p.theta2_kind(), Theta2Kind::group_l2);
    EXPECT_EQ(*p.groups(), *g.data.groups);
    const auto l = gen_logistic(20, 5, 2, 1);
    EXPECT_EQ(make_problem(l.data, ModelKind::logistic, 1.0).theta1_kind(), Theta1Kind::logistic);
    EXPECT_EQ(kind_of([] { parse_model("ridge"); }), ErrorKind::invalid_config);
}
