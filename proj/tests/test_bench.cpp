#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "splitkit/bench.hpp"

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

ExperimentSpec parse_text(const std::string& text)
{
    std::istringstream in(text);
    return parse_experiment(in);
}

std::string csv_text(const std::vector<Trace>& traces)
{
    std::ostringstream out;
    emit_csv(traces, out);
    return out.str();
}

std::vector<TraceRecord> power_trace(std::uint64_t t0, std::uint64_t t1, std::uint64_t step, double (*gap)(double))
{
    std::vector<TraceRecord> out;
    for (std::uint64_t t = t0; t <= t1; t += step) {
        TraceRecord r;
        r.iteration = t;
        r.objective = gap(static_cast<double>(t));
        out.push_back(r);
    }
    return out;
}

const char* kSmall = R"(
# small lasso instance
[problem]
model = lasso
n = 40
d = 30
nnz = 5
seed = 3

[run]
cadence = 10
iters = 600
seed = 7

[solver sto_admm]

[solver reduced]
algorithm = sto_spb_scprsm
alpha = 0
gamma = 1
s = zero
t = zero
)";

std::vector<std::string> strip_solver(const std::string& csv)
{
    std::vector<std::string> rows;
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) rows.push_back(line.substr(line.find(',')));
    return rows;
}

} // namespace

TEST(Experiment, ParsesSectionsAndDefaults)
{
    const auto spec = parse_text(kSmall);
    EXPECT_EQ(spec.problem.n, 40u);
    EXPECT_EQ(spec.problem.data_seed, 3u);
    EXPECT_EQ(spec.cadence, 10u);
    ASSERT_EQ(spec.solvers.size(), 2u);
    EXPECT_EQ(spec.solvers[0].algorithm, Algorithm::sto_admm);
    EXPECT_EQ(spec.solvers[0].max_iters, 600u);
    EXPECT_EQ(spec.solvers[0].seed, 7u);
    EXPECT_EQ(spec.solvers[1].name, "reduced");
    EXPECT_EQ(spec.solvers[1].alpha, 0.0);
    EXPECT_TRUE(spec.solvers[1].s.is_zero());
    EXPECT_TRUE(validate_experiment(spec).empty());

    const auto d = parse_text("[solver sto_spb_scprsm]\nschedule = strongly_convex:0.1\n");
    EXPECT_EQ(d.solvers[0].max_iters, 50000u);
    EXPECT_EQ(d.solvers[0].schedule.kind, StepSchedule::Kind::strongly_convex);
    EXPECT_EQ(parse_text("[problem]\ndataset = x.svm\n[solver admm]\n").solvers[0].max_iters, 100000u);
}

TEST(Experiment, TextFormsRoundTrip)
{
    for (const auto& s : {StepSchedule::power(1e-5, 0.5), StepSchedule::strongly_convex(0.1), StepSchedule::constant(2.5)}) {
        const auto back = parse_schedule(schedule_text(s));
        EXPECT_EQ(back.kind, s.kind);
        EXPECT_EQ(back.describe(), s.describe());
    }
    EXPECT_EQ(parse_semi_proximal("identity:2.5").scale(), 2.5);
    EXPECT_TRUE(parse_semi_proximal("zero").is_zero());
    EXPECT_EQ(kind_of([] { parse_schedule("power:1"); }), ErrorKind::invalid_config);
    EXPECT_EQ(kind_of([] { parse_semi_proximal("diag:1"); }), ErrorKind::invalid_config);
}

TEST(Experiment, RejectsMalformedConfig)
{
    EXPECT_EQ(kind_of([] { parse_text("[problem]\ncolour = red\n"); }), ErrorKind::invalid_config);
    EXPECT_EQ(kind_of([] { parse_text("[bogus]\n"); }), ErrorKind::invalid_config);
    EXPECT_EQ(kind_of([] { parse_text("n = 3\n"); }), ErrorKind::invalid_config);
    EXPECT_EQ(kind_of([] { parse_text("[run]\ncadence = -1\n"); }), ErrorKind::invalid_config);
    EXPECT_EQ(kind_of([] { parse_text("[solver x]\nalgorithm = sgd\n"); }), ErrorKind::invalid_config);
}

TEST(Experiment, ValidationCollectsViolations)
{
    ExperimentSpec spec;
    EXPECT_EQ(validate_experiment(spec).size(), 1u); // no solvers
    EXPECT_EQ(kind_of([&] { run_experiment(spec); }), ErrorKind::invalid_config);
    spec = parse_text(kSmall);
    spec.rho = 0.0;
    spec.cadence = 0;
    spec.solvers[1].gamma = 1.7;
    spec.solvers[1].alpha = 0.0;
    const auto v = validate_experiment(spec);
    EXPECT_EQ(v.size(), 3u);
    EXPECT_NE(v.back().find("reduced"), std::string::npos);
}

TEST(Experiment, ReductionEndToEnd)
{
    const auto res = run_experiment(parse_text(kSmall));
    ASSERT_EQ(res.traces.size(), 2u);
    EXPECT_EQ(res.traces[0].records.size(), 60u);
    const std::string a = csv_text({res.traces[0]});
    const std::string b = csv_text({res.traces[1]});
    EXPECT_NE(a, b);
    EXPECT_EQ(strip_solver(a), strip_solver(b));
    EXPECT_TRUE(res.reference.converged);
    EXPECT_EQ(res.manifest["schema_version"], kSchemaVersion);
    EXPECT_EQ(res.manifest["solvers"][1]["effective"]["gamma"], 1.0);
}

TEST(Experiment, DeterministicAcrossRunsAndThreads)
{
    auto spec = parse_text(kSmall);
    spec.solvers[1].alpha = spec.solvers[1].gamma = 0.9;
    spec.solvers[1].s = SemiProximal::identity(1.0);
    const std::string one = csv_text(run_experiment(spec).traces);
    EXPECT_EQ(one, csv_text(run_experiment(spec).traces));
    spec.threads = 2;
    EXPECT_EQ(one, csv_text(run_experiment(spec).traces));
}

TEST(Experiment, ErrorsNameTheSolver)
{
    auto spec = parse_text(kSmall);
    spec.problem.model = ModelKind::group_lasso;
    spec.problem.n_groups = 3;
    spec.problem.max_block = 4;
    try {
        // An anisotropic T passes validation but leaves the y-step without a prox.
        const auto d = build_problem(spec.problem).problem.d2();
        DenseMatrix t = DenseMatrix::identity(d);
        t(0, 0) = 3.0;
        spec.solvers[1].t = SemiProximal::matrix(t);
        run_experiment(spec);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::subproblem_unsolvable);
        EXPECT_NE(std::string(e.what()).find("solver 'reduced'"), std::string::npos) << e.what();
    }
}

TEST(Experiment, RecordsLyapunovForBatchSolvers)
{
    auto spec = parse_text(R"(
[problem]
n = 30
d = 8
nnz = 3
[run]
cadence = 1
iters = 200
lyapunov = true
[solver spb_scprsm]
alpha = 0.9
gamma = 0.9
[solver sto_admm]
)");
    const auto res = run_experiment(spec);
    const auto& batch = res.traces[0].records;
    ASSERT_TRUE(batch.front().lyapunov.has_value());
    for (std::size_t i = 2; i < batch.size(); ++i)
        EXPECT_LE(*batch[i].lyapunov, *batch[i - 1].lyapunov * (1 + 1e-12) + 1e-12) << i;
    EXPECT_FALSE(res.traces[1].records.front().lyapunov.has_value());
}

TEST(Experiment, WritesOutputsAndReadsDatasets)
{
    const auto dir = std::filesystem::temp_directory_path() / "splitkit_bench_test";
    std::filesystem::create_directories(dir);
    const auto g = gen_group_lasso(30, 3, 4, 0.5, 2);
    write_libsvm((dir / "g.svm").string(), g.data);
    write_json((dir / "g.svm.json").string(), g.manifest);
    auto spec = parse_text("[problem]\nmodel = group_lasso\ndataset = g.svm\n[run]\niters = 200\ncadence = 20\n"
                           "[solver sto_spb_scprsm]\n");
    spec.problem.dataset = (dir / "g.svm").string();
    spec.out = (dir / "t.csv").string();
    spec.manifest = (dir / "m.json").string();
    const auto res = run_experiment(spec);
    write_outputs(spec, res);
    EXPECT_EQ(res.mu, g.mu);
    const auto back = read_csv(spec.out);
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0].records, res.traces[0].records);
    const auto m = read_json(spec.manifest);
    EXPECT_EQ(m["schema_version"], kSchemaVersion);
    EXPECT_EQ(m["problem"]["source"]["generator_manifest"]["block_sizes"], g.manifest["block_sizes"]);
    std::filesystem::remove_all(dir);
}

TEST(Csv, RowCountAndEmptyFields)
{
    std::vector<Trace> traces(2);
    traces[0].solver = "a";
    traces[1].solver = "b";
    for (auto& t : traces)
        for (std::uint64_t i = 1; i <= 3; ++i) t.records.push_back({i, 1.0 / 3.0, 0.1 * i, -2.0, std::nullopt, std::nullopt});
    traces[1].records[0].lyapunov = 0.0;
    traces[1].records[0].wall_ns = 12;
    const std::string text = csv_text(traces);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 7);
    EXPECT_EQ(text.substr(0, text.find('\n')), kCsvHeader);
    EXPECT_NE(text.find("a,1,0.33333333333333331,0.10000000000000001,-2,,\n"), std::string::npos) << text;
    EXPECT_NE(text.find("b,1,0.33333333333333331,0.10000000000000001,-2,12,0\n"), std::string::npos);
    std::istringstream in(text);
    const auto back = read_csv(in);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].solver, "a");
    EXPECT_EQ(back[0].records, traces[0].records);
    EXPECT_EQ(back[1].records, traces[1].records);
    EXPECT_EQ(kind_of([] { emit_csv({}, std::cout); }), ErrorKind::invalid_config);
    std::istringstream bad("solver,iteration\n");
    EXPECT_EQ(kind_of([&] { read_csv(bad); }), ErrorKind::parse_error);
}

TEST(RateSlope, Calibration)
{
    auto sqrt_fit = rate_slope(power_trace(1, 10000, 1, [](double t) { return 3.0 / std::sqrt(t); }), 0.0);
    EXPECT_NEAR(sqrt_fit.slope, -0.5, 1e-9);
    EXPECT_NEAR(std::exp(sqrt_fit.intercept), 3.0, 1e-9);
    EXPECT_NEAR(rate_slope(power_trace(1, 10000, 1, [](double t) { return 1.0 / t; }), 0.0).slope, -1.0, 1e-9);
    const auto log_fit = rate_slope(power_trace(1000, 100000, 100, [](double t) { return std::log(t) / t; }), 0.0);
    EXPECT_GT(log_fit.slope, -1.05);
    EXPECT_LT(log_fit.slope, -0.80);
    EXPECT_NEAR(rate_slope(power_trace(1, 500, 1, [](double) { return 0.25; }), 0.0).slope, 0.0, 1e-12);
}

TEST(RateSlope, WindowRhoAndErrors)
{
    auto recs = power_trace(1, 1000, 1, [](double t) { return 1.0 / t; });
    for (auto& r : recs) r.constraint_norm = r.objective;
    EXPECT_NEAR(rate_slope(recs, 0.0, 2.0).slope, -1.0, 1e-9);
    EXPECT_NEAR(std::exp(rate_slope(recs, 0.0, 2.0).intercept), 3.0, 1e-9);
    EXPECT_EQ(rate_slope(recs, 0.0, 1.0, {0.5, std::nullopt, std::nullopt}).points, 500u);
    EXPECT_EQ(rate_slope(recs, 0.0, 1.0, {0.0, 100.0, 400.0}).points, 301u);
    EXPECT_EQ(kind_of([&] { rate_slope(recs, 0.0, 1.0, {0.95, std::nullopt, std::nullopt}); }),
              ErrorKind::insufficient_data);
    EXPECT_EQ(kind_of([&] { rate_slope(recs, 0.0, 1.0, {1.0, std::nullopt, std::nullopt}); }),
              ErrorKind::invalid_config);

    // Gaps at f_star are zero; 5 of 200 clipped passes, 20 of 200 does not.
    auto flat = power_trace(1, 200, 1, [](double) { return 2.0; });
    for (std::size_t i = 0; i < 5; ++i) flat[i].objective = 1.0;
    EXPECT_EQ(rate_slope(flat, 1.0, 1.0).clipped, 5u);
    for (std::size_t i = 5; i < 20; ++i) flat[i].objective = 1.0;
    EXPECT_EQ(kind_of([&] { rate_slope(flat, 1.0, 1.0); }), ErrorKind::nonpositive_gap);
}
