// splitkit command line: run, certify, gen, slope.
// Exit codes: 0 success, 1 validation error, 2 runtime error.

#include <cstdio>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "splitkit/bench.hpp"

using namespace splitkit;

namespace {

constexpr int kValidation = 1;
constexpr int kRuntime = 2;

bool is_validation(ErrorKind k)
{
    switch (k) {
    case ErrorKind::invalid_config:
    case ErrorKind::alpha_out_of_range:
    case ErrorKind::bad_dimensions:
    case ErrorKind::empty_delta_interval:
    case ErrorKind::config_mismatch:
    case ErrorKind::nonpositive_eta:
    case ErrorKind::nonpositive_scale:
    case ErrorKind::negative_threshold: return true;
    default: return false;
    }
}

struct RunFlags {
    std::string config;
    std::optional<double> alpha, gamma, beta, mu, rho;
    std::optional<std::string> schedule, dataset, model, out, manifest;
    std::optional<std::uint64_t> seed, iters, cadence;
    std::optional<std::size_t> threads;
    std::vector<std::string> solvers;
    bool timing = false, lyapunov = false, quiet = false;
};

ExperimentSpec spec_from(const RunFlags& f)
{
    ExperimentSpec spec;
    if (!f.config.empty()) {
        spec = read_experiment(f.config);
    } else {
        const std::vector<std::string> names =
            f.solvers.empty() ? std::vector<std::string>{"sto_spb_scprsm", "sto_admm"} : f.solvers;
        for (const auto& n : names) {
            const auto a = parse_algorithm(n);
            if (!a) fail(ErrorKind::invalid_config, "unknown algorithm '" + n + "'");
            SolverConfig c;
            c.name = n;
            c.algorithm = *a;
            spec.solvers.push_back(c);
        }
    }
    if (f.model) spec.problem.model = parse_model(*f.model);
    if (f.dataset) spec.problem.dataset = *f.dataset;
    if (f.mu) spec.problem.mu = *f.mu;
    if (f.rho) spec.rho = *f.rho;
    if (f.cadence) spec.cadence = *f.cadence;
    if (f.threads) spec.threads = *f.threads;
    if (f.out) spec.out = *f.out;
    if (f.manifest) spec.manifest = *f.manifest;
    if (f.timing) spec.timing = true;
    if (f.lyapunov) spec.lyapunov = true;
    const std::optional<StepSchedule> sched = f.schedule ? std::optional(parse_schedule(*f.schedule)) : std::nullopt;
    for (auto& c : spec.solvers) {
        if (f.alpha) c.alpha = *f.alpha;
        if (f.gamma) c.gamma = *f.gamma;
        if (f.beta) c.beta = *f.beta;
        if (sched) c.schedule = *sched;
        if (f.seed) c.seed = *f.seed;
        if (f.iters) c.max_iters = *f.iters;
        else if (f.config.empty()) c.max_iters = default_budget(spec.problem);
    }
    if (spec.out.empty()) spec.out = "traces.csv";
    if (spec.manifest.empty()) {
        const std::filesystem::path p(spec.out);
        spec.manifest = (p.parent_path() / (p.stem().string() + ".manifest.json")).string();
    }
    return spec;
}

int cmd_run(const RunFlags& f)
{
    const ExperimentSpec spec = spec_from(f);
    const auto v = validate_experiment(spec);
    if (!v.empty()) {
        for (const auto& e : v) std::cerr << "invalid: " << e << '\n';
        return kValidation;
    }
    const ExperimentResult res = run_experiment(spec);
    write_outputs(spec, res);
    if (!f.quiet) {
        std::cout << "f_star " << format_double(res.reference.f_star) << " (reference "
                  << (res.reference.converged ? "converged" : "not converged") << " after "
                  << res.reference.iterations << " iterations)\n";
        for (const auto& t : res.traces) {
            if (t.records.empty()) continue;
            const auto& last = t.records.back();
            std::cout << t.solver << ": t=" << last.iteration
                      << " gap=" << format_double(ergodic_gap(last, res.reference.f_star, spec.rho)) << '\n';
        }
        std::cout << "wrote " << spec.out << " and " << spec.manifest << '\n';
    }
    return 0;
}

struct CertifyFlags {
    double alpha = 0.9, gamma = 0.9, beta = 1.0, s = 1.0, t = 0.0;
    std::size_t dim = 1;
    std::optional<double> delta;
    std::optional<std::uint64_t> random_b;
    bool matrices = false;
    std::string out;
};

int cmd_certify(const CertifyFlags& f)
{
    if (f.dim == 0) fail(ErrorKind::invalid_config, "dim must be >= 1");
    DenseMatrix b = DenseMatrix::identity(f.dim, -1.0);
    if (f.random_b) {
        std::mt19937_64 gen(*f.random_b);
        std::normal_distribution<double> nd;
        for (std::size_t i = 0; i < f.dim; ++i)
            for (std::size_t j = 0; j < f.dim; ++j) b(i, j) = nd(gen);
    }
    auto cert = compute_constants(build_matrices(f.alpha, f.gamma, f.beta, b, DenseMatrix::identity(f.dim, f.s),
                                                 DenseMatrix::identity(f.dim, f.t)),
                                  f.delta);
    if (cert.regime == Regime::gamma_lt_1) verify_contraction(cert);
    const nlohmann::json j = certificate_json(cert, f.matrices);
    if (f.out.empty()) {
        std::cout << j.dump(2) << '\n';
    } else {
        write_json(f.out, j);
    }
    const bool ok = check_mthm_identity(cert) && (cert.regime != Regime::gamma_lt_1 || cert.verified);
    return ok ? 0 : kRuntime;
}

struct GenFlags {
    std::string model = "lasso";
    std::size_t n = 200, d = 400, nnz = 100, n_groups = 10, max_block = 50;
    double noise_var = 1e-3, frac_nnz = 0.05;
    std::uint64_t seed = 0;
    bool no_normalize = false;
    std::string out;
};

int cmd_gen(const GenFlags& f)
{
    Generated g;
    switch (parse_model(f.model)) {
    case ModelKind::lasso: g = gen_lasso(f.n, f.d, f.nnz, f.noise_var, f.seed); break;
    case ModelKind::group_lasso: g = gen_group_lasso(f.n, f.n_groups, f.max_block, f.frac_nnz, f.seed, f.noise_var); break;
    case ModelKind::logistic: g = gen_logistic(f.n, f.d, f.nnz, f.seed, f.noise_var, !f.no_normalize); break;
    }
    g.manifest["schema_version"] = kSchemaVersion;
    write_libsvm(f.out, g.data);
    write_json(f.out + ".json", g.manifest);
    std::cout << "wrote " << f.out << " (n=" << g.data.n() << ", d=" << g.data.d() << ", mu=" << format_double(g.mu)
              << ") and " << f.out << ".json\n";
    return 0;
}

struct SlopeFlags {
    std::string csv;
    std::optional<std::string> manifest, solver;
    std::optional<double> f_star, rho, t_min, t_max;
    double burn_in = 0.0;
};

int cmd_slope(const SlopeFlags& f)
{
    double f_star = 0.0, rho = 1.0;
    if (f.manifest) {
        const auto m = read_json(*f.manifest);
        try {
            f_star = m.at("reference").at("f_star").get<double>();
            rho = m.at("run").at("rho").get<double>();
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::parse_error, *f.manifest + ": " + e.what());
        }
    } else if (!f.f_star) {
        fail(ErrorKind::invalid_config, "slope needs --f-star or --manifest");
    }
    if (f.f_star) f_star = *f.f_star;
    if (f.rho) rho = *f.rho;
    if (!(rho > 0.0)) fail(ErrorKind::invalid_config, "rho must be > 0");
    const auto traces = read_csv(f.csv);
    int shown = 0;
    std::cout << "solver,slope,intercept,points,clipped\n";
    for (const auto& t : traces) {
        if (f.solver && t.solver != *f.solver) continue;
        const auto fit = rate_slope(t.records, f_star, rho, {f.burn_in, f.t_min, f.t_max});
        std::cout << t.solver << ',' << format_double(fit.slope) << ',' << format_double(fit.intercept) << ','
                  << fit.points << ',' << fit.clipped << '\n';
        ++shown;
    }
    if (shown == 0) fail(ErrorKind::invalid_config, "no matching solver in " + f.csv);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"splitkit: stochastic splitting solvers, certificates and benchmarks"};
    app.require_subcommand(1);

    RunFlags rf;
    auto* run = app.add_subcommand("run", "run an experiment and write traces + manifest");
    run->add_option("config", rf.config, "experiment config file")->check(CLI::ExistingFile);
    run->add_option("--alpha", rf.alpha, "relaxation factor for the half multiplier step (all solvers)");
    run->add_option("--gamma", rf.gamma, "relaxation factor for the full multiplier step (all solvers)");
    run->add_option("--beta", rf.beta, "penalty parameter (all solvers)");
    run->add_option("--schedule", rf.schedule, "power:C:p | strongly_convex:mu | constant:eta");
    run->add_option("--seed", rf.seed, "solver seed (all solvers)");
    run->add_option("--iters", rf.iters, "iteration budget (all solvers)");
    run->add_option("--out", rf.out, "trace CSV path (default traces.csv)");
    run->add_option("--manifest", rf.manifest, "manifest JSON path (default <out stem>.manifest.json)");
    run->add_option("--dataset", rf.dataset, "LIBSVM file instead of a generated problem");
    run->add_option("--model", rf.model, "lasso | group_lasso | logistic");
    run->add_option("--mu", rf.mu, "regularization weight (default: generator's / 0.1||D^T r||_inf)");
    run->add_option("--rho", rf.rho, "constraint weight in the reported gap");
    run->add_option("--cadence", rf.cadence, "record every k-th iteration");
    run->add_option("--threads", rf.threads, "concurrent solver runs");
    run->add_option("--solvers", rf.solvers, "algorithms to run when no config is given")->delimiter(',');
    run->add_flag("--timing", rf.timing, "fill the wall_ns column");
    run->add_flag("--lyapunov", rf.lyapunov, "record the potential for batch solvers");
    run->add_flag("--quiet", rf.quiet, "no summary on stdout");

    CertifyFlags cf;
    auto* certify = app.add_subcommand("certify", "contraction certificate for (alpha, gamma, beta)");
    certify->add_option("--alpha", cf.alpha, "alpha in [0, 1)");
    certify->add_option("--gamma", cf.gamma, "gamma > 0");
    certify->add_option("--beta", cf.beta, "beta > 0");
    certify->add_option("--dim", cf.dim, "size of B (default -I)");
    certify->add_option("--s", cf.s, "S = s I");
    certify->add_option("--t", cf.t, "T = t I");
    certify->add_option("--delta", cf.delta, "override the delta midpoint (gamma > 1)");
    certify->add_option("--random-b", cf.random_b, "draw B with N(0,1) entries from this seed");
    certify->add_flag("--matrices", cf.matrices, "include M, K, H, G, P in the output");
    certify->add_option("--out", cf.out, "write JSON here instead of stdout");

    GenFlags gf;
    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset (LIBSVM + JSON manifest)");
    gen->add_option("--model", gf.model, "lasso | group_lasso | logistic");
    gen->add_option("--n", gf.n, "samples");
    gen->add_option("--d", gf.d, "features (lasso, logistic)");
    gen->add_option("--nnz", gf.nnz, "nonzeros in the ground truth (lasso, logistic)");
    gen->add_option("--noise-var", gf.noise_var, "noise variance");
    gen->add_option("--n-groups", gf.n_groups, "groups (group_lasso)");
    gen->add_option("--max-block", gf.max_block, "largest block size (group_lasso)");
    gen->add_option("--frac-nnz", gf.frac_nnz, "nonzero fraction per block (group_lasso)");
    gen->add_option("--seed", gf.seed, "generator seed");
    gen->add_flag("--no-normalize", gf.no_normalize, "keep raw rows (logistic)");
    gen->add_option("--out", gf.out, "output LIBSVM path")->required();

    SlopeFlags sf;
    auto* slope = app.add_subcommand("slope", "fit log(gap) against log(t) on a trace CSV");
    slope->add_option("csv", sf.csv, "trace CSV")->required()->check(CLI::ExistingFile);
    slope->add_option("--manifest", sf.manifest, "manifest with f_star and rho")->check(CLI::ExistingFile);
    slope->add_option("--f-star", sf.f_star, "optimal objective");
    slope->add_option("--rho", sf.rho, "constraint weight");
    slope->add_option("--burn-in", sf.burn_in, "leading fraction of records to drop");
    slope->add_option("--t-min", sf.t_min, "first iteration in the fit");
    slope->add_option("--t-max", sf.t_max, "last iteration in the fit");
    slope->add_option("--solver", sf.solver, "only this solver");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kValidation;
    }

    try {
        if (*run) return cmd_run(rf);
        if (*certify) return cmd_certify(cf);
        if (*gen) return cmd_gen(gf);
        if (*slope) return cmd_slope(sf);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return is_validation(e.kind()) ? kValidation : kRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntime;
    }
    return kRuntime;
}
