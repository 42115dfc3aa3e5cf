#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "splitkit/analysis.hpp"
#include "splitkit/data.hpp"
#include "splitkit/solvers.hpp"
#include "splitkit/text.hpp"

namespace splitkit {

inline constexpr int kSchemaVersion = 1;

/// Where the problem instance comes from: a LIBSVM file or a generator.
struct ProblemSpec {
    ModelKind model = ModelKind::lasso;
    std::optional<std::string> dataset;
    std::size_t n = 200;
    std::size_t d = 400;
    std::size_t nnz = 100;
    double noise_var = 1e-3;
    std::size_t n_groups = 10;
    std::size_t max_block = 50;
    double frac_nnz = 0.05;
    bool normalize_rows = true;
    std::uint64_t data_seed = 0;
    std::optional<double> mu; // nullopt: the generator's value (or 0.1||D^T r||_inf, 1 for logistic)
    double ridge = 0.0;
};

struct ReferenceSpec {
    double beta = 1.0;
    std::uint64_t max_iters = 20000;
    double tol = 1e-12;
};

struct ExperimentSpec {
    ProblemSpec problem;
    ReferenceSpec reference;
    std::vector<SolverConfig> solvers;
    std::uint64_t cadence = 50;
    double rho = 1.0;
    std::size_t threads = 1;
    bool timing = false;
    bool lyapunov = false;
    std::string out;      // trace CSV; empty to skip
    std::string manifest; // manifest JSON; empty to skip
};

inline std::uint64_t default_budget(const ProblemSpec& p) { return p.dataset ? 100000 : 50000; }

/// Every violation, each prefixed with the solver it belongs to.
inline std::vector<std::string> validate_experiment(const ExperimentSpec& s)
{
    std::vector<std::string> v;
    if (!(s.rho > 0.0)) v.push_back("rho must be > 0");
    if (s.cadence < 1) v.push_back("cadence must be >= 1");
    if (s.threads < 1) v.push_back("threads must be >= 1");
    if (s.solvers.empty()) v.push_back("at least one solver is required");
    if (s.problem.mu && !(*s.problem.mu >= 0.0)) v.push_back("mu must be >= 0");
    if (!(s.problem.ridge >= 0.0)) v.push_back("ridge must be >= 0");
    if (!(s.reference.beta > 0.0)) v.push_back("reference beta must be > 0");
    std::map<std::string, int> seen;
    for (const auto& c : s.solvers) {
        const std::string name = c.name.empty() ? to_string(c.algorithm) : c.name;
        if (++seen[name] == 2) v.push_back("duplicate solver name '" + name + "'");
        for (const auto& e : validate_config(c)) v.push_back("solver '" + name + "': " + e);
    }
    return v;
}

inline void require_valid(const ExperimentSpec& s)
{
    const auto v = validate_experiment(s);
    if (v.empty()) return;
    std::string msg;
    for (const auto& e : v) msg += (msg.empty() ? "" : "; ") + e;
    fail(ErrorKind::invalid_config, msg);
}

// ---- text forms of schedules and semi-proximal weights -------------------

namespace detail {

inline std::vector<std::string> split(std::string_view s, char sep)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.emplace_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline double number(const std::string& s, const std::string& what)
{
    const auto v = parse_double(s);
    if (!v || !std::isfinite(*v)) fail(ErrorKind::invalid_config, what + ": '" + s + "' is not a number");
    return *v;
}

template <class Int>
Int count(const std::string& s, const std::string& what)
{
    const auto v = parse_int<Int>(s);
    if (!v) fail(ErrorKind::invalid_config, what + ": '" + s + "' is not a nonnegative integer");
    return *v;
}

inline bool boolean(const std::string& s, const std::string& what)
{
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    fail(ErrorKind::invalid_config, what + ": '" + s + "' is not a boolean");
}

} // namespace detail

/// `power:C:p`, `strongly_convex:mu` (alias `sc:mu`) or `constant:eta`.
inline StepSchedule parse_schedule(const std::string& text)
{
    const auto f = detail::split(text, ':');
    if (f[0] == "power" && f.size() == 3)
        return StepSchedule::power(detail::number(f[1], "schedule C"), detail::number(f[2], "schedule p"));
    if ((f[0] == "strongly_convex" || f[0] == "sc") && f.size() == 2)
        return StepSchedule::strongly_convex(detail::number(f[1], "schedule mu"));
    if (f[0] == "constant" && f.size() == 2) return StepSchedule::constant(detail::number(f[1], "schedule eta"));
    fail(ErrorKind::invalid_config, "schedule '" + text + "': expected power:C:p, strongly_convex:mu or constant:eta");
}

inline std::string schedule_text(const StepSchedule& s)
{
    switch (s.kind) {
    case StepSchedule::Kind::power: return "power:" + format_double(s.c) + ":" + format_double(s.p);
    case StepSchedule::Kind::strongly_convex: return "strongly_convex:" + format_double(s.mu_sc);
    case StepSchedule::Kind::constant: return "constant:" + format_double(s.eta);
    }
    return "?";
}

/// `zero` (or `0`), `identity` or `identity:c` for c*I.
inline SemiProximal parse_semi_proximal(const std::string& text)
{
    const auto f = detail::split(text, ':');
    if ((f[0] == "zero" || f[0] == "0") && f.size() == 1) return SemiProximal::zero();
    if (f[0] == "identity" && f.size() <= 2)
        return SemiProximal::identity(f.size() == 2 ? detail::number(f[1], "semi-proximal scale") : 1.0);
    fail(ErrorKind::invalid_config, "semi-proximal '" + text + "': expected zero, identity or identity:c");
}

inline std::string semi_proximal_text(const SemiProximal& s)
{
    if (s.is_zero()) return "zero";
    if (s.is_isotropic()) return "identity:" + format_double(s.scale());
    return s.describe();
}

// ---- experiment config files ----------------------------------------------

/// Flat sectioned key = value text; `#` starts a comment. Sections:
/// [problem], [reference], [run] and one [solver NAME] per solver.
inline ExperimentSpec parse_experiment(std::istream& in)
{
    ExperimentSpec spec;
    std::optional<std::uint64_t> run_iters;
    std::uint64_t run_seed = 0;
    struct Pending {
        SolverConfig cfg;
        bool has_iters = false, has_seed = false;
    };
    std::vector<Pending> solvers;
    std::string section;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line(raw);
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(line_no);
        if (line.front() == '[') {
            if (line.back() != ']') fail(ErrorKind::invalid_config, where + ": unterminated section header");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            if (section.rfind("solver", 0) == 0) {
                Pending p;
                p.cfg.name = std::string(trim(std::string_view(section).substr(6)));
                if (p.cfg.name.empty()) fail(ErrorKind::invalid_config, where + ": solver section needs a name");
                if (auto a = parse_algorithm(p.cfg.name)) p.cfg.algorithm = *a;
                solvers.push_back(std::move(p));
                section = "solver";
            } else if (section != "problem" && section != "reference" && section != "run") {
                fail(ErrorKind::invalid_config, where + ": unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) fail(ErrorKind::invalid_config, where + ": expected key = value");
        const std::string key(trim(line.substr(0, eq)));
        const std::string val(trim(line.substr(eq + 1)));
        const std::string what = where + " (" + key + ")";
        auto unknown = [&] { fail(ErrorKind::invalid_config, where + ": unknown key '" + key + "' in [" + section + "]"); };

        if (section == "problem") {
            ProblemSpec& p = spec.problem;
            if (key == "model") p.model = parse_model(val);
            else if (key == "dataset") p.dataset = val;
            else if (key == "n") p.n = detail::count<std::size_t>(val, what);
            else if (key == "d") p.d = detail::count<std::size_t>(val, what);
            else if (key == "nnz") p.nnz = detail::count<std::size_t>(val, what);
            else if (key == "noise_var") p.noise_var = detail::number(val, what);
            else if (key == "n_groups") p.n_groups = detail::count<std::size_t>(val, what);
            else if (key == "max_block") p.max_block = detail::count<std::size_t>(val, what);
            else if (key == "frac_nnz") p.frac_nnz = detail::number(val, what);
            else if (key == "normalize_rows") p.normalize_rows = detail::boolean(val, what);
            else if (key == "seed") p.data_seed = detail::count<std::uint64_t>(val, what);
            else if (key == "mu") p.mu = val == "auto" ? std::nullopt : std::optional(detail::number(val, what));
            else if (key == "ridge") p.ridge = detail::number(val, what);
            else unknown();
        } else if (section == "reference") {
            if (key == "beta") spec.reference.beta = detail::number(val, what);
            else if (key == "max_iters") spec.reference.max_iters = detail::count<std::uint64_t>(val, what);
            else if (key == "tol") spec.reference.tol = detail::number(val, what);
            else unknown();
        } else if (section == "run") {
            if (key == "cadence") spec.cadence = detail::count<std::uint64_t>(val, what);
            else if (key == "rho") spec.rho = detail::number(val, what);
            else if (key == "iters") run_iters = detail::count<std::uint64_t>(val, what);
            else if (key == "seed") run_seed = detail::count<std::uint64_t>(val, what);
            else if (key == "threads") spec.threads = detail::count<std::size_t>(val, what);
            else if (key == "timing") spec.timing = detail::boolean(val, what);
            else if (key == "lyapunov") spec.lyapunov = detail::boolean(val, what);
            else if (key == "out") spec.out = val;
            else if (key == "manifest") spec.manifest = val;
            else unknown();
        } else if (section == "solver") {
            Pending& p = solvers.back();
            SolverConfig& c = p.cfg;
            if (key == "algorithm") {
                const auto a = parse_algorithm(val);
                if (!a) fail(ErrorKind::invalid_config, what + ": unknown algorithm '" + val + "'");
                c.algorithm = *a;
            } else if (key == "alpha") c.alpha = detail::number(val, what);
            else if (key == "gamma") c.gamma = detail::number(val, what);
            else if (key == "beta") c.beta = detail::number(val, what);
            else if (key == "s") c.s = parse_semi_proximal(val);
            else if (key == "t") c.t = parse_semi_proximal(val);
            else if (key == "schedule") c.schedule = parse_schedule(val);
            else if (key == "iters") {
                c.max_iters = detail::count<std::uint64_t>(val, what);
                p.has_iters = true;
            } else if (key == "seed") {
                c.seed = detail::count<std::uint64_t>(val, what);
                p.has_seed = true;
            } else if (key == "minibatch") c.minibatch = detail::count<std::size_t>(val, what);
            else if (key == "x_path") {
                if (val == "automatic") c.x_path = XStepPath::automatic;
                else if (val == "generic") c.x_path = XStepPath::generic;
                else fail(ErrorKind::invalid_config, what + ": expected automatic or generic");
            } else if (key == "ergodic") {
                if (val == "staggered") c.ergodic = ErgodicIndex::staggered;
                else if (val == "uniform") c.ergodic = ErgodicIndex::uniform;
                else fail(ErrorKind::invalid_config, what + ": expected staggered or uniform");
            } else unknown();
        } else {
            fail(ErrorKind::invalid_config, where + ": key outside any section");
        }
    }
    const std::uint64_t budget = run_iters.value_or(default_budget(spec.problem));
    for (auto& p : solvers) {
        if (!p.has_iters) p.cfg.max_iters = budget;
        if (!p.has_seed) p.cfg.seed = run_seed;
        spec.solvers.push_back(std::move(p.cfg));
    }
    return spec;
}

inline ExperimentSpec read_experiment(const std::string& path)
{
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io_error, "cannot open " + path);
    ExperimentSpec spec = parse_experiment(in);
    // Relative data paths are taken from the config file's directory.
    const auto base = std::filesystem::path(path).parent_path();
    if (spec.problem.dataset && std::filesystem::path(*spec.problem.dataset).is_relative())
        spec.problem.dataset = (base / *spec.problem.dataset).string();
    return spec;
}

// ---- problem construction -------------------------------------------------

struct BuiltProblem {
    Dataset data;
    SplittingProblem problem;
    double mu = 0.0;
    nlohmann::json source; // generator manifest or dataset description
};

inline BuiltProblem build_problem(const ProblemSpec& ps)
{
    BuiltProblem b;
    if (ps.dataset) {
        LibsvmOptions opt;
        if (ps.model == ModelKind::logistic) opt.kind = DatasetKind::binary;
        const std::string side = *ps.dataset + ".json";
        std::optional<nlohmann::json> gen_manifest;
        if (std::filesystem::exists(side)) {
            gen_manifest = read_json(side);
            if (gen_manifest->contains("d")) opt.dim = (*gen_manifest)["d"].get<std::size_t>();
        }
        b.data = read_libsvm(*ps.dataset, opt);
        if (ps.model == ModelKind::group_lasso) {
            if (!gen_manifest || !gen_manifest->contains("block_sizes")) {
                fail(ErrorKind::invalid_config, "group_lasso on " + *ps.dataset + " needs block_sizes in " + side);
            }
            b.data.groups = IndexPartition::contiguous((*gen_manifest)["block_sizes"].get<std::vector<std::size_t>>());
        }
        double mu = ps.model == ModelKind::logistic ? 1.0 : 0.1 * norm_inf(b.data.design->transpose_times(b.data.r));
        b.mu = ps.mu.value_or(mu);
        b.source = {{"dataset", *ps.dataset}, {"n", b.data.n()}, {"d", b.data.d()},
                    {"sparse", b.data.design->is_sparse()}};
        if (gen_manifest) b.source["generator_manifest"] = *gen_manifest;
    } else {
        Generated g;
        switch (ps.model) {
        case ModelKind::lasso: g = gen_lasso(ps.n, ps.d, ps.nnz, ps.noise_var, ps.data_seed); break;
        case ModelKind::group_lasso:
            g = gen_group_lasso(ps.n, ps.n_groups, ps.max_block, ps.frac_nnz, ps.data_seed, ps.noise_var);
            break;
        case ModelKind::logistic:
            g = gen_logistic(ps.n, ps.d, ps.nnz, ps.data_seed, ps.noise_var, ps.normalize_rows);
            break;
        }
        b.data = std::move(g.data);
        b.mu = ps.mu.value_or(g.mu);
        b.source = std::move(g.manifest);
    }
    b.problem = make_problem(b.data, ps.model, b.mu);
    if (ps.ridge > 0.0) b.problem.set_ridge(ps.ridge);
    return b;
}

// ---- manifests --------------------------------------------------------------

inline nlohmann::json solver_json(const SolverConfig& c)
{
    const EffectiveParameters e = effective_parameters(c);
    nlohmann::json sched = {{"text", schedule_text(c.schedule)}, {"description", c.schedule.describe()}};
    return {{"name", c.name.empty() ? to_string(c.algorithm) : c.name},
            {"algorithm", to_string(c.algorithm)},
            {"alpha", c.alpha},
            {"gamma", c.gamma},
            {"beta", c.beta},
            {"s", semi_proximal_text(c.s)},
            {"t", semi_proximal_text(c.t)},
            {"effective", {{"alpha", e.alpha}, {"gamma", e.gamma}, {"s", semi_proximal_text(e.s)},
                           {"t", semi_proximal_text(e.t)}}},
            {"schedule", sched},
            {"iters", c.max_iters},
            {"seed", c.seed},
            {"minibatch", c.minibatch},
            {"x_path", c.x_path == XStepPath::generic ? "generic" : "automatic"},
            {"ergodic", c.ergodic == ErgodicIndex::uniform ? "uniform" : "staggered"}};
}

inline nlohmann::json matrix_json(const DenseMatrix& m)
{
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const auto r = m.row(i);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    return rows;
}

inline nlohmann::json certificate_json(const ContractionCertificate& c, bool with_matrices = false)
{
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::json j = {{"schema_version", kSchemaVersion},
                        {"alpha", c.alpha},
                        {"gamma", c.gamma},
                        {"beta", c.beta},
                        {"regime", to_string(c.regime)},
                        {"gamma_upper_bound", gamma_upper_bound(c.alpha)},
                        {"mthm_identity_error", mthm_identity_error(c)},
                        {"c1", opt(c.c1)},
                        {"c2", opt(c.c2)},
                        {"c3", opt(c.c3)},
                        {"tau", opt(c.tau)},
                        {"delta", c.delta_interval ? nlohmann::json(c.delta) : nlohmann::json(nullptr)},
                        {"delta_interval", c.delta_interval ? nlohmann::json{c.delta_interval->first,
                                                                             c.delta_interval->second}
                                                            : nlohmann::json(nullptr)},
                        {"contraction_margin", opt(c.contraction_margin)},
                        {"verified", c.verified},
                        {"g_min_eigenvalue", min_eigenvalue(c.G)}};
    if (with_matrices) {
        j["matrices"] = {{"M", matrix_json(c.M)}, {"K", matrix_json(c.K)}, {"H", matrix_json(c.H)},
                         {"G", matrix_json(c.G)}, {"P", matrix_json(c.P)}};
    }
    return j;
}

// ---- running ----------------------------------------------------------------

struct ExperimentResult {
    std::vector<Trace> traces; // declared solver order
    ReferenceSolution reference;
    double mu = 0.0;
    nlohmann::json manifest;
};

namespace detail {

inline bool has_certificate(const SolverConfig& c)
{
    switch (c.algorithm) {
    case Algorithm::admm:
    case Algorithm::scprsm:
    case Algorithm::spb_scprsm: return true;
    default: return false;
    }
}

inline Trace run_one(const SplittingProblem& p, const SolverConfig& cfg, const ExperimentSpec& spec,
                     const ReferenceSolution& ref)
{
    RunOptions opt;
    opt.cadence = spec.cadence;
    opt.timing = spec.timing;
    std::optional<ContractionCertificate> cert;
    DenseVector y_prev;
    const SaddlePoint w_star = saddle_point(ref);
    if (spec.lyapunov && has_certificate(cfg)) {
        cert = compute_constants(build_matrices(p, cfg));
        opt.observer = [&](const IterateState& prev, const IterateState&) { y_prev = prev.y; };
        opt.lyapunov = [&](const IterateState& s) { return lyapunov_value(p, s, y_prev, *cert, w_star); };
    }
    return run_solver(p, cfg, opt).trace;
}

} // namespace detail

/// Runs every solver on the shared problem. Runs may execute concurrently;
/// results are merged in declared order so output never depends on timing.
inline ExperimentResult run_experiment(const ExperimentSpec& spec)
{
    require_valid(spec);
    const BuiltProblem built = build_problem(spec.problem);
    const SplittingProblem& p = built.problem;

    ExperimentResult res;
    res.mu = built.mu;
    res.reference = solve_reference(p, spec.reference.beta, spec.reference.max_iters, spec.reference.tol);
    res.traces.resize(spec.solvers.size());

    std::vector<std::exception_ptr> errors(spec.solvers.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < spec.solvers.size();) {
            const SolverConfig& cfg = spec.solvers[i];
            try {
                res.traces[i] = detail::run_one(p, cfg, spec, res.reference);
            } catch (const Error& e) {
                const std::string name = cfg.name.empty() ? to_string(cfg.algorithm) : cfg.name;
                errors[i] = std::make_exception_ptr(Error(e.kind(), "solver '" + name + "': " + e.what()));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::min(spec.threads, spec.solvers.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    nlohmann::json solvers = nlohmann::json::array();
    for (const auto& c : spec.solvers) solvers.push_back(solver_json(c));
    const ProblemSpec& ps = spec.problem;
    res.manifest = {{"schema_version", kSchemaVersion},
                    {"problem",
                     {{"model", to_string(ps.model)},
                      {"mu", built.mu},
                      {"ridge", ps.ridge},
                      {"n", p.n_samples()},
                      {"d", p.d1()},
                      {"source", built.source}}},
                    {"reference",
                     {{"beta", spec.reference.beta},
                      {"max_iters", spec.reference.max_iters},
                      {"tol", spec.reference.tol},
                      {"iterations", res.reference.iterations},
                      {"converged", res.reference.converged},
                      {"f_star", res.reference.f_star}}},
                    {"run",
                     {{"cadence", spec.cadence},
                      {"rho", spec.rho},
                      {"threads", spec.threads},
                      {"timing", spec.timing},
                      {"lyapunov", spec.lyapunov},
                      {"out", spec.out}}},
                    {"solvers", solvers}};
    return res;
}

// ---- CSV ----------------------------------------------------------------------

inline constexpr const char* kCsvHeader = "solver,iteration,objective,constraint_norm,raw_objective,wall_ns,lyapunov";

inline void emit_csv(const std::vector<Trace>& traces, std::ostream& out)
{
    if (traces.empty()) fail(ErrorKind::invalid_config, "emit_csv: no traces");
    out << kCsvHeader << '\n';
    std::string line;
    for (const Trace& t : traces) {
        if (t.solver.find_first_of(",\"\n") != std::string::npos)
            fail(ErrorKind::invalid_config, "solver name '" + t.solver + "' cannot appear in CSV");
        for (const TraceRecord& r : t.records) {
            line = t.solver;
            line += ',' + std::to_string(r.iteration);
            line += ',' + format_double(r.objective);
            line += ',' + format_double(r.constraint_norm);
            line += ',' + format_double(r.raw_objective);
            line += ',';
            if (r.wall_ns) line += std::to_string(*r.wall_ns);
            line += ',';
            if (r.lyapunov) line += format_double(*r.lyapunov);
            line += '\n';
            out << line;
        }
    }
    if (!out) fail(ErrorKind::io_error, "emit_csv: write failed");
}

inline void emit_csv(const std::vector<Trace>& traces, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io_error, "cannot write " + path);
    emit_csv(traces, out);
}

/// Inverse of emit_csv; consecutive rows with the same solver form one trace.
inline std::vector<Trace> read_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::empty_file, "trace CSV is empty");
    if (trim(line) != kCsvHeader) fail(ErrorKind::parse_error, "line 1: unexpected header '" + line + "'");
    std::vector<Trace> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view sv = trim(line);
        if (sv.empty()) continue;
        const auto f = detail::split(sv, ',');
        const std::string where = "line " + std::to_string(line_no);
        if (f.size() != 7) fail(ErrorKind::parse_error, where + ": expected 7 fields, got " + std::to_string(f.size()));
        TraceRecord r;
        auto num = [&](const std::string& s, const char* col) {
            const auto v = parse_double(s);
            if (!v) fail(ErrorKind::parse_error, where + ": bad " + col + " '" + s + "'");
            return *v;
        };
        const auto it = parse_int<std::uint64_t>(f[1]);
        if (!it) fail(ErrorKind::parse_error, where + ": bad iteration '" + f[1] + "'");
        r.iteration = *it;
        r.objective = num(f[2], "objective");
        r.constraint_norm = num(f[3], "constraint_norm");
        r.raw_objective = num(f[4], "raw_objective");
        if (!f[5].empty()) {
            const auto w = parse_int<std::int64_t>(f[5]);
            if (!w) fail(ErrorKind::parse_error, where + ": bad wall_ns '" + f[5] + "'");
            r.wall_ns = *w;
        }
        if (!f[6].empty()) r.lyapunov = num(f[6], "lyapunov");
        if (out.empty() || out.back().solver != f[0]) out.push_back(Trace{f[0], {}});
        out.back().records.push_back(r);
    }
    return out;
}

inline std::vector<Trace> read_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io_error, "cannot open " + path);
    return read_csv(in);
}

// ---- rate fitting ---------------------------------------------------------------

/// Which records enter the fit: the first `burn_in` fraction is dropped, then
/// only iterations inside [t_min, t_max] are kept.
struct SlopeWindow {
    double burn_in = 0.0;
    std::optional<double> t_min;
    std::optional<double> t_max;
};

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    std::size_t points = 0;
    std::size_t clipped = 0;
};

inline constexpr double kGapFloor = 1e-14;

inline double ergodic_gap(const TraceRecord& r, double f_star, double rho)
{
    return r.objective - f_star + rho * r.constraint_norm;
}

/// Least-squares slope of log(gap_t) against log(t), gap_t clipped below at
/// 1e-14. Needs 100 points and at most 5% of them clipped.
inline SlopeFit rate_slope(const std::vector<TraceRecord>& records, double f_star, double rho = 1.0,
                           const SlopeWindow& w = {})
{
    if (!(w.burn_in >= 0.0 && w.burn_in < 1.0)) fail(ErrorKind::invalid_config, "burn_in must lie in [0, 1)");
    const auto skip = static_cast<std::size_t>(w.burn_in * static_cast<double>(records.size()));
    std::vector<double> lx, ly;
    SlopeFit fit;
    for (std::size_t i = skip; i < records.size(); ++i) {
        const double t = static_cast<double>(records[i].iteration);
        if (t < 1.0 || (w.t_min && t < *w.t_min) || (w.t_max && t > *w.t_max)) continue;
        double gap = ergodic_gap(records[i], f_star, rho);
        if (!std::isfinite(gap)) fail(ErrorKind::nonpositive_gap, "non-finite gap at t = " + std::to_string(t));
        if (gap < kGapFloor) {
            gap = kGapFloor;
            ++fit.clipped;
        }
        lx.push_back(std::log(t));
        ly.push_back(std::log(gap));
    }
    fit.points = lx.size();
    if (fit.points < 100) {
        fail(ErrorKind::insufficient_data, std::to_string(fit.points) + " points after burn-in; need 100");
    }
    if (static_cast<double>(fit.clipped) > 0.05 * static_cast<double>(fit.points)) {
        fail(ErrorKind::nonpositive_gap, std::to_string(fit.clipped) + " of " + std::to_string(fit.points) +
                                             " gaps fell below 1e-14");
    }
    const double n = static_cast<double>(fit.points);
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    if (!(sxx > 0.0)) fail(ErrorKind::insufficient_data, "all points share one iteration");
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    return fit;
}

/// Writes the CSV and manifest named in the experiment (either may be empty).
inline void write_outputs(const ExperimentSpec& spec, const ExperimentResult& res)
{
    if (!spec.out.empty()) emit_csv(res.traces, spec.out);
    if (!spec.manifest.empty()) write_json(spec.manifest, res.manifest);
}

} // namespace splitkit
