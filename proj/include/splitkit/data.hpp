#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "splitkit/design_matrix.hpp"
#include "splitkit/problem.hpp"
#include "splitkit/text.hpp"

namespace splitkit {

enum class DatasetKind { regression, binary };

inline std::string to_string(DatasetKind k) { return k == DatasetKind::binary ? "binary" : "regression"; }

/// Immutable once built; the design is shared with every problem made from it.
struct Dataset {
    std::shared_ptr<const DesignMatrix> design;
    DenseVector r;
    DatasetKind kind = DatasetKind::regression;
    std::optional<DenseVector> ground_truth;
    std::optional<IndexPartition> groups;

    std::size_t n() const { return design ? design->rows() : 0; }
    std::size_t d() const { return design ? design->cols() : 0; }
};

/// A synthetic dataset, its regularization weight and the JSON manifest
/// (seed, dimensions, mu) that regenerates it.
struct Generated {
    Dataset data;
    double mu = 0.0;
    nlohmann::json manifest;
};

namespace detail {

inline DenseMatrix gaussian_matrix(std::size_t n, std::size_t d, std::mt19937_64& gen)
{
    std::normal_distribution<double> nd(0.0, 1.0);
    DenseMatrix m(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (double& v : m.row(i)) v = nd(gen);
    return m;
}

/// `count` distinct positions out of `pool`, by a partial Fisher-Yates pass.
inline std::vector<std::size_t> choose_positions(std::vector<std::size_t> pool, std::size_t count,
                                                 std::mt19937_64& gen)
{
    for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(gen)]);
    }
    pool.resize(count);
    std::sort(pool.begin(), pool.end());
    return pool;
}

inline std::vector<std::size_t> iota_vec(std::size_t begin, std::size_t count)
{
    std::vector<std::size_t> v(count);
    for (std::size_t i = 0; i < count; ++i) v[i] = begin + i;
    return v;
}

inline DenseVector add_noise(DenseVector v, double noise_var, std::mt19937_64& gen)
{
    std::normal_distribution<double> nd(0.0, std::sqrt(noise_var));
    for (double& e : v) e += nd(gen);
    return v;
}

inline void require_noise(double noise_var)
{
    if (!(noise_var >= 0.0) || !std::isfinite(noise_var))
        fail(ErrorKind::bad_dimensions, "noise variance must be finite and >= 0");
}

} // namespace detail

/// D ~ N(0,1) entries, x with `nnz` N(0,1) entries at uniform positions,
/// r = D x + eps with eps ~ N(0, noise_var I), mu = 0.1 ||D^T r||_inf.
inline Generated gen_lasso(std::size_t n, std::size_t d, std::size_t nnz, double noise_var, std::uint64_t seed)
{
    if (n == 0 || d == 0) fail(ErrorKind::bad_dimensions, "gen_lasso needs n, d >= 1");
    if (nnz > d) fail(ErrorKind::bad_dimensions, "gen_lasso: nnz " + std::to_string(nnz) + " > d " + std::to_string(d));
    detail::require_noise(noise_var);
    std::mt19937_64 gen(seed);
    DenseMatrix dm = detail::gaussian_matrix(n, d, gen);
    DenseVector truth(d);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (std::size_t j : detail::choose_positions(detail::iota_vec(0, d), nnz, gen)) truth[j] = nd(gen);
    DenseVector r = detail::add_noise(dm * truth, noise_var, gen);
    const double mu = 0.1 * norm_inf(transpose_times(dm, r));

    Generated g;
    g.data.design = std::make_shared<const DesignMatrix>(std::move(dm));
    g.data.r = std::move(r);
    g.data.ground_truth = std::move(truth);
    g.mu = mu;
    g.manifest = {{"generator", "lasso"}, {"seed", seed}, {"n", n}, {"d", d}, {"nnz", nnz},
                  {"noise_var", noise_var}, {"mu", mu}};
    return g;
}

/// Block sizes uniform on {1..max_block}; round(frac_nnz * d_i) nonzeros per
/// block. mu = 0.1 max_i ||(D^T r)_{group i}||_inf, which is 0.1 ||D^T r||_inf.
inline Generated gen_group_lasso(std::size_t n, std::size_t n_groups, std::size_t max_block, double frac_nnz,
                                 std::uint64_t seed, double noise_var = 1e-3)
{
    if (n == 0 || n_groups == 0 || max_block == 0)
        fail(ErrorKind::bad_dimensions, "gen_group_lasso needs n, n_groups, max_block >= 1");
    if (!(frac_nnz >= 0.0 && frac_nnz <= 1.0)) fail(ErrorKind::bad_dimensions, "frac_nnz must lie in [0, 1]");
    detail::require_noise(noise_var);
    std::mt19937_64 gen(seed);
    std::uniform_int_distribution<std::size_t> size_dist(1, max_block);
    std::vector<std::size_t> sizes(n_groups);
    for (auto& s : sizes) s = size_dist(gen);
    std::size_t d = 0;
    for (auto s : sizes) d += s;

    DenseMatrix dm = detail::gaussian_matrix(n, d, gen);
    DenseVector truth(d);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::size_t start = 0, nnz = 0;
    for (auto s : sizes) {
        const auto k = static_cast<std::size_t>(std::llround(frac_nnz * static_cast<double>(s)));
        for (std::size_t j : detail::choose_positions(detail::iota_vec(start, s), k, gen)) truth[j] = nd(gen);
        start += s;
        nnz += k;
    }
    DenseVector r = detail::add_noise(dm * truth, noise_var, gen);
    const double mu = 0.1 * norm_inf(transpose_times(dm, r));

    Generated g;
    g.data.design = std::make_shared<const DesignMatrix>(std::move(dm));
    g.data.r = std::move(r);
    g.data.ground_truth = std::move(truth);
    g.data.groups = IndexPartition::contiguous(sizes);
    g.mu = mu;
    g.manifest = {{"generator", "group_lasso"}, {"seed", seed}, {"n", n}, {"d", d}, {"n_groups", n_groups},
                  {"max_block", max_block}, {"frac_nnz", frac_nnz}, {"block_sizes", sizes}, {"nnz", nnz},
                  {"noise_var", noise_var}, {"mu", mu}};
    return g;
}

/// r = sign(D x + eps) with sign(0) = +1; rows scaled to unit norm when
/// `normalize_rows`. mu is fixed at 1.
inline Generated gen_logistic(std::size_t n, std::size_t d, std::size_t nnz, std::uint64_t seed,
                              double noise_var = 1e-3, bool normalize_rows = true)
{
    if (n == 0 || d == 0) fail(ErrorKind::bad_dimensions, "gen_logistic needs n, d >= 1");
    if (nnz > d) fail(ErrorKind::bad_dimensions, "gen_logistic: nnz " + std::to_string(nnz) + " > d " + std::to_string(d));
    detail::require_noise(noise_var);
    std::mt19937_64 gen(seed);
    DenseMatrix dm = detail::gaussian_matrix(n, d, gen);
    if (normalize_rows) {
        for (std::size_t i = 0; i < n; ++i) {
            auto row = dm.row(i);
            const double nrm = std::sqrt(dot(row, row));
            if (nrm > 0.0)
                for (double& v : row) v /= nrm;
        }
    }
    DenseVector truth(d);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (std::size_t j : detail::choose_positions(detail::iota_vec(0, d), nnz, gen)) truth[j] = nd(gen);
    DenseVector r = detail::add_noise(dm * truth, noise_var, gen);
    for (double& v : r) v = v < 0.0 ? -1.0 : 1.0;

    Generated g;
    g.data.design = std::make_shared<const DesignMatrix>(std::move(dm));
    g.data.r = std::move(r);
    g.data.kind = DatasetKind::binary;
    g.data.ground_truth = std::move(truth);
    g.mu = 1.0;
    g.manifest = {{"generator", "logistic"}, {"seed", seed}, {"n", n}, {"d", d}, {"nnz", nnz},
                  {"noise_var", noise_var}, {"normalize_rows", normalize_rows}, {"mu", 1.0}};
    return g;
}

struct LibsvmOptions {
    std::optional<DatasetKind> kind;      // binary maps two-valued labels to {-1, +1}
    std::optional<std::size_t> dim;       // feature count; defaults to the largest index seen
    double sparse_density = 0.1;          // CSR storage below this fill fraction
};

namespace detail {

[[noreturn]] inline void parse_fail(std::size_t line, std::size_t col, const std::string& reason)
{
    fail(ErrorKind::parse_error, "line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + reason);
}

} // namespace detail

/// `<label> <idx>:<val> ...` per nonempty line, 1-based strictly increasing
/// indices. Line and column numbers in errors are 1-based.
inline Dataset parse_libsvm(std::istream& in, const LibsvmOptions& opt = {})
{
    CsrMatrix csr;
    std::vector<double> labels;
    std::size_t max_index = 0;
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::size_t> idx;
    std::vector<double> val;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view sv(line);
        idx.clear();
        val.clear();
        std::size_t pos = 0;
        bool have_label = false;
        while (true) {
            pos = sv.find_first_not_of(" \t\r", pos);
            if (pos == std::string_view::npos) break;
            const std::size_t end = std::min(sv.find_first_of(" \t\r", pos), sv.size());
            const std::string_view tok = sv.substr(pos, end - pos);
            const std::size_t col = pos + 1;
            if (!have_label) {
                const auto v = parse_double(tok);
                if (!v || !std::isfinite(*v)) detail::parse_fail(line_no, col, "bad label '" + std::string(tok) + "'");
                labels.push_back(*v);
                have_label = true;
            } else {
                const auto colon = tok.find(':');
                if (colon == std::string_view::npos)
                    detail::parse_fail(line_no, col, "expected <index>:<value>, got '" + std::string(tok) + "'");
                const auto i = parse_int<std::size_t>(tok.substr(0, colon));
                if (!i || *i == 0) detail::parse_fail(line_no, col, "bad feature index '" + std::string(tok) + "'");
                const auto v = parse_double(tok.substr(colon + 1));
                if (!v || !std::isfinite(*v))
                    detail::parse_fail(line_no, col + colon + 1, "bad feature value '" + std::string(tok) + "'");
                if (!idx.empty() && *i - 1 <= idx.back()) {
                    fail(ErrorKind::non_increasing_indices, "line " + std::to_string(line_no) + ", column " +
                                                                std::to_string(col) + ": index " + std::to_string(*i) +
                                                                " after " + std::to_string(idx.back() + 1));
                }
                idx.push_back(*i - 1);
                val.push_back(*v);
                max_index = std::max(max_index, *i);
            }
            pos = end;
        }
        if (have_label) csr.push_row(idx, val);
    }
    if (labels.empty()) fail(ErrorKind::empty_file, "no samples");

    std::size_t d = max_index;
    if (opt.dim) {
        if (*opt.dim < max_index) {
            fail(ErrorKind::bad_dimensions, "feature index " + std::to_string(max_index) + " exceeds dim " +
                                                std::to_string(*opt.dim));
        }
        d = *opt.dim;
    }
    csr.cols = d;

    Dataset out;
    out.kind = opt.kind.value_or(DatasetKind::regression);
    if (out.kind == DatasetKind::binary) {
        const std::set<double> distinct(labels.begin(), labels.end());
        const bool already = std::all_of(distinct.begin(), distinct.end(), [](double v) { return v == 1.0 || v == -1.0; });
        if (!already) {
            if (distinct.size() != 2)
                fail(ErrorKind::parse_error, "binary labels need exactly two distinct values, found " +
                                                 std::to_string(distinct.size()));
            const double lo = *distinct.begin();
            for (double& v : labels) v = v == lo ? -1.0 : 1.0;
        }
    }
    out.r = DenseVector(std::move(labels));

    const double cells = static_cast<double>(csr.rows) * static_cast<double>(d);
    if (cells > 0.0 && static_cast<double>(csr.nnz()) / cells < opt.sparse_density) {
        out.design = std::make_shared<const DesignMatrix>(std::move(csr));
    } else {
        const DesignMatrix tmp(std::move(csr));
        out.design = std::make_shared<const DesignMatrix>(tmp.to_dense());
    }
    return out;
}

inline Dataset read_libsvm(const std::string& path, const LibsvmOptions& opt = {})
{
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io_error, "cannot open " + path);
    return parse_libsvm(in, opt);
}

/// Only nonzero features are written; values use 17 significant digits.
inline void write_libsvm(std::ostream& out, const Dataset& ds)
{
    if (!ds.design) fail(ErrorKind::empty_dataset, "write_libsvm: no design");
    const DesignMatrix& m = *ds.design;
    std::string line;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        line = format_double(ds.r[i]);
        auto emit = [&](std::size_t j, double v) {
            if (v == 0.0) return;
            line += ' ';
            line += std::to_string(j + 1);
            line += ':';
            line += format_double(v);
        };
        if (m.is_sparse()) {
            const CsrMatrix& c = m.sparse();
            for (std::size_t k = c.row_ptr[i]; k < c.row_ptr[i + 1]; ++k) emit(c.col_idx[k], c.values[k]);
        } else {
            const auto row = m.dense().row(i);
            for (std::size_t j = 0; j < row.size(); ++j) emit(j, row[j]);
        }
        line += '\n';
        out << line;
    }
}

inline void write_libsvm(const std::string& path, const Dataset& ds)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io_error, "cannot write " + path);
    write_libsvm(out, ds);
    if (!out) fail(ErrorKind::io_error, "write failed: " + path);
}

inline void write_json(const std::string& path, const nlohmann::json& j)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io_error, "cannot write " + path);
    out << j.dump(2) << '\n';
    if (!out) fail(ErrorKind::io_error, "write failed: " + path);
}

inline nlohmann::json read_json(const std::string& path)
{
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io_error, "cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::parse_error, path + ": " + e.what());
    }
}

enum class ModelKind { lasso, group_lasso, logistic };

inline std::string to_string(ModelKind m)
{
    switch (m) {
    case ModelKind::lasso: return "lasso";
    case ModelKind::group_lasso: return "group_lasso";
    case ModelKind::logistic: return "logistic";
    }
    return "?";
}

inline ModelKind parse_model(const std::string& s)
{
    if (s == "lasso") return ModelKind::lasso;
    if (s == "group_lasso") return ModelKind::group_lasso;
    if (s == "logistic") return ModelKind::logistic;
    fail(ErrorKind::invalid_config, "unknown model '" + s + "' (lasso, group_lasso, logistic)");
}

inline SplittingProblem make_problem(const Dataset& ds, ModelKind model, double mu)
{
    switch (model) {
    case ModelKind::lasso: return SplittingProblem::lasso(ds.design, ds.r, mu);
    case ModelKind::group_lasso:
        return SplittingProblem::group_lasso(ds.design, ds.r,
                                             ds.groups ? *ds.groups : IndexPartition::singletons(ds.d()), mu);
    case ModelKind::logistic: return SplittingProblem::logistic(ds.design, ds.r, mu);
    }
    fail(ErrorKind::invalid_config, "unknown model");
}

} // namespace splitkit
