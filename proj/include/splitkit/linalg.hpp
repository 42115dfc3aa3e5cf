#pragma once

// Small dense linear algebra used throughout the toolkit: row-major
// matrices, vectors, a cyclic Jacobi eigensolver for symmetric matrices,
// Cholesky solves, weighted norms and the two shrinkage operators.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "splitkit/error.hpp"

namespace splitkit {

namespace detail {

inline void require_finite(std::span<const double> v, const char* what)
{
    for (double e : v) {
        if (!std::isfinite(e)) fail(ErrorKind::non_finite, std::string(what) + " has a non-finite entry");
    }
}

} // namespace detail

class DenseVector {
public:
    DenseVector() = default;

    explicit DenseVector(std::size_t dim, double fill = 0.0) : data_(dim, fill)
    {
        detail::require_finite(data_, "DenseVector");
    }

    DenseVector(std::initializer_list<double> init) : data_(init)
    {
        detail::require_finite(data_, "DenseVector");
    }

    explicit DenseVector(std::vector<double> entries) : data_(std::move(entries))
    {
        detail::require_finite(data_, "DenseVector");
    }

    static DenseVector zeros(std::size_t dim) { return DenseVector(dim); }

    std::size_t dim() const noexcept { return data_.size(); }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    std::span<double> span() noexcept { return data_; }
    std::span<const double> span() const noexcept { return data_; }
    const std::vector<double>& entries() const noexcept { return data_; }

    auto begin() noexcept { return data_.begin(); }
    auto end() noexcept { return data_.end(); }
    auto begin() const noexcept { return data_.begin(); }
    auto end() const noexcept { return data_.end(); }

    bool all_finite() const noexcept
    {
        return std::all_of(data_.begin(), data_.end(), [](double e) { return std::isfinite(e); });
    }

    DenseVector& operator+=(const DenseVector& o);
    DenseVector& operator-=(const DenseVector& o);
    DenseVector& operator*=(double a) noexcept
    {
        for (double& e : data_) e *= a;
        return *this;
    }

    friend bool operator==(const DenseVector&, const DenseVector&) = default;

private:
    std::vector<double> data_;
};

inline void require_same_dim(const DenseVector& a, const DenseVector& b, const char* where)
{
    if (a.dim() != b.dim()) {
        fail(ErrorKind::dimension_mismatch, std::string(where) + ": " + std::to_string(a.dim()) +
                                                " vs " + std::to_string(b.dim()));
    }
}

inline DenseVector& DenseVector::operator+=(const DenseVector& o)
{
    require_same_dim(*this, o, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
}

inline DenseVector& DenseVector::operator-=(const DenseVector& o)
{
    require_same_dim(*this, o, "operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
}

inline DenseVector operator+(DenseVector a, const DenseVector& b) { return a += b; }
inline DenseVector operator-(DenseVector a, const DenseVector& b) { return a -= b; }
inline DenseVector operator*(double s, DenseVector a) { return a *= s; }

inline double dot(std::span<const double> a, std::span<const double> b) noexcept
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double dot(const DenseVector& a, const DenseVector& b)
{
    require_same_dim(a, b, "dot");
    return dot(a.span(), b.span());
}

inline double norm2(const DenseVector& v) noexcept { return std::sqrt(dot(v.span(), v.span())); }

inline double norm_inf(const DenseVector& v) noexcept
{
    double m = 0.0;
    for (double e : v) m = std::max(m, std::abs(e));
    return m;
}

inline double norm1(const DenseVector& v) noexcept
{
    double s = 0.0;
    for (double e : v) s += std::abs(e);
    return s;
}

/// y += a * x
inline void axpy(double a, const DenseVector& x, DenseVector& y)
{
    require_same_dim(x, y, "axpy");
    for (std::size_t i = 0; i < x.dim(); ++i) y[i] += a * x[i];
}

inline double max_abs_diff(const DenseVector& a, const DenseVector& b)
{
    require_same_dim(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

class DenseMatrix {
public:
    DenseMatrix() = default;

    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill)
    {
        detail::require_finite(data_, "DenseMatrix");
    }

    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
        : rows_(rows), cols_(cols), data_(std::move(row_major))
    {
        if (data_.size() != rows_ * cols_) {
            fail(ErrorKind::dimension_mismatch, "DenseMatrix: entries length " + std::to_string(data_.size()) +
                                                    " != rows*cols " + std::to_string(rows_ * cols_));
        }
        detail::require_finite(data_, "DenseMatrix");
    }

    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows)
    {
        rows_ = rows.size();
        cols_ = rows_ ? rows.begin()->size() : 0;
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) fail(ErrorKind::dimension_mismatch, "DenseMatrix: ragged initializer");
            data_.insert(data_.end(), r.begin(), r.end());
        }
        detail::require_finite(data_, "DenseMatrix");
    }

    static DenseMatrix zeros(std::size_t rows, std::size_t cols) { return DenseMatrix(rows, cols); }

    static DenseMatrix identity(std::size_t n, double scale = 1.0)
    {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = scale;
        return m;
    }

    static DenseMatrix diagonal(const DenseVector& d)
    {
        DenseMatrix m(d.dim(), d.dim());
        for (std::size_t i = 0; i < d.dim(); ++i) m(i, i) = d[i];
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    const std::vector<double>& entries() const noexcept { return data_; }

    DenseMatrix transpose() const
    {
        DenseMatrix t(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
        return t;
    }

    DenseMatrix& operator+=(const DenseMatrix& o)
    {
        require_same_shape(o, "operator+=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }

    DenseMatrix& operator-=(const DenseMatrix& o)
    {
        require_same_shape(o, "operator-=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }

    DenseMatrix& operator*=(double a) noexcept
    {
        for (double& e : data_) e *= a;
        return *this;
    }

    /// Copies `block` into this matrix with its top-left corner at (r0, c0).
    void set_block(std::size_t r0, std::size_t c0, const DenseMatrix& block)
    {
        if (r0 + block.rows() > rows_ || c0 + block.cols() > cols_) {
            fail(ErrorKind::dimension_mismatch, "set_block: block does not fit");
        }
        for (std::size_t r = 0; r < block.rows(); ++r)
            for (std::size_t c = 0; c < block.cols(); ++c) (*this)(r0 + r, c0 + c) = block(r, c);
    }

    DenseMatrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const
    {
        if (r0 + nr > rows_ || c0 + nc > cols_) fail(ErrorKind::dimension_mismatch, "block: out of range");
        DenseMatrix b(nr, nc);
        for (std::size_t r = 0; r < nr; ++r)
            for (std::size_t c = 0; c < nc; ++c) b(r, c) = (*this)(r0 + r, c0 + c);
        return b;
    }

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    void require_same_shape(const DenseMatrix& o, const char* where) const
    {
        if (rows_ != o.rows_ || cols_ != o.cols_) fail(ErrorKind::dimension_mismatch, where);
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }
inline DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) { return a -= b; }
inline DenseMatrix operator*(double s, DenseMatrix a) { return a *= s; }

inline DenseVector operator*(const DenseMatrix& m, const DenseVector& v)
{
    if (m.cols() != v.dim()) fail(ErrorKind::dimension_mismatch, "matvec");
    DenseVector out(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) out[r] = dot(m.row(r), v.span());
    return out;
}

/// m^T v without forming the transpose.
inline DenseVector transpose_times(const DenseMatrix& m, const DenseVector& v)
{
    if (m.rows() != v.dim()) fail(ErrorKind::dimension_mismatch, "transpose_times");
    DenseVector out(m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const double a = v[r];
        if (a == 0.0) continue;
        auto row = m.row(r);
        for (std::size_t c = 0; c < m.cols(); ++c) out[c] += a * row[c];
    }
    return out;
}

inline DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b)
{
    if (a.cols() != b.rows()) fail(ErrorKind::dimension_mismatch, "matmul");
    DenseMatrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            auto brow = b.row(k);
            auto orow = out.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

/// a^T a
inline DenseMatrix gram(const DenseMatrix& a)
{
    DenseMatrix g(a.cols(), a.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        auto row = a.row(r);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double ri = row[i];
            if (ri == 0.0) continue;
            for (std::size_t j = i; j < a.cols(); ++j) g(i, j) += ri * row[j];
        }
    }
    for (std::size_t i = 0; i < a.cols(); ++i)
        for (std::size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
    return g;
}

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b)
{
    if (a.rows() != b.rows() || a.cols() != b.cols()) fail(ErrorKind::dimension_mismatch, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.entries().size(); ++i)
        m = std::max(m, std::abs(a.entries()[i] - b.entries()[i]));
    return m;
}

inline double max_abs(const DenseMatrix& a) noexcept
{
    double m = 0.0;
    for (double e : a.entries()) m = std::max(m, std::abs(e));
    return m;
}

/// Symmetry to `rel_tol` relative to the largest entry magnitude.
inline bool is_symmetric(const DenseMatrix& g, double rel_tol = 1e-12)
{
    if (!g.square()) return false;
    const double scale = std::max(1.0, max_abs(g));
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = i + 1; j < g.cols(); ++j)
            if (std::abs(g(i, j) - g(j, i)) > rel_tol * scale) return false;
    return true;
}

inline void require_symmetric(const DenseMatrix& g, const char* where)
{
    if (!g.square()) fail(ErrorKind::not_square, where);
    if (!is_symmetric(g)) fail(ErrorKind::not_symmetric, where);
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
inline std::vector<double> symmetric_eigenvalues(const DenseMatrix& g, int max_sweeps = 100)
{
    require_symmetric(g, "symmetric_eigenvalues");
    const std::size_t n = g.rows();
    DenseMatrix a = g;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) a(i, j) = a(j, i) = 0.5 * (g(i, j) + g(j, i));

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        double diag = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            diag += a(i, i) * a(i, i);
            for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        }
        if (off <= 1e-30 * std::max(diag, 1e-300) || off == 0.0) break;

        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

inline double min_eigenvalue(const DenseMatrix& g)
{
    if (g.rows() == 0) return 0.0;
    return symmetric_eigenvalues(g).front();
}

inline bool is_psd(const DenseMatrix& g, double tol)
{
    if (!g.square()) fail(ErrorKind::not_square, "is_psd");
    if (!is_symmetric(g)) fail(ErrorKind::not_symmetric, "is_psd");
    return min_eigenvalue(g) >= -tol;
}

inline constexpr double psd_tolerance = 1e-10;

/// sqrt(v^T G v); quadratic forms below -psd_tolerance are rejected.
inline double weighted_norm(const DenseVector& v, const DenseMatrix& g)
{
    if (!g.square() || g.rows() != v.dim()) fail(ErrorKind::dimension_mismatch, "weighted_norm");
    if (!is_symmetric(g)) fail(ErrorKind::not_symmetric, "weighted_norm");
    const double q = dot(v, g * v);
    if (q < -psd_tolerance) {
        fail(ErrorKind::not_psd_quadratic_form, "v^T G v = " + std::to_string(q));
    }
    return std::sqrt(std::max(q, 0.0));
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
class Cholesky {
public:
    explicit Cholesky(const DenseMatrix& a) : l_(a.rows(), a.cols())
    {
        if (!a.square()) fail(ErrorKind::not_square, "Cholesky");
        const std::size_t n = a.rows();
        for (std::size_t j = 0; j < n; ++j) {
            double d = a(j, j);
            for (std::size_t k = 0; k < j; ++k) d -= l_(j, k) * l_(j, k);
            if (!(d > 0.0)) {
                fail(ErrorKind::subproblem_unsolvable, "Cholesky: matrix is not positive definite (pivot " +
                                                           std::to_string(j) + ")");
            }
            const double ljj = std::sqrt(d);
            l_(j, j) = ljj;
            for (std::size_t i = j + 1; i < n; ++i) {
                double s = a(i, j);
                for (std::size_t k = 0; k < j; ++k) s -= l_(i, k) * l_(j, k);
                l_(i, j) = s / ljj;
            }
        }
    }

    std::size_t dim() const noexcept { return l_.rows(); }

    DenseVector solve(const DenseVector& b) const
    {
        const std::size_t n = l_.rows();
        if (b.dim() != n) fail(ErrorKind::dimension_mismatch, "Cholesky::solve");
        DenseVector y = b;
        for (std::size_t i = 0; i < n; ++i) {
            double s = y[i];
            for (std::size_t k = 0; k < i; ++k) s -= l_(i, k) * y[k];
            y[i] = s / l_(i, i);
        }
        for (std::size_t ii = n; ii-- > 0;) {
            double s = y[ii];
            for (std::size_t k = ii + 1; k < n; ++k) s -= l_(k, ii) * y[k];
            y[ii] = s / l_(ii, ii);
        }
        return y;
    }

private:
    DenseMatrix l_;
};

// ---------------------------------------------------------------------------
// Shrinkage operators

/// Disjoint index blocks covering 0..dim-1.
class IndexPartition {
public:
    IndexPartition() = default;

    IndexPartition(std::vector<std::vector<std::size_t>> blocks, std::size_t dim)
        : blocks_(std::move(blocks)), dim_(dim)
    {
        std::vector<char> seen(dim_, 0);
        std::size_t count = 0;
        for (const auto& b : blocks_) {
            if (b.empty()) fail(ErrorKind::invalid_partition, "empty block");
            for (std::size_t i : b) {
                if (i >= dim_) fail(ErrorKind::invalid_partition, "index " + std::to_string(i) + " out of range");
                if (seen[i]) fail(ErrorKind::invalid_partition, "index " + std::to_string(i) + " in two blocks");
                seen[i] = 1;
                ++count;
            }
        }
        if (count != dim_) fail(ErrorKind::invalid_partition, "blocks do not cover every index");
    }

    /// Consecutive blocks with the given sizes.
    static IndexPartition contiguous(const std::vector<std::size_t>& sizes)
    {
        std::vector<std::vector<std::size_t>> blocks;
        std::size_t next = 0;
        for (std::size_t s : sizes) {
            std::vector<std::size_t> b(s);
            std::iota(b.begin(), b.end(), next);
            next += s;
            blocks.push_back(std::move(b));
        }
        return IndexPartition(std::move(blocks), next);
    }

    static IndexPartition singletons(std::size_t dim)
    {
        return contiguous(std::vector<std::size_t>(dim, 1));
    }

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return blocks_.size(); }
    const std::vector<std::vector<std::size_t>>& blocks() const noexcept { return blocks_; }

    friend bool operator==(const IndexPartition&, const IndexPartition&) = default;

private:
    std::vector<std::vector<std::size_t>> blocks_;
    std::size_t dim_ = 0;
};

inline DenseVector soft_threshold(const DenseVector& v, double a)
{
    if (a < 0.0) fail(ErrorKind::negative_threshold, "soft_threshold: a = " + std::to_string(a));
    DenseVector out(v.dim());
    for (std::size_t i = 0; i < v.dim(); ++i) {
        const double e = v[i];
        out[i] = e > a ? e - a : (e < -a ? e + a : 0.0);
    }
    return out;
}

inline DenseVector block_soft_threshold(const DenseVector& v, const IndexPartition& blocks, double a)
{
    if (a < 0.0) fail(ErrorKind::negative_threshold, "block_soft_threshold: a = " + std::to_string(a));
    if (blocks.dim() != v.dim()) fail(ErrorKind::invalid_partition, "partition does not match vector dim");
    DenseVector out(v.dim());
    for (const auto& b : blocks.blocks()) {
        if (b.size() == 1) {
            // Same arithmetic as soft_threshold so the two agree bit for bit.
            const double e = v[b[0]];
            out[b[0]] = e > a ? e - a : (e < -a ? e + a : 0.0);
            continue;
        }
        double sq = 0.0;
        for (std::size_t i : b) sq += v[i] * v[i];
        const double nrm = std::sqrt(sq);
        if (nrm <= a || nrm == 0.0) continue;
        const double factor = 1.0 - a / nrm;
        for (std::size_t i : b) out[i] = factor * v[i];
    }
    return out;
}

} // namespace splitkit
