#pragma once

#include <cstddef>
#include <memory>
#include <variant>
#include <vector>

#include "splitkit/linalg.hpp"

namespace splitkit {

/// Compressed sparse row storage for LIBSVM-sized designs.
struct CsrMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::size_t> row_ptr{0};
    std::vector<std::size_t> col_idx;
    std::vector<double> values;

    std::size_t nnz() const noexcept { return values.size(); }

    void push_row(std::span<const std::size_t> idx, std::span<const double> val)
    {
        col_idx.insert(col_idx.end(), idx.begin(), idx.end());
        values.insert(values.end(), val.begin(), val.end());
        row_ptr.push_back(values.size());
        ++rows;
    }
};

/// Row-oriented view of an n x d design matrix, stored dense or sparse.
class DesignMatrix {
public:
    DesignMatrix() = default;
    explicit DesignMatrix(DenseMatrix dense) : store_(std::move(dense)) {}
    explicit DesignMatrix(CsrMatrix csr) : store_(std::move(csr))
    {
        const auto& m = std::get<CsrMatrix>(store_);
        if (m.row_ptr.size() != m.rows + 1) fail(ErrorKind::dimension_mismatch, "CsrMatrix row_ptr size");
        for (std::size_t c : m.col_idx)
            if (c >= m.cols) fail(ErrorKind::dimension_mismatch, "CsrMatrix column index out of range");
        detail::require_finite(m.values, "CsrMatrix");
    }

    bool is_sparse() const noexcept { return std::holds_alternative<CsrMatrix>(store_); }

    std::size_t rows() const noexcept
    {
        return is_sparse() ? std::get<CsrMatrix>(store_).rows : std::get<DenseMatrix>(store_).rows();
    }

    std::size_t cols() const noexcept
    {
        return is_sparse() ? std::get<CsrMatrix>(store_).cols : std::get<DenseMatrix>(store_).cols();
    }

    const DenseMatrix& dense() const { return std::get<DenseMatrix>(store_); }
    const CsrMatrix& sparse() const { return std::get<CsrMatrix>(store_); }

    /// d_i^T x
    double row_dot(std::size_t i, std::span<const double> x) const noexcept
    {
        if (is_sparse()) {
            const auto& m = std::get<CsrMatrix>(store_);
            double s = 0.0;
            for (std::size_t k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k) s += m.values[k] * x[m.col_idx[k]];
            return s;
        }
        return dot(std::get<DenseMatrix>(store_).row(i), x);
    }

    /// y += a * d_i
    void row_axpy(std::size_t i, double a, std::span<double> y) const noexcept
    {
        if (is_sparse()) {
            const auto& m = std::get<CsrMatrix>(store_);
            for (std::size_t k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k) y[m.col_idx[k]] += a * m.values[k];
            return;
        }
        auto row = std::get<DenseMatrix>(store_).row(i);
        for (std::size_t c = 0; c < row.size(); ++c) y[c] += a * row[c];
    }

    DenseVector row(std::size_t i) const
    {
        DenseVector out(cols());
        row_axpy(i, 1.0, out.span());
        return out;
    }

    double row_norm_sq(std::size_t i) const noexcept
    {
        if (is_sparse()) {
            const auto& m = std::get<CsrMatrix>(store_);
            double s = 0.0;
            for (std::size_t k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k) s += m.values[k] * m.values[k];
            return s;
        }
        auto r = std::get<DenseMatrix>(store_).row(i);
        return dot(r, r);
    }

    DenseVector times(const DenseVector& x) const
    {
        if (x.dim() != cols()) fail(ErrorKind::dimension_mismatch, "DesignMatrix::times");
        DenseVector out(rows());
        for (std::size_t i = 0; i < rows(); ++i) out[i] = row_dot(i, x.span());
        return out;
    }

    DenseVector transpose_times(const DenseVector& v) const
    {
        if (v.dim() != rows()) fail(ErrorKind::dimension_mismatch, "DesignMatrix::transpose_times");
        DenseVector out(cols());
        for (std::size_t i = 0; i < rows(); ++i)
            if (v[i] != 0.0) row_axpy(i, v[i], out.span());
        return out;
    }

    /// D^T D as a dense matrix (only sensible for moderate column counts).
    DenseMatrix gram() const
    {
        if (!is_sparse()) return splitkit::gram(dense());
        const auto& m = sparse();
        DenseMatrix g(m.cols, m.cols);
        for (std::size_t i = 0; i < m.rows; ++i)
            for (std::size_t a = m.row_ptr[i]; a < m.row_ptr[i + 1]; ++a)
                for (std::size_t b = m.row_ptr[i]; b < m.row_ptr[i + 1]; ++b)
                    g(m.col_idx[a], m.col_idx[b]) += m.values[a] * m.values[b];
        return g;
    }

    /// D D^T as a dense matrix.
    DenseMatrix outer_gram() const
    {
        const std::size_t n = rows();
        DenseMatrix g(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            DenseVector ri = row(i);
            for (std::size_t j = i; j < n; ++j) g(i, j) = g(j, i) = row_dot(j, ri.span());
        }
        return g;
    }

    DenseMatrix to_dense() const
    {
        if (!is_sparse()) return dense();
        DenseMatrix out(rows(), cols());
        const auto& m = sparse();
        for (std::size_t i = 0; i < m.rows; ++i)
            for (std::size_t k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k) out(i, m.col_idx[k]) = m.values[k];
        return out;
    }

private:
    std::variant<DenseMatrix, CsrMatrix> store_{DenseMatrix{}};
};

} // namespace splitkit
