#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace kbz {

enum class Axis { rows, columns };

// Half-open index range [begin, end).
struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
};

// Row-major dense matrix with cached row/column squared norms and
// squared Frobenius norm. Immutable after construction; safe to share
// across concurrent solver runs.
class DenseMatrix {
public:
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (rows_ == 0 || cols_ == 0)
            throw std::invalid_argument("DenseMatrix: dimensions must be positive");
        if (data_.size() != rows_ * cols_)
            throw std::invalid_argument("DenseMatrix: data size does not match dimensions");
        row_sq_norms_.assign(rows_, 0.0);
        col_sq_norms_.assign(cols_, 0.0);
        frob_sq_ = 0.0;
        for (std::size_t i = 0; i < rows_; ++i) {
            const double* row = data_.data() + i * cols_;
            for (std::size_t j = 0; j < cols_; ++j) {
                const double v2 = row[j] * row[j];
                row_sq_norms_[i] += v2;
                col_sq_norms_[j] += v2;
            }
            frob_sq_ += row_sq_norms_[i];
        }
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * cols_, cols_};
    }

    const std::vector<double>& values() const { return data_; }
    const std::vector<double>& row_sq_norms() const { return row_sq_norms_; }
    const std::vector<double>& col_sq_norms() const { return col_sq_norms_; }
    double row_sq_norm(std::size_t i) const { return row_sq_norms_[i]; }
    double col_sq_norm(std::size_t j) const { return col_sq_norms_[j]; }
    double frobenius_sq() const { return frob_sq_; }

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> data_;
    std::vector<double> row_sq_norms_;
    std::vector<double> col_sq_norms_;
    double frob_sq_;
};

// Squared Frobenius norm of the row block A(I,:) or column block A(:,J).
inline double block_frob_sq(const DenseMatrix& a, IndexRange range, Axis axis) {
    const auto& norms = axis == Axis::rows ? a.row_sq_norms() : a.col_sq_norms();
    double sum = 0.0;
    for (std::size_t k = range.begin; k < range.end; ++k) sum += norms[k];
    return sum;
}

// r = (A(:,J))^T v  for v of length rows().
inline std::vector<double> col_block_transpose_times(const DenseMatrix& a, IndexRange j,
                                                     std::span<const double> v) {
    std::vector<double> r(j.size(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto row = a.row(i);
        const double vi = v[i];
        if (vi == 0.0) continue;
        for (std::size_t k = 0; k < r.size(); ++k) r[k] += row[j.begin + k] * vi;
    }
    return r;
}

// w = A(:,J) r  for r of length |J|.
inline std::vector<double> col_block_times(const DenseMatrix& a, IndexRange j,
                                           std::span<const double> r) {
    std::vector<double> w(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto row = a.row(i);
        double acc = 0.0;
        for (std::size_t k = 0; k < r.size(); ++k) acc += row[j.begin + k] * r[k];
        w[i] = acc;
    }
    return w;
}

// w = A(I,:) x  for x of length cols().
inline std::vector<double> row_block_times(const DenseMatrix& a, IndexRange i,
                                           std::span<const double> x) {
    std::vector<double> w(i.size(), 0.0);
    for (std::size_t t = 0; t < w.size(); ++t) {
        const auto row = a.row(i.begin + t);
        double acc = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) acc += row[j] * x[j];
        w[t] = acc;
    }
    return w;
}

// g = (A(I,:))^T r  for r of length |I|.
inline std::vector<double> row_block_transpose_times(const DenseMatrix& a, IndexRange i,
                                                     std::span<const double> r) {
    std::vector<double> g(a.cols(), 0.0);
    for (std::size_t t = 0; t < r.size(); ++t) {
        const auto row = a.row(i.begin + t);
        const double rt = r[t];
        if (rt == 0.0) continue;
        for (std::size_t j = 0; j < row.size(); ++j) g[j] += row[j] * rt;
    }
    return g;
}

// Plain-text format: first line "rows cols", then one row per line of
// space-separated decimal reals.
inline void save_matrix(const DenseMatrix& a, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_matrix: cannot open " + path.string());
    out << a.rows() << ' ' << a.cols() << '\n';
    out << std::setprecision(17);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto row = a.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) out << ' ';
            out << row[j];
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("save_matrix: write failed for " + path.string());
}

inline DenseMatrix load_matrix(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_matrix: cannot open " + path.string());
    std::size_t rows = 0, cols = 0;
    if (!(in >> rows >> cols) || rows == 0 || cols == 0)
        throw std::runtime_error("load_matrix: bad header in " + path.string());
    std::vector<double> data(rows * cols);
    for (auto& v : data) {
        if (!(in >> v))
            throw std::runtime_error("load_matrix: truncated data in " + path.string());
    }
    return DenseMatrix(rows, cols, std::move(data));
}

}  // namespace kbz
