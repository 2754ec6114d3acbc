#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <functional>
#include <vector>

#include "kbz/dense_matrix.hpp"
#include "kbz/partition.hpp"

namespace kbz {

// Relative cutoff below which a singular value counts as zero.
inline constexpr double sigma_zero_rel_cutoff = 1e-12;

namespace detail {

// Largest eigenvalue of the implicit Gram operator v -> apply(v) by power
// iteration with a deterministic start vector. dim is the Gram side.
inline double power_iteration_lambda_max(
    std::size_t dim, const std::function<std::vector<double>(const std::vector<double>&)>& apply,
    double rel_tol, std::size_t max_iters) {
    std::vector<double> v(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
    double lambda = 0.0;
    bool restarted = false;
    for (std::size_t it = 0; it < max_iters; ++it) {
        std::vector<double> w = apply(v);
        double rayleigh = 0.0, wnorm_sq = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
            rayleigh += v[k] * w[k];
            wnorm_sq += w[k] * w[k];
        }
        if (wnorm_sq <= 0.0) {
            if (restarted) return 0.0;
            // start vector can be orthogonal to the top eigenspace; restart
            // with a deterministic aperiodic vector
            restarted = true;
            double nrm = 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
                v[k] = 1.5 + std::sin(static_cast<double>(k + 1));
                nrm += v[k] * v[k];
            }
            nrm = std::sqrt(nrm);
            for (auto& x : v) x /= nrm;
            continue;
        }
        const double wnorm = std::sqrt(wnorm_sq);
        for (std::size_t k = 0; k < dim; ++k) v[k] = w[k] / wnorm;
        if (it > 0 && std::abs(rayleigh - lambda) <= rel_tol * std::abs(rayleigh)) {
            return rayleigh;
        }
        lambda = rayleigh;
    }
    return lambda;
}

inline Eigen::MatrixXd block_to_eigen(const DenseMatrix& a, IndexRange block, Axis axis) {
    if (axis == Axis::rows) {
        Eigen::MatrixXd sub(block.size(), a.cols());
        for (std::size_t t = 0; t < block.size(); ++t)
            for (std::size_t j = 0; j < a.cols(); ++j) sub(t, j) = a(block.begin + t, j);
        return sub;
    }
    Eigen::MatrixXd sub(a.rows(), block.size());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t t = 0; t < block.size(); ++t) sub(i, t) = a(i, block.begin + t);
    return sub;
}

}  // namespace detail

// sigma_max^2 of the row block A(I,:) or column block A(:,J), by power
// iteration on the Gram operator over the smaller side. Relative accuracy
// 1e-10 or 1000 iterations, whichever comes first. Zero block -> 0.
inline double block_sigma_max_sq(const DenseMatrix& a, IndexRange block, Axis axis) {
    if (block.size() == 0) throw std::invalid_argument("block_sigma_max_sq: empty block");
    if (block_frob_sq(a, block, axis) == 0.0) return 0.0;

    std::function<std::vector<double>(const std::vector<double>&)> apply;
    std::size_t dim;
    if (axis == Axis::rows) {
        if (block.size() <= a.cols()) {
            dim = block.size();  // Gram = B B^T
            apply = [&a, block](const std::vector<double>& v) {
                const auto t = row_block_transpose_times(a, block, v);
                return row_block_times(a, block, t);
            };
        } else {
            dim = a.cols();  // Gram = B^T B
            apply = [&a, block](const std::vector<double>& v) {
                const auto t = row_block_times(a, block, v);
                return row_block_transpose_times(a, block, t);
            };
        }
    } else {
        if (block.size() <= a.rows()) {
            dim = block.size();  // Gram = B^T B
            apply = [&a, block](const std::vector<double>& v) {
                const auto t = col_block_times(a, block, v);
                return col_block_transpose_times(a, block, t);
            };
        } else {
            dim = a.rows();  // Gram = B B^T
            apply = [&a, block](const std::vector<double>& v) {
                const auto t = col_block_transpose_times(a, block, v);
                return col_block_times(a, block, t);
            };
        }
    }
    return detail::power_iteration_lambda_max(dim, apply, 1e-12, 1000);
}

// sigma_min^2 of a block, where sigma_min is the smallest singular value
// above sigma_zero_rel_cutoff * sigma_max of the block. Zero block -> 0.
inline double block_sigma_min_sq_nonzero(const DenseMatrix& a, IndexRange block, Axis axis) {
    const Eigen::MatrixXd sub = detail::block_to_eigen(a, block, axis);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(sub);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) return 0.0;
    const double cutoff = sigma_zero_rel_cutoff * sv(0);
    double smallest = 0.0;
    for (Eigen::Index k = 0; k < sv.size(); ++k) {
        if (sv(k) > cutoff) smallest = sv(k);
    }
    return smallest * smallest;
}

// beta ratios over a partition pair, eq-style: max (resp. min over nonzero
// spectra) of sigma^2(block) / ||block||_F^2.
struct BlockSpectralBounds {
    double beta_max_rows = 0.0;
    double beta_max_cols = 0.0;
    double beta_min_rows = 0.0;
};

inline BlockSpectralBounds compute_spectral_bounds(const DenseMatrix& a,
                                                   const Partition& row_partition,
                                                   const Partition& col_partition) {
    if (row_partition.axis() != Axis::rows || col_partition.axis() != Axis::columns)
        throw std::invalid_argument("compute_spectral_bounds: partition axes mismatched");
    BlockSpectralBounds out;
    bool have_min = false;
    for (const auto& blk : row_partition.blocks()) {
        const double f2 = block_frob_sq(a, blk, Axis::rows);
        if (f2 == 0.0) continue;
        out.beta_max_rows = std::max(out.beta_max_rows, block_sigma_max_sq(a, blk, Axis::rows) / f2);
        const double smin_sq = block_sigma_min_sq_nonzero(a, blk, Axis::rows);
        if (smin_sq > 0.0) {
            const double ratio = smin_sq / f2;
            out.beta_min_rows = have_min ? std::min(out.beta_min_rows, ratio) : ratio;
            have_min = true;
        }
    }
    for (const auto& blk : col_partition.blocks()) {
        const double f2 = block_frob_sq(a, blk, Axis::columns);
        if (f2 == 0.0) continue;
        out.beta_max_cols =
            std::max(out.beta_max_cols, block_sigma_max_sq(a, blk, Axis::columns) / f2);
    }
    return out;
}

}  // namespace kbz
