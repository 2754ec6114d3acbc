#pragma once

#include <Eigen/Dense>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "kbz/dense_matrix.hpp"
#include "kbz/random.hpp"
#include "kbz/spectral.hpp"

namespace kbz {

enum class ProblemKind { sparse_ls, min_norm_ls };

// One generated test problem: b = y_hat + e with e in null(A^T), and a
// reference solution x_hat (planted sparse vector or the pseudo-inverse
// solution).
struct ProblemInstance {
    DenseMatrix matrix;
    std::vector<double> b;
    std::vector<double> x_hat;  // empty when no reference is available
    std::vector<double> y_hat;
    double noise_q = 0.0;
    ProblemKind kind = ProblemKind::min_norm_ls;
    double lambda = 0.0;
    std::uint64_t seed = 0;
};

namespace detail {

inline Eigen::MatrixXd to_eigen(const DenseMatrix& a) {
    Eigen::MatrixXd out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
    return out;
}

inline DenseMatrix from_eigen(const Eigen::MatrixXd& m) {
    std::vector<double> data(static_cast<std::size_t>(m.rows() * m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            data[static_cast<std::size_t>(i) * m.cols() + j] = m(i, j);
    return DenseMatrix(m.rows(), m.cols(), std::move(data));
}

}  // namespace detail

// i.i.d. standard-normal entries; deterministic per seed.
inline DenseMatrix generate_gaussian(std::size_t m, std::size_t n, std::uint64_t seed) {
    if (m < 1 || n < 1) throw std::invalid_argument("generate_gaussian: bad dimensions");
    RandomStream rng(seed);
    std::vector<double> data(m * n);
    for (auto& v : data) v = rng.normal();
    return DenseMatrix(m, n, std::move(data));
}

// A = U D V^T with orthonormalized Gaussian factors U (m x r), V (n x r)
// and D diagonal drawn uniformly from (1, kappa). rank(A) = r and
// cond(A) <= kappa.
inline DenseMatrix generate_structured(std::size_t m, std::size_t n, std::size_t r, double kappa,
                                       std::uint64_t seed) {
    if (m < 1 || n < 1 || r < 1 || r > std::min(m, n))
        throw std::invalid_argument("generate_structured: require 1 <= r <= min(m, n)");
    if (!(kappa > 1.0)) throw std::invalid_argument("generate_structured: require kappa > 1");
    RandomStream rng(seed);
    Eigen::MatrixXd gu(m, r), gv(n, r);
    for (Eigen::Index i = 0; i < gu.rows(); ++i)
        for (Eigen::Index j = 0; j < gu.cols(); ++j) gu(i, j) = rng.normal();
    for (Eigen::Index i = 0; i < gv.rows(); ++i)
        for (Eigen::Index j = 0; j < gv.cols(); ++j) gv(i, j) = rng.normal();
    Eigen::MatrixXd u = Eigen::HouseholderQR<Eigen::MatrixXd>(gu)
                            .householderQ() *
                        Eigen::MatrixXd::Identity(m, r);
    Eigen::MatrixXd v = Eigen::HouseholderQR<Eigen::MatrixXd>(gv)
                            .householderQ() *
                        Eigen::MatrixXd::Identity(n, r);
    Eigen::VectorXd d(r);
    for (Eigen::Index k = 0; k < d.size(); ++k) d(k) = 1.0 + (kappa - 1.0) * rng.uniform();
    return detail::from_eigen(u * d.asDiagonal() * v.transpose());
}

// Vector with ceil(fraction * n) standard-normal entries at uniformly random
// positions; all other entries exactly zero.
inline std::vector<double> plant_sparse_solution(std::size_t n, double sparsity_fraction,
                                                 std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("plant_sparse_solution: n must be >= 1");
    if (!(sparsity_fraction > 0.0 && sparsity_fraction <= 1.0))
        throw std::invalid_argument("plant_sparse_solution: fraction must be in (0, 1]");
    const auto s = static_cast<std::size_t>(
        std::ceil(sparsity_fraction * static_cast<double>(n)));
    RandomStream rng(seed);
    std::vector<double> x(n, 0.0);
    std::vector<std::size_t> positions(n);
    for (std::size_t j = 0; j < n; ++j) positions[j] = j;
    for (std::size_t k = 0; k < s; ++k) {  // Fisher-Yates prefix
        const std::size_t pick = k + rng.uniform_index(n - k);
        std::swap(positions[k], positions[pick]);
        x[positions[k]] = rng.normal();
    }
    return x;
}

// Dimension of null(A^T) under the relative singular value cutoff.
inline std::size_t nullspace_transpose_dim(const DenseMatrix& a) {
    const Eigen::MatrixXd m = detail::to_eigen(a);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) return a.rows();
    const double cutoff = sigma_zero_rel_cutoff * sv(0);
    std::size_t rank = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k)
        if (sv(k) > cutoff) ++rank;
    return a.rows() - rank;
}

// e = N v with N an orthonormal basis of null(A^T) (from a full orthogonal
// decomposition of A) and v uniform on the sphere of radius q * ||y_hat||.
inline std::vector<double> nullspace_noise(const DenseMatrix& a, std::span<const double> y_hat,
                                           double q, std::uint64_t seed) {
    if (q < 0.0) throw std::invalid_argument("nullspace_noise: q must be >= 0");
    if (q == 0.0) return std::vector<double>(a.rows(), 0.0);

    const Eigen::MatrixXd m = detail::to_eigen(a);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU);
    const auto& sv = svd.singularValues();
    const double cutoff = sv.size() > 0 && sv(0) > 0.0 ? sigma_zero_rel_cutoff * sv(0) : 0.0;
    Eigen::Index rank = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k)
        if (sv(k) > cutoff) ++rank;
    const Eigen::Index null_dim = static_cast<Eigen::Index>(a.rows()) - rank;
    if (null_dim <= 0)
        throw std::runtime_error("nullspace_noise: null(A^T) is trivial, no noise possible");

    double y_norm_sq = 0.0;
    for (double v : y_hat) y_norm_sq += v * v;
    const double radius = q * std::sqrt(y_norm_sq);

    RandomStream rng(seed);
    Eigen::VectorXd coeffs(null_dim);
    for (Eigen::Index k = 0; k < null_dim; ++k) coeffs(k) = rng.normal();
    coeffs *= radius / coeffs.norm();

    const Eigen::VectorXd e = svd.matrixU().rightCols(null_dim) * coeffs;
    return std::vector<double>(e.data(), e.data() + e.size());
}

// Minimum-norm least-squares solution A^+ b, singular values below the
// relative cutoff truncated.
inline std::vector<double> pseudo_inverse_solution(const DenseMatrix& a,
                                                   std::span<const double> b) {
    if (b.size() != a.rows())
        throw std::invalid_argument("pseudo_inverse_solution: length mismatch");
    const Eigen::MatrixXd m = detail::to_eigen(a);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double cutoff = sv.size() > 0 && sv(0) > 0.0 ? sigma_zero_rel_cutoff * sv(0) : 0.0;
    Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(b.data(), b.size());
    Eigen::VectorXd coeffs = svd.matrixU().transpose() * rhs;
    for (Eigen::Index k = 0; k < sv.size(); ++k)
        coeffs(k) = sv(k) > cutoff ? coeffs(k) / sv(k) : 0.0;
    const Eigen::VectorXd x = svd.matrixV() * coeffs;
    return std::vector<double>(x.data(), x.data() + x.size());
}

// ||x - x_hat|| / ||x_hat||; absolute norm when the reference is zero.
inline double relative_error(std::span<const double> x, std::span<const double> x_hat) {
    if (x.size() != x_hat.size()) throw std::invalid_argument("relative_error: length mismatch");
    double diff_sq = 0.0, ref_sq = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double d = x[j] - x_hat[j];
        diff_sq += d * d;
        ref_sq += x_hat[j] * x_hat[j];
    }
    const double diff = std::sqrt(diff_sq);
    return ref_sq > 0.0 ? diff / std::sqrt(ref_sq) : diff;
}

// 10 log10(sum x_hat_i^2 / sum (x_i - x_hat_i)^2); +inf on exact match.
inline double psnr(std::span<const double> x, std::span<const double> x_hat) {
    if (x.size() != x_hat.size()) throw std::invalid_argument("psnr: length mismatch");
    double ref_sq = 0.0, err_sq = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double d = x[j] - x_hat[j];
        ref_sq += x_hat[j] * x_hat[j];
        err_sq += d * d;
    }
    if (ref_sq == 0.0) throw std::invalid_argument("psnr: reference signal is zero");
    if (err_sq == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(ref_sq / err_sq);
}

namespace detail {

inline std::vector<double> matrix_times(const DenseMatrix& a, std::span<const double> x) {
    std::vector<double> y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto row = a.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) acc += row[j] * x[j];
        y[i] = acc;
    }
    return y;
}

// Noise vector, falling back to zero when null(A^T) is trivial (full
// row rank leaves nowhere to put consistent noise).
inline std::vector<double> noise_or_zero(const DenseMatrix& a, std::span<const double> y_hat,
                                         double& q, std::uint64_t seed) {
    if (q > 0.0 && nullspace_transpose_dim(a) > 0) return nullspace_noise(a, y_hat, q, seed);
    q = 0.0;
    return std::vector<double>(a.rows(), 0.0);
}

}  // namespace detail

// Sparse least-squares instance: planted sparse x_hat, b = A x_hat + e.
inline ProblemInstance make_sparse_instance(DenseMatrix a, double lambda,
                                            double sparsity_fraction, double q,
                                            std::uint64_t seed) {
    auto x_hat = plant_sparse_solution(a.cols(), sparsity_fraction, mix_seed(seed, 1));
    auto y_hat = detail::matrix_times(a, x_hat);
    double q_eff = q;
    const auto e = detail::noise_or_zero(a, y_hat, q_eff, mix_seed(seed, 2));
    std::vector<double> b(a.rows());
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = y_hat[i] + e[i];
    return ProblemInstance{std::move(a), std::move(b),    std::move(x_hat), std::move(y_hat),
                           q_eff,        ProblemKind::sparse_ls, lambda,    seed};
}

// Minimum-norm instance: b = A x0 + e for Gaussian x0, reference
// x_hat = A^+ b (the minimum-norm least-squares solution).
inline ProblemInstance make_min_norm_instance(DenseMatrix a, double q, std::uint64_t seed) {
    RandomStream rng(mix_seed(seed, 1));
    std::vector<double> x0(a.cols());
    for (auto& v : x0) v = rng.normal();
    const auto y0 = detail::matrix_times(a, x0);
    double q_eff = q;
    const auto e = detail::noise_or_zero(a, y0, q_eff, mix_seed(seed, 2));
    std::vector<double> b(a.rows());
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = y0[i] + e[i];
    auto x_hat = pseudo_inverse_solution(a, b);
    auto y_hat = detail::matrix_times(a, x_hat);
    return ProblemInstance{std::move(a), std::move(b),       std::move(x_hat), std::move(y_hat),
                           q_eff,        ProblemKind::min_norm_ls, 0.0,        seed};
}

// Fixed 8x8 test image with a small bright glyph; used by the recovery
// demo when no MNIST data is available.
inline std::vector<double> synthetic_test_image() {
    std::vector<double> img(64, 0.0);
    auto px = [&img](std::size_t r, std::size_t c, double v) { img[r * 8 + c] = v; };
    px(1, 3, 0.9);
    px(2, 3, 1.0);
    px(3, 3, 1.0);
    px(4, 3, 1.0);
    px(5, 3, 0.9);
    px(3, 1, 0.8);
    px(3, 2, 1.0);
    px(3, 4, 1.0);
    px(3, 5, 0.8);
    px(6, 6, 0.7);
    px(1, 6, 0.6);
    return img;
}

}  // namespace kbz
