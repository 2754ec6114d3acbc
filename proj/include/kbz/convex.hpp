#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "kbz/dense_matrix.hpp"
#include "kbz/spectral.hpp"

namespace kbz {

enum class ObjectiveKind { quadratic, elastic_net };

// Generating convex function f(x) = lambda*||x||_1 + (1/2)||x||_2^2
// (elastic net) or f(x) = (1/2)||x||_2^2 (quadratic). Both are 1-strongly
// convex; the conjugate gradient is 1-Lipschitz.
struct ObjectiveSpec {
    ObjectiveKind kind = ObjectiveKind::quadratic;
    double lambda = 0.0;
    double mu = 1.0;
    double lipschitz_grad = 1.0;

    static ObjectiveSpec quadratic() { return {}; }

    static ObjectiveSpec elastic_net(double lambda) {
        if (lambda < 0.0) throw std::invalid_argument("ObjectiveSpec: lambda must be >= 0");
        return {ObjectiveKind::elastic_net, lambda, 1.0, 1.0};
    }
};

// Componentwise sign(x)*max(|x| - lambda, 0).
inline void soft_threshold_into(std::span<const double> x, double lambda, std::span<double> out) {
    if (lambda < 0.0) throw std::invalid_argument("soft_threshold: lambda must be >= 0");
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double mag = std::abs(x[j]) - lambda;
        out[j] = mag > 0.0 ? (x[j] > 0.0 ? mag : -mag) : 0.0;
    }
}

inline std::vector<double> soft_threshold(std::span<const double> x, double lambda) {
    std::vector<double> out(x.size());
    soft_threshold_into(x, lambda, out);
    return out;
}

// grad f*: identity for quadratic, soft threshold for the elastic net.
inline void conjugate_gradient_map_into(const ObjectiveSpec& spec, std::span<const double> dual,
                                        std::span<double> out) {
    if (spec.kind == ObjectiveKind::quadratic) {
        for (std::size_t j = 0; j < dual.size(); ++j) out[j] = dual[j];
    } else {
        soft_threshold_into(dual, spec.lambda, out);
    }
}

inline std::vector<double> conjugate_gradient_map(const ObjectiveSpec& spec,
                                                  std::span<const double> dual) {
    std::vector<double> out(dual.size());
    conjugate_gradient_map_into(spec, dual, out);
    return out;
}

inline double objective_value(const ObjectiveSpec& spec, std::span<const double> x) {
    double l1 = 0.0, sq = 0.0;
    for (double v : x) {
        l1 += std::abs(v);
        sq += v * v;
    }
    return (spec.kind == ObjectiveKind::elastic_net ? spec.lambda * l1 : 0.0) + 0.5 * sq;
}

// f*(x*) = (1/2)||x*||^2 for quadratic; (1/2)||S_lambda(x*)||^2 for the
// elastic net (consistent with grad f* = S_lambda).
inline double conjugate_value(const ObjectiveSpec& spec, std::span<const double> dual) {
    if (spec.kind == ObjectiveKind::quadratic) {
        double sq = 0.0;
        for (double v : dual) sq += v * v;
        return 0.5 * sq;
    }
    double sq = 0.0;
    for (double v : dual) {
        const double mag = std::abs(v) - spec.lambda;
        if (mag > 0.0) sq += mag * mag;
    }
    return 0.5 * sq;
}

// Primal/dual pair linked by the conjugate gradient map.
struct BregmanPair {
    std::vector<double> dual;
    std::vector<double> primal;

    static BregmanPair from_dual(const ObjectiveSpec& spec, std::vector<double> d) {
        BregmanPair pair;
        pair.primal = conjugate_gradient_map(spec, d);
        pair.dual = std::move(d);
        return pair;
    }
};

// D_f^{x*}(x, y) = f*(x*) - <x*, y> + f(y), where x = grad f*(x*).
inline double bregman_distance(const ObjectiveSpec& spec, std::span<const double> dual,
                               std::span<const double> primal_of_dual,
                               std::span<const double> target) {
    (void)primal_of_dual;  // caller contract: primal_of_dual = grad f*(dual)
    double inner = 0.0;
    for (std::size_t j = 0; j < dual.size(); ++j) inner += dual[j] * target[j];
    return conjugate_value(spec, dual) - inner + objective_value(spec, target);
}

// Closed form for 1/theta(x_hat) of the elastic net:
//   (1 / sigma_tilde_min^2(A)) * (|x_hat|_min + 2*lambda) / |x_hat|_min,
// where sigma_tilde_min(A) minimizes the smallest nonzero singular value
// over all nonempty column subsets with a nonzero submatrix. Column count
// is capped at 12 (combinatorial enumeration).
inline double theta_closed_form(const DenseMatrix& a, std::span<const double> x_hat,
                                double lambda) {
    if (a.cols() > 12)
        throw std::invalid_argument("theta_closed_form: unsupported scale (> 12 columns)");
    double xmin = std::numeric_limits<double>::infinity();
    for (double v : x_hat) {
        if (v != 0.0) xmin = std::min(xmin, std::abs(v));
    }
    if (!std::isfinite(xmin))
        throw std::invalid_argument("theta_closed_form: x_hat has empty support");

    const std::size_t n = a.cols();
    double sigma_tilde_min = std::numeric_limits<double>::infinity();
    for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
        std::vector<std::size_t> cols;
        for (std::size_t j = 0; j < n; ++j)
            if (mask & (std::size_t{1} << j)) cols.push_back(j);
        Eigen::MatrixXd sub(a.rows(), cols.size());
        for (std::size_t i = 0; i < a.rows(); ++i)
            for (std::size_t k = 0; k < cols.size(); ++k) sub(i, k) = a(i, cols[k]);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(sub);
        const auto& sv = svd.singularValues();
        if (sv(0) == 0.0) continue;  // zero submatrix excluded
        const double cutoff = sigma_zero_rel_cutoff * sv(0);
        for (Eigen::Index k = 0; k < sv.size(); ++k) {
            if (sv(k) > cutoff) sigma_tilde_min = std::min(sigma_tilde_min, sv(k));
        }
    }
    return (1.0 / (sigma_tilde_min * sigma_tilde_min)) * (xmin + 2.0 * lambda) / xmin;
}

}  // namespace kbz
