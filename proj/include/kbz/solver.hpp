#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kbz/convex.hpp"
#include "kbz/dense_matrix.hpp"
#include "kbz/partition.hpp"
#include "kbz/problem.hpp"
#include "kbz/random.hpp"
#include "kbz/spectral.hpp"

namespace kbz {

enum class Variant { rebk, reabk, crabebk, arabebk, rabebk, exactls_rabebk };
enum class StepKind { unit, constant, adaptive, exact_line_search };
enum class StopReason { converged, max_iters };

inline std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::rebk: return "rebk";
        case Variant::reabk: return "reabk";
        case Variant::crabebk: return "crabebk";
        case Variant::arabebk: return "arabebk";
        case Variant::rabebk: return "rabebk";
        case Variant::exactls_rabebk: return "exactls";
    }
    return "unknown";
}

inline std::optional<Variant> variant_from_string(std::string_view s) {
    if (s == "rebk") return Variant::rebk;
    if (s == "reabk") return Variant::reabk;
    if (s == "crabebk") return Variant::crabebk;
    if (s == "arabebk") return Variant::arabebk;
    if (s == "rabebk") return Variant::rabebk;
    if (s == "exactls" || s == "exactls-rabebk") return Variant::exactls_rabebk;
    return std::nullopt;
}

// Relaxation rule applied to the normalized block-averaged direction.
struct RelaxationStrategy {
    StepKind kind = StepKind::unit;
    double delta = 1.0;     // adaptive scaling (delta_z or delta_x)
    double alpha = 1.0;     // constant relaxation
    double skip_eps = 0.0;  // residual guard; below it the update is skipped
};

struct SolverConfig {
    Variant variant = Variant::arabebk;
    ObjectiveSpec f_spec = ObjectiveSpec::quadratic();
    ObjectiveSpec g_spec = ObjectiveSpec::quadratic();
    std::size_t tau = 1;
    double delta_z = 1.0;
    double delta_x = 1.0;
    std::optional<double> const_alpha_z;  // unset: derived from spectral bounds
    std::optional<double> const_alpha_x;
    std::size_t max_iters = 100000;
    double tol = 1e-5;
    std::size_t trace_stride = 10;
    std::uint64_t seed = 0;
    bool trace_bregman = false;  // requires a reference solution

    void validate() const {
        if (tau < 1) throw std::invalid_argument("SolverConfig: tau must be >= 1");
        if (max_iters < 1) throw std::invalid_argument("SolverConfig: max_iters must be >= 1");
        if (tol < 0.0) throw std::invalid_argument("SolverConfig: tol must be >= 0");
        if (trace_stride < 1)
            throw std::invalid_argument("SolverConfig: trace_stride must be >= 1");
        if (variant == Variant::rebk && tau != 1)
            throw std::invalid_argument("SolverConfig: rebk requires tau = 1");
        if (variant == Variant::reabk && f_spec.kind != ObjectiveKind::quadratic)
            throw std::invalid_argument("SolverConfig: reabk requires a quadratic objective");
        if (variant == Variant::arabebk) {
            if (!(delta_z > 0.0 && delta_z < 2.0 * g_spec.mu))
                throw std::invalid_argument("SolverConfig: require 0 < delta_z < 2*mu_g");
            if (!(delta_x > 0.0 && delta_x < 2.0 * f_spec.mu))
                throw std::invalid_argument("SolverConfig: require 0 < delta_x < 2*mu_f");
        }
        if (variant == Variant::crabebk || variant == Variant::reabk) {
            if (const_alpha_z && *const_alpha_z <= 0.0)
                throw std::invalid_argument("SolverConfig: const_alpha_z must be > 0");
            if (const_alpha_x && *const_alpha_x <= 0.0)
                throw std::invalid_argument("SolverConfig: const_alpha_x must be > 0");
        }
    }

    StepKind step_kind() const {
        switch (variant) {
            case Variant::rebk:
            case Variant::rabebk: return StepKind::unit;
            case Variant::reabk:
            case Variant::crabebk: return StepKind::constant;
            case Variant::arabebk: return StepKind::adaptive;
            case Variant::exactls_rabebk: return StepKind::exact_line_search;
        }
        return StepKind::unit;
    }
};

// Live iterates. x_primal = grad f*(x_dual) and z_primal = grad g*(z_dual)
// hold after every completed update.
struct SolverState {
    std::vector<double> x_dual;
    std::vector<double> x_primal;
    std::vector<double> z_dual;
    std::vector<double> z_primal;
    std::size_t iter = 0;
};

inline SolverState init_state(const ObjectiveSpec& f, const ObjectiveSpec& g,
                              const DenseMatrix& a, std::span<const double> b) {
    SolverState s;
    s.x_dual.assign(a.cols(), 0.0);
    s.x_primal = conjugate_gradient_map(f, s.x_dual);
    s.z_dual.assign(b.begin(), b.end());
    s.z_primal = conjugate_gradient_map(g, s.z_dual);
    return s;
}

struct TraceRecord {
    std::size_t iter = 0;
    double rel_err = std::numeric_limits<double>::quiet_NaN();
    double bregman_x = std::numeric_limits<double>::quiet_NaN();
    double dual_residual = std::numeric_limits<double>::quiet_NaN();
    double step_z = 0.0;
    double step_x = 0.0;
    double elapsed_s = 0.0;
};

struct ConvergenceTrace {
    std::vector<TraceRecord> records;

    void write_csv(std::ostream& out) const {
        out << "iter,rel_err,bregman_x,dual_residual,step_z,step_x,elapsed_s\n";
        out.precision(17);
        for (const auto& r : records) {
            out << r.iter << ',' << r.rel_err << ',' << r.bregman_x << ',' << r.dual_residual
                << ',' << r.step_z << ',' << r.step_x << ',' << r.elapsed_s << '\n';
        }
    }
};

namespace detail {

inline double norm_sq(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

}  // namespace detail

// Adaptive relaxation for the auxiliary update:
//   delta_z * ||A(:,J)||_F^2 * ||r||^2 / ||A(:,J) r||^2,  r = (A(:,J))^T z.
inline double adaptive_step_z(const DenseMatrix& a, IndexRange block, std::span<const double> r_z,
                              double delta_z) {
    const auto w = col_block_times(a, block, r_z);
    const double denom = detail::norm_sq(w);
    if (denom <= 0.0) return 0.0;  // skip signal; impossible for r in range((A(:,J))^T)
    return delta_z * block_frob_sq(a, block, Axis::columns) * detail::norm_sq(r_z) / denom;
}

// Exact line search for the auxiliary quadratic residual model:
//   ||A(:,J) r||^2 * ||A(:,J)||_F^2 / ||(A(:,J))^T A(:,J) r||^2.
inline double exact_line_search_z(const DenseMatrix& a, IndexRange block,
                                  std::span<const double> r_z) {
    const auto w = col_block_times(a, block, r_z);
    const auto u = col_block_transpose_times(a, block, w);
    const double denom = detail::norm_sq(u);
    if (denom <= 0.0) return 0.0;  // skip signal
    return detail::norm_sq(w) * block_frob_sq(a, block, Axis::columns) / denom;
}

// Mirror rules on row blocks, with r = b_I - A(I,:) x - z*_I.
inline double adaptive_step_x(const DenseMatrix& a, IndexRange block, std::span<const double> r_x,
                              double delta_x) {
    const auto g = row_block_transpose_times(a, block, r_x);
    const double denom = detail::norm_sq(g);
    if (denom <= 0.0) return 0.0;
    return delta_x * block_frob_sq(a, block, Axis::rows) * detail::norm_sq(r_x) / denom;
}

inline double exact_line_search_x(const DenseMatrix& a, IndexRange block,
                                  std::span<const double> r_x) {
    const auto g = row_block_transpose_times(a, block, r_x);
    const auto w = row_block_times(a, block, g);
    const double denom = detail::norm_sq(w);
    if (denom <= 0.0) return 0.0;
    return detail::norm_sq(g) * block_frob_sq(a, block, Axis::rows) / denom;
}

// Default constant relaxation parameters. Experiment mode uses
// alpha = 1 / max(beta_max_rows, beta_max_cols) on both updates; theory
// mode uses (mu_g / beta_max_cols, mu_f / beta_max_rows).
inline std::pair<double, double> constant_alpha_defaults(const BlockSpectralBounds& bounds,
                                                         const ObjectiveSpec& f_spec,
                                                         const ObjectiveSpec& g_spec,
                                                         bool theory_mode = false) {
    if (theory_mode)
        return {g_spec.mu / bounds.beta_max_cols, f_spec.mu / bounds.beta_max_rows};
    const double alpha = 1.0 / std::max(bounds.beta_max_rows, bounds.beta_max_cols);
    return {alpha, alpha};
}

// One auxiliary update on an explicitly chosen column block:
//   z* <- z* - alpha * (1 / ||A(:,J)||_F^2) * A(:,J) (A(:,J))^T z,
//   z  <- grad g*(z*).
// Returns the relaxation parameter used (0 when skipped).
inline double apply_z_update(SolverState& s, const DenseMatrix& a, IndexRange block,
                             const ObjectiveSpec& g_spec, const RelaxationStrategy& strat) {
    const auto r = col_block_transpose_times(a, block, s.z_primal);
    if (std::sqrt(detail::norm_sq(r)) <= strat.skip_eps) return 0.0;
    const auto w = col_block_times(a, block, r);
    const double wnorm_sq = detail::norm_sq(w);
    if (wnorm_sq <= 0.0) return 0.0;
    const double bf2 = block_frob_sq(a, block, Axis::columns);

    double alpha = 1.0;
    switch (strat.kind) {
        case StepKind::unit: break;
        case StepKind::constant: alpha = strat.alpha; break;
        case StepKind::adaptive: alpha = strat.delta * bf2 * detail::norm_sq(r) / wnorm_sq; break;
        case StepKind::exact_line_search: {
            const auto u = col_block_transpose_times(a, block, w);
            const double unorm_sq = detail::norm_sq(u);
            if (unorm_sq <= 0.0) return 0.0;
            alpha = wnorm_sq * bf2 / unorm_sq;
            break;
        }
    }
    const double scale = alpha / bf2;
    for (std::size_t i = 0; i < s.z_dual.size(); ++i) s.z_dual[i] -= scale * w[i];
    conjugate_gradient_map_into(g_spec, s.z_dual, s.z_primal);
    return alpha;
}

// One primary update on an explicitly chosen row block:
//   x* <- x* + alpha * (1 / ||A(I,:)||_F^2) * (A(I,:))^T (b_I - A(I,:) x - z*_I),
//   x  <- grad f*(x*).
inline double apply_x_update(SolverState& s, const DenseMatrix& a, IndexRange block,
                             std::span<const double> b, const ObjectiveSpec& f_spec,
                             const RelaxationStrategy& strat) {
    std::vector<double> r(block.size());
    {
        const auto ax = row_block_times(a, block, s.x_primal);
        for (std::size_t t = 0; t < r.size(); ++t) {
            const std::size_t i = block.begin + t;
            r[t] = b[i] - ax[t] - s.z_dual[i];
        }
    }
    if (std::sqrt(detail::norm_sq(r)) <= strat.skip_eps) return 0.0;
    const auto g = row_block_transpose_times(a, block, r);
    const double gnorm_sq = detail::norm_sq(g);
    if (gnorm_sq <= 0.0) return 0.0;
    const double bf2 = block_frob_sq(a, block, Axis::rows);

    double alpha = 1.0;
    switch (strat.kind) {
        case StepKind::unit: break;
        case StepKind::constant: alpha = strat.alpha; break;
        case StepKind::adaptive: alpha = strat.delta * bf2 * detail::norm_sq(r) / gnorm_sq; break;
        case StepKind::exact_line_search: {
            const auto w = row_block_times(a, block, g);
            const double wnorm_sq = detail::norm_sq(w);
            if (wnorm_sq <= 0.0) return 0.0;
            alpha = gnorm_sq * bf2 / wnorm_sq;
            break;
        }
    }
    const double scale = alpha / bf2;
    for (std::size_t j = 0; j < s.x_dual.size(); ++j) s.x_dual[j] += scale * g[j];
    conjugate_gradient_map_into(f_spec, s.x_dual, s.x_primal);
    return alpha;
}

// Samples a column block by Frobenius weight, then applies the z-update.
inline double z_update(SolverState& s, const DenseMatrix& a, const Partition& col_partition,
                       const ObjectiveSpec& g_spec, const RelaxationStrategy& strat,
                       RandomStream& rng) {
    const std::size_t j = sample_block(col_partition, rng);
    return apply_z_update(s, a, col_partition.block(j), g_spec, strat);
}

// Samples a row block by Frobenius weight, then applies the x-update.
inline double x_update(SolverState& s, const DenseMatrix& a, const Partition& row_partition,
                       std::span<const double> b, const ObjectiveSpec& f_spec,
                       const RelaxationStrategy& strat, RandomStream& rng) {
    const std::size_t i = sample_block(row_partition, rng);
    return apply_x_update(s, a, row_partition.block(i), b, f_spec, strat);
}

struct RunResult {
    SolverState state;
    ConvergenceTrace trace;
    StopReason stop_reason = StopReason::max_iters;
    std::size_t iterations = 0;
    double setup_seconds = 0.0;
    double solve_seconds = 0.0;
    double final_rel_err = std::numeric_limits<double>::quiet_NaN();
};

// Runs the configured variant on a problem instance: one z-update then one
// x-update per iteration, stopping on relative error against the reference
// solution (when present) or on the iteration cap. Fully deterministic for
// a given config and seed, timing aside.
inline RunResult run(const SolverConfig& config, const ProblemInstance& problem) {
    config.validate();
    const DenseMatrix& a = problem.matrix;
    if (problem.b.size() != a.rows())
        throw std::invalid_argument("run: right-hand side length mismatch");
    if (!problem.x_hat.empty() && problem.x_hat.size() != a.cols())
        throw std::invalid_argument("run: reference solution length mismatch");
    if (config.tau > a.rows() || config.tau > a.cols())
        throw std::invalid_argument("run: tau exceeds a matrix dimension");

    using clock = std::chrono::steady_clock;
    const auto setup_start = clock::now();

    const Partition row_partition = partition_uniform(a, config.tau, Axis::rows);
    const Partition col_partition = partition_uniform(a, config.tau, Axis::columns);

    RelaxationStrategy strat_z{config.step_kind(), config.delta_z, 1.0, 0.0};
    RelaxationStrategy strat_x{config.step_kind(), config.delta_x, 1.0, 0.0};
    if (config.step_kind() == StepKind::constant) {
        if (config.const_alpha_z && config.const_alpha_x) {
            strat_z.alpha = *config.const_alpha_z;
            strat_x.alpha = *config.const_alpha_x;
        } else {
            const auto bounds = compute_spectral_bounds(a, row_partition, col_partition);
            const auto [az, ax] =
                constant_alpha_defaults(bounds, config.f_spec, config.g_spec);
            strat_z.alpha = config.const_alpha_z.value_or(az);
            strat_x.alpha = config.const_alpha_x.value_or(ax);
        }
    }
    const double b_norm = std::sqrt(detail::norm_sq(problem.b));
    strat_z.skip_eps = strat_x.skip_eps = 1e-14 * b_norm;

    RunResult result;
    result.setup_seconds = std::chrono::duration<double>(clock::now() - setup_start).count();

    RandomStream rng(config.seed);
    SolverState s = init_state(config.f_spec, config.g_spec, a, problem.b);

    const bool have_reference = !problem.x_hat.empty();
    const bool tol_stopping = have_reference && config.tol > 0.0;
    const double x_hat_norm =
        have_reference ? std::sqrt(detail::norm_sq(problem.x_hat)) : 0.0;

    auto current_rel_err = [&]() {
        if (!have_reference) return std::numeric_limits<double>::quiet_NaN();
        double diff_sq = 0.0;
        for (std::size_t j = 0; j < s.x_primal.size(); ++j) {
            const double d = s.x_primal[j] - problem.x_hat[j];
            diff_sq += d * d;
        }
        const double diff = std::sqrt(diff_sq);
        return x_hat_norm > 0.0 ? diff / x_hat_norm : diff;
    };

    const auto solve_start = clock::now();
    // trace-record computation is timed separately so that tracing does not
    // pollute the reported per-iteration CPU time
    double trace_overhead = 0.0;
    auto elapsed = [&]() {
        return std::chrono::duration<double>(clock::now() - solve_start).count() -
               trace_overhead;
    };

    auto record = [&](double rel_err, double step_z, double step_x) {
        const auto trace_start = clock::now();
        TraceRecord rec;
        rec.iter = s.iter;
        rec.rel_err = rel_err;
        if (config.trace_bregman && have_reference)
            rec.bregman_x = bregman_distance(config.f_spec, s.x_dual, s.x_primal, problem.x_hat);
        const auto atz = col_block_transpose_times(a, {0, a.cols()}, s.z_primal);
        rec.dual_residual = std::sqrt(detail::norm_sq(atz));
        rec.step_z = step_z;
        rec.step_x = step_x;
        rec.elapsed_s = elapsed();
        result.trace.records.push_back(rec);
        trace_overhead += std::chrono::duration<double>(clock::now() - trace_start).count();
    };

    double rel_err = current_rel_err();
    result.stop_reason = StopReason::max_iters;
    double step_z = 0.0, step_x = 0.0;
    while (s.iter < config.max_iters) {
        step_z = z_update(s, a, col_partition, config.g_spec, strat_z, rng);
        step_x = x_update(s, a, row_partition, problem.b, config.f_spec, strat_x, rng);
        ++s.iter;
        rel_err = current_rel_err();
        if (s.iter % config.trace_stride == 0) record(rel_err, step_z, step_x);
        if (tol_stopping && rel_err <= config.tol) {
            result.stop_reason = StopReason::converged;
            break;
        }
    }
    result.solve_seconds = elapsed();
    if (result.trace.records.empty() || result.trace.records.back().iter != s.iter)
        record(rel_err, step_z, step_x);
    result.iterations = s.iter;
    result.final_rel_err = rel_err;
    result.state = std::move(s);
    return result;
}

}  // namespace kbz
