#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "kbz/problem.hpp"
#include "kbz/solver.hpp"

namespace kbz {

enum class GeneratorKind { gaussian, structured };

// One benchmark suite: a single instance configuration crossed with a
// method list and a seed list.
struct SuiteConfig {
    GeneratorKind generator = GeneratorKind::gaussian;
    std::size_t m = 200;
    std::size_t n = 100;
    std::size_t rank = 0;  // structured generator only
    double kappa = 10.0;   // structured generator only
    ProblemKind kind = ProblemKind::sparse_ls;
    double lambda = 5.0;
    double sparsity_fraction = 0.01;
    double q = 5.0;
    std::vector<Variant> methods;
    std::vector<std::uint64_t> seeds;
    std::size_t tau = 20;
    double delta_z = 1.0;
    double delta_x = 1.0;
    double tol = 1e-5;
    std::size_t max_iters = 1000000;
    std::size_t trace_stride = 10;
    std::string label;  // instance id in report rows; derived when empty
    std::size_t jobs = 1;

    std::string instance_id() const {
        if (!label.empty()) return label;
        std::ostringstream os;
        os << (generator == GeneratorKind::gaussian ? "gaussian" : "structured") << '_' << m
           << 'x' << n;
        if (generator == GeneratorKind::structured) os << "_r" << rank << "_k" << kappa;
        os << (kind == ProblemKind::sparse_ls ? "_sparse" : "_minnorm");
        return os.str();
    }
};

struct BenchmarkRow {
    std::string method;
    std::string instance;
    std::uint64_t seed = 0;
    std::size_t iters = 0;
    double setup_s = 0.0;
    double solve_s = 0.0;
    double final_rel_err = std::numeric_limits<double>::quiet_NaN();
    double final_psnr = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
};

struct BenchmarkReport {
    std::vector<BenchmarkRow> rows;

    void write_csv(std::ostream& out) const {
        out << "method,instance,seed,iters,setup_s,solve_s,final_rel_err,final_psnr\n";
        out.precision(17);
        for (const auto& r : rows) {
            out << r.method << ',' << r.instance << ',' << r.seed << ',' << r.iters << ','
                << r.setup_s << ',' << r.solve_s << ',' << r.final_rel_err << ','
                << r.final_psnr << '\n';
        }
    }

    std::vector<double> column(std::string_view method, std::string_view instance,
                               double BenchmarkRow::* field) const {
        std::vector<double> vals;
        for (const auto& r : rows)
            if (r.method == method && r.instance == instance) vals.push_back(r.*field);
        return vals;
    }

    std::vector<double> iteration_counts(std::string_view method,
                                         std::string_view instance) const {
        std::vector<double> vals;
        for (const auto& r : rows)
            if (r.method == method && r.instance == instance)
                vals.push_back(static_cast<double>(r.iters));
        return vals;
    }
};

// Median across seeds; robust to heavy-tailed randomized-solver outliers.
inline double median(std::vector<double> vals) {
    if (vals.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(vals.begin(), vals.end());
    const std::size_t mid = vals.size() / 2;
    return vals.size() % 2 ? vals[mid] : 0.5 * (vals[mid - 1] + vals[mid]);
}

inline double median_iterations(const BenchmarkReport& report, std::string_view method,
                                std::string_view instance) {
    return median(report.iteration_counts(method, instance));
}

namespace detail {

inline ProblemInstance generate_instance(const SuiteConfig& suite, std::uint64_t seed) {
    DenseMatrix a = suite.generator == GeneratorKind::gaussian
                        ? generate_gaussian(suite.m, suite.n, seed)
                        : generate_structured(suite.m, suite.n, suite.rank, suite.kappa, seed);
    if (suite.kind == ProblemKind::sparse_ls)
        return make_sparse_instance(std::move(a), suite.lambda, suite.sparsity_fraction,
                                    suite.q, seed);
    return make_min_norm_instance(std::move(a), suite.q, seed);
}

inline SolverConfig solver_config_for(const SuiteConfig& suite, Variant method,
                                      std::uint64_t seed) {
    SolverConfig config;
    config.variant = method;
    config.f_spec = suite.kind == ProblemKind::sparse_ls
                        ? ObjectiveSpec::elastic_net(suite.lambda)
                        : ObjectiveSpec::quadratic();
    config.g_spec = ObjectiveSpec::quadratic();
    config.tau = method == Variant::rebk ? 1 : suite.tau;
    config.delta_z = suite.delta_z;
    config.delta_x = suite.delta_x;
    config.max_iters = suite.max_iters;
    config.tol = suite.tol;
    config.trace_stride = suite.trace_stride;
    config.seed = mix_seed(seed, 3);  // shared across methods for paired comparisons
    return config;
}

}  // namespace detail

struct BenchmarkOutput {
    BenchmarkReport report;
    // Trace per run, keyed "<method>_<instance>_<seed>".
    std::vector<std::pair<std::string, ConvergenceTrace>> traces;
};

// Runs every (method, seed) combination of the suite and aggregates the
// rows. Identical configs and seeds reproduce identical numbers except the
// timing columns.
inline BenchmarkOutput run_benchmark(const SuiteConfig& suite) {
    if (suite.methods.empty()) throw std::invalid_argument("run_benchmark: no methods");
    if (suite.seeds.empty()) throw std::invalid_argument("run_benchmark: no seeds");

    std::vector<ProblemInstance> instances;
    instances.reserve(suite.seeds.size());
    for (const auto seed : suite.seeds)
        instances.push_back(detail::generate_instance(suite, seed));

    struct Task {
        std::size_t instance_idx;
        Variant method;
    };
    std::vector<Task> tasks;
    for (std::size_t k = 0; k < instances.size(); ++k)
        for (const auto method : suite.methods) tasks.push_back({k, method});

    const std::string instance_id = suite.instance_id();
    std::vector<BenchmarkRow> rows(tasks.size());
    std::vector<ConvergenceTrace> traces(tasks.size());

    auto execute = [&](std::size_t t) {
        const Task& task = tasks[t];
        const ProblemInstance& problem = instances[task.instance_idx];
        const SolverConfig config =
            detail::solver_config_for(suite, task.method, problem.seed);
        RunResult result = run(config, problem);
        BenchmarkRow row;
        row.method = std::string(to_string(task.method));
        row.instance = instance_id;
        row.seed = problem.seed;
        row.iters = result.iterations;
        row.setup_s = result.setup_seconds;
        row.solve_s = result.solve_seconds;
        row.final_rel_err = result.final_rel_err;
        bool ref_nonzero = false;
        for (double v : problem.x_hat)
            if (v != 0.0) ref_nonzero = true;
        if (ref_nonzero) row.final_psnr = psnr(result.state.x_primal, problem.x_hat);
        row.converged = result.stop_reason == StopReason::converged;
        rows[t] = std::move(row);
        traces[t] = std::move(result.trace);
    };

    if (suite.jobs <= 1) {
        for (std::size_t t = 0; t < tasks.size(); ++t) execute(t);
    } else {
        std::atomic<std::size_t> next{0};
        const std::size_t workers = std::min(suite.jobs, tasks.size());
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&]() {
                for (std::size_t t = next.fetch_add(1); t < tasks.size();
                     t = next.fetch_add(1))
                    execute(t);
            });
        }
        for (auto& th : pool) th.join();
    }

    BenchmarkOutput out;
    out.report.rows = std::move(rows);
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        std::ostringstream key;
        key << to_string(tasks[t].method) << '_' << instance_id << '_'
            << instances[tasks[t].instance_idx].seed;
        out.traces.emplace_back(key.str(), std::move(traces[t]));
    }
    return out;
}

}  // namespace kbz
