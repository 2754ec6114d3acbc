#pragma once

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <ostream>
#include <string>
#include <vector>

#include "kbz/benchmark.hpp"
#include "kbz/mnist.hpp"
#include "kbz/pgm.hpp"
#include "kbz/problem.hpp"
#include "kbz/solver.hpp"

namespace kbz::cli {

namespace detail {

inline std::filesystem::path default_out_dir() {
    if (const char* env = std::getenv("KBZ_OUT")) return env;
    return "kbz-out";
}

inline std::vector<double> load_vector(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<double> v;
    double x;
    while (in >> x) v.push_back(x);
    if (v.empty()) throw std::runtime_error("no values in " + path.string());
    return v;
}

struct ProblemOpts {
    std::string gen = "gaussian";
    std::size_t m = 200;
    std::size_t n = 100;
    std::size_t rank = 0;
    double kappa = 10.0;
    std::string kind = "sparse";
    double lambda = 5.0;
    double sparsity = 0.01;
    double q = 5.0;
    std::string matrix_file;
    std::string rhs_file;
};

inline void add_problem_options(CLI::App* cmd, ProblemOpts& opts) {
    cmd->add_option("--gen", opts.gen, "matrix source")
        ->check(CLI::IsMember({"gaussian", "structured", "file"}))
        ->capture_default_str();
    cmd->add_option("--m", opts.m, "number of rows")->capture_default_str();
    cmd->add_option("--n", opts.n, "number of columns")->capture_default_str();
    cmd->add_option("--rank", opts.rank, "target rank (structured generator)");
    cmd->add_option("--kappa", opts.kappa, "condition number bound (structured generator)")
        ->capture_default_str();
    cmd->add_option("--kind", opts.kind, "problem kind")
        ->check(CLI::IsMember({"sparse", "minnorm"}))
        ->capture_default_str();
    cmd->add_option("--lambda", opts.lambda, "l1 regularization weight (sparse kind)")
        ->capture_default_str();
    cmd->add_option("--sparsity", opts.sparsity, "planted sparsity fraction (sparse kind)")
        ->capture_default_str();
    cmd->add_option("--q", opts.q, "relative null-space noise level")->capture_default_str();
    cmd->add_option("--matrix", opts.matrix_file, "matrix file (--gen file)");
    cmd->add_option("--rhs", opts.rhs_file, "right-hand side file (--gen file)");
}

struct SolverOpts {
    std::size_t tau = 20;
    double delta_z = 1.0;
    double delta_x = 1.0;
    double tol = 1e-5;
    std::size_t max_iters = 1000000;
    std::size_t trace_stride = 10;
};

inline void add_solver_options(CLI::App* cmd, SolverOpts& opts) {
    cmd->add_option("--tau", opts.tau, "block size")->capture_default_str();
    cmd->add_option("--delta-z", opts.delta_z, "adaptive scaling for the z-update")
        ->capture_default_str();
    cmd->add_option("--delta-x", opts.delta_x, "adaptive scaling for the x-update")
        ->capture_default_str();
    cmd->add_option("--tol", opts.tol, "relative-error stopping threshold")
        ->capture_default_str();
    cmd->add_option("--max-iters", opts.max_iters, "iteration cap")->capture_default_str();
    cmd->add_option("--trace-stride", opts.trace_stride, "iterations between trace records")
        ->capture_default_str();
}

inline DenseMatrix make_matrix(const ProblemOpts& opts, std::uint64_t seed) {
    if (opts.gen == "gaussian") return generate_gaussian(opts.m, opts.n, seed);
    if (opts.gen == "structured") {
        if (opts.rank == 0)
            throw std::invalid_argument("--gen structured requires --rank");
        return generate_structured(opts.m, opts.n, opts.rank, opts.kappa, seed);
    }
    if (opts.matrix_file.empty())
        throw std::invalid_argument("--gen file requires --matrix");
    return load_matrix(opts.matrix_file);
}

inline ProblemInstance make_problem(const ProblemOpts& opts, std::uint64_t seed) {
    DenseMatrix a = make_matrix(opts, seed);
    if (opts.gen == "file") {
        if (opts.rhs_file.empty()) throw std::invalid_argument("--gen file requires --rhs");
        auto b = load_vector(opts.rhs_file);
        if (b.size() != a.rows())
            throw std::invalid_argument("right-hand side length does not match matrix rows");
        std::vector<double> x_hat;
        if (opts.kind == "minnorm") x_hat = pseudo_inverse_solution(a, b);
        const auto kind =
            opts.kind == "sparse" ? ProblemKind::sparse_ls : ProblemKind::min_norm_ls;
        std::vector<double> y_hat =
            x_hat.empty() ? std::vector<double>() : kbz::detail::matrix_times(a, x_hat);
        return ProblemInstance{std::move(a), std::move(b), std::move(x_hat),
                               std::move(y_hat), 0.0, kind, opts.lambda, seed};
    }
    if (opts.kind == "sparse")
        return make_sparse_instance(std::move(a), opts.lambda, opts.sparsity, opts.q, seed);
    return make_min_norm_instance(std::move(a), opts.q, seed);
}

inline SolverConfig make_solver_config(Variant method, const ProblemOpts& popts,
                                       const SolverOpts& sopts, std::uint64_t seed) {
    SolverConfig config;
    config.variant = method;
    config.f_spec = popts.kind == "sparse" ? ObjectiveSpec::elastic_net(popts.lambda)
                                           : ObjectiveSpec::quadratic();
    config.g_spec = ObjectiveSpec::quadratic();
    config.tau = method == Variant::rebk ? 1 : sopts.tau;
    config.delta_z = sopts.delta_z;
    config.delta_x = sopts.delta_x;
    config.tol = sopts.tol;
    config.max_iters = sopts.max_iters;
    config.trace_stride = sopts.trace_stride;
    config.seed = mix_seed(seed, 3);
    return config;
}

// Expands "--config FILE" into ordinary flags from a flat key=value file.
// Keys already present on the command line keep their command-line values.
inline std::vector<std::string> expand_config_args(std::vector<std::string> args) {
    std::string config_path;
    std::vector<std::string> out;
    for (std::size_t k = 0; k < args.size(); ++k) {
        if (args[k] == "--config") {
            if (k + 1 >= args.size())
                throw std::invalid_argument("--config requires a file path");
            config_path = args[++k];
        } else if (args[k].rfind("--config=", 0) == 0) {
            config_path = args[k].substr(9);
        } else {
            out.push_back(args[k]);
        }
    }
    if (config_path.empty()) return out;

    std::set<std::string> given;
    for (const auto& a : out) {
        if (a.rfind("--", 0) != 0) continue;
        const auto eq = a.find('=');
        given.insert(eq == std::string::npos ? a : a.substr(0, eq));
    }

    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("cannot open config file " + config_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto eq = line.find('=', first);
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        " is not key=value: " + line);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = "--" + trim(line.substr(first, eq - first));
        const std::string value = trim(line.substr(eq + 1));
        if (given.count(key)) continue;
        out.push_back(key);
        out.push_back(value);
    }
    return out;
}

inline std::vector<Variant> parse_methods(const std::vector<std::string>& names) {
    std::vector<Variant> methods;
    for (const auto& name : names) {
        const auto v = variant_from_string(name);
        if (!v)
            throw std::invalid_argument(
                "unknown method '" + name +
                "' (valid: rebk, reabk, crabebk, arabebk, rabebk, exactls)");
        methods.push_back(*v);
    }
    return methods;
}

}  // namespace detail

inline int cmd_solve(const detail::ProblemOpts& popts, const detail::SolverOpts& sopts,
                     const std::string& method_name, std::uint64_t seed,
                     const std::filesystem::path& out_dir, std::ostream& out) {
    const auto methods = detail::parse_methods({method_name});
    const SolverConfig config = detail::make_solver_config(methods[0], popts, sopts, seed);
    config.validate();  // reject bad flags before generating anything

    const ProblemInstance problem = detail::make_problem(popts, seed);
    const RunResult result = run(config, problem);

    std::filesystem::create_directories(out_dir);
    const auto trace_path =
        out_dir / ("trace_" + std::string(to_string(methods[0])) + "_seed" +
                   std::to_string(seed) + ".csv");
    std::ofstream trace_out(trace_path);
    result.trace.write_csv(trace_out);

    out << "method=" << to_string(methods[0]) << " iters=" << result.iterations
        << " rel_err=" << result.final_rel_err << " setup_s=" << result.setup_seconds
        << " solve_s=" << result.solve_seconds << '\n';
    out << "trace=" << trace_path.string() << '\n';
    return result.stop_reason == StopReason::converged ? 0 : 2;
}

inline int cmd_bench(const detail::ProblemOpts& popts, const detail::SolverOpts& sopts,
                     const std::vector<std::string>& method_names,
                     const std::vector<std::uint64_t>& seeds, std::size_t jobs,
                     const std::filesystem::path& out_dir, std::ostream& out) {
    SuiteConfig suite;
    suite.generator = popts.gen == "structured" ? GeneratorKind::structured
                                                : GeneratorKind::gaussian;
    if (popts.gen == "file")
        throw std::invalid_argument("bench requires a generator (--gen gaussian|structured)");
    suite.m = popts.m;
    suite.n = popts.n;
    suite.rank = popts.rank;
    suite.kappa = popts.kappa;
    suite.kind = popts.kind == "sparse" ? ProblemKind::sparse_ls : ProblemKind::min_norm_ls;
    suite.lambda = popts.lambda;
    suite.sparsity_fraction = popts.sparsity;
    suite.q = popts.q;
    suite.methods = detail::parse_methods(method_names);
    suite.seeds = seeds;
    suite.tau = sopts.tau;
    suite.delta_z = sopts.delta_z;
    suite.delta_x = sopts.delta_x;
    suite.tol = sopts.tol;
    suite.max_iters = sopts.max_iters;
    suite.trace_stride = sopts.trace_stride;
    suite.jobs = jobs;
    if (suite.generator == GeneratorKind::structured && suite.rank == 0)
        throw std::invalid_argument("--gen structured requires --rank");
    for (const auto method : suite.methods)  // validate before any matrix exists
        detail::make_solver_config(method, popts, sopts, seeds.empty() ? 0 : seeds[0])
            .validate();

    const BenchmarkOutput result = run_benchmark(suite);

    std::filesystem::create_directories(out_dir);
    const auto report_path = out_dir / "report.csv";
    {
        std::ofstream report_out(report_path);
        result.report.write_csv(report_out);
    }
    for (const auto& [key, trace] : result.traces) {
        std::ofstream trace_out(out_dir / ("trace_" + key + ".csv"));
        trace.write_csv(trace_out);
    }

    const std::string instance = suite.instance_id();
    out << instance << "  (median over " << seeds.size() << " seeds, tol=" << sopts.tol
        << ")\n";
    out << std::left << std::setw(10) << "method" << std::right << std::setw(12) << "IT"
        << std::setw(12) << "CPU" << '\n';
    for (const auto method : suite.methods) {
        const auto name = std::string(to_string(method));
        out << std::left << std::setw(10) << name << std::right << std::setw(12)
            << median_iterations(result.report, name, instance) << std::setw(12)
            << median(result.report.column(name, instance, &BenchmarkRow::solve_s)) << '\n';
    }
    out << "report=" << report_path.string() << '\n';
    return 0;
}

inline int cmd_recover(const std::string& idx_file, std::size_t image_index, bool synthetic,
                       const detail::ProblemOpts& popts_in, const detail::SolverOpts& sopts,
                       const std::vector<std::string>& method_names, std::size_t iters,
                       std::uint64_t seed, const std::filesystem::path& out_dir,
                       std::ostream& out) {
    const auto methods = detail::parse_methods(method_names);
    detail::SolverOpts fixed = sopts;
    fixed.max_iters = iters;
    fixed.tol = 0.0;  // fixed iteration budget, as in the figure protocol
    for (const auto method : methods)  // reject bad flags before any work
        detail::make_solver_config(method, popts_in, fixed, seed).validate();

    std::vector<double> image;
    std::size_t side = 0;
    if (synthetic) {
        image = synthetic_test_image();
        side = 8;
    } else {
        if (idx_file.empty())
            throw std::invalid_argument("recover requires --idx FILE or --synthetic");
        image = load_mnist_image(idx_file, image_index);
        side = static_cast<std::size_t>(std::lround(std::sqrt(double(image.size()))));
    }

    detail::ProblemOpts popts = popts_in;
    popts.n = image.size();
    DenseMatrix a = generate_gaussian(popts.m, popts.n, mix_seed(seed, 7));
    auto y_hat = kbz::detail::matrix_times(a, image);
    double q_eff = popts.q;
    const auto e = kbz::detail::noise_or_zero(a, y_hat, q_eff, mix_seed(seed, 8));
    std::vector<double> b(a.rows());
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = y_hat[i] + e[i];
    const auto kind =
        popts.kind == "sparse" ? ProblemKind::sparse_ls : ProblemKind::min_norm_ls;
    const ProblemInstance problem{std::move(a),     std::move(b), image, std::move(y_hat),
                                  q_eff,            kind,         popts.lambda, seed};

    std::filesystem::create_directories(out_dir);
    write_pgm(out_dir / "original.pgm", image, side, side);

    for (const auto method : methods) {
        const SolverConfig config = detail::make_solver_config(method, popts, fixed, seed);
        const RunResult result = run(config, problem);
        const auto name = std::string(to_string(method));
        write_pgm(out_dir / ("recovered_" + name + ".pgm"), result.state.x_primal, side,
                  side);
        out << name << " psnr=" << psnr(result.state.x_primal, image)
            << " iters=" << result.iterations << '\n';
    }
    return 0;
}

inline int cmd_inspect(const detail::ProblemOpts& popts, std::size_t tau, std::uint64_t seed,
                       std::ostream& out) {
    const DenseMatrix a = detail::make_matrix(popts, seed);
    out << "rows=" << a.rows() << " cols=" << a.cols() << '\n';
    out << "frob_norm=" << std::sqrt(a.frobenius_sq()) << '\n';

    const Eigen::MatrixXd m = kbz::detail::to_eigen(a);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    const double cutoff = sv(0) > 0.0 ? sigma_zero_rel_cutoff * sv(0) : 0.0;
    std::size_t rank = 0;
    double sigma_min_nonzero = 0.0;
    for (Eigen::Index k = 0; k < sv.size(); ++k) {
        if (sv(k) > cutoff) {
            ++rank;
            sigma_min_nonzero = sv(k);
        }
    }
    out << "rank=" << rank << " sigma_max=" << sv(0) << " sigma_min=" << sigma_min_nonzero
        << " cond=" << (sigma_min_nonzero > 0.0 ? sv(0) / sigma_min_nonzero : 0.0) << '\n';

    const std::size_t tau_eff = std::min({tau, a.rows(), a.cols()});
    const auto rows = partition_uniform(a, tau_eff, Axis::rows);
    const auto cols = partition_uniform(a, tau_eff, Axis::columns);
    const auto bounds = compute_spectral_bounds(a, rows, cols);
    out << "tau=" << tau_eff << " row_blocks=" << rows.size() << " col_blocks=" << cols.size()
        << '\n';
    out << "beta_max_rows=" << bounds.beta_max_rows << " beta_max_cols=" << bounds.beta_max_cols
        << " beta_min_rows=" << bounds.beta_min_rows << '\n';
    const auto [alpha_z, alpha_x] = constant_alpha_defaults(
        bounds, ObjectiveSpec::quadratic(), ObjectiveSpec::quadratic());
    out << "const_alpha=" << alpha_z << '\n';
    (void)alpha_x;
    return 0;
}

// Parses and dispatches one CLI invocation. Returns the process exit code:
// 0 success, 1 usage or input error, 2 solve stopped at the iteration cap.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out,
                   std::ostream& err) {
    CLI::App app{"Kaczmarz-Bregman solvers for sparse and minimum-norm least squares"};
    app.require_subcommand(1);

    std::string out_dir_flag;
    auto add_out_option = [&out_dir_flag](CLI::App* cmd) {
        cmd->add_option("--out", out_dir_flag,
                        "output directory (default: $KBZ_OUT or kbz-out)");
    };

    detail::ProblemOpts popts;
    detail::SolverOpts sopts;

    // solve
    auto* solve = app.add_subcommand("solve", "run one method on one problem");
    add_out_option(solve);
    detail::add_problem_options(solve, popts);
    detail::add_solver_options(solve, sopts);
    std::string method = "arabebk";
    std::uint64_t seed = 1;
    solve->add_option("--method", method, "solver variant")->required();
    solve->add_option("--seed", seed, "random seed")->capture_default_str();

    // bench
    auto* bench = app.add_subcommand("bench", "run a benchmark suite");
    add_out_option(bench);
    detail::ProblemOpts bench_popts;
    detail::SolverOpts bench_sopts;
    detail::add_problem_options(bench, bench_popts);
    detail::add_solver_options(bench, bench_sopts);
    std::vector<std::string> bench_methods;
    std::vector<std::uint64_t> bench_seeds;
    std::size_t jobs = 1;
    bench->add_option("--methods", bench_methods, "comma-separated method list")
        ->delimiter(',');
    bench->add_option("--seeds", bench_seeds, "comma-separated seed list")->delimiter(',');
    bench->add_option("--jobs", jobs, "parallel runs")->capture_default_str();
    std::string config_help_only;  // handled by expand_config_args before parsing
    bench->add_option("--config", config_help_only, "flat key=value suite file");

    // recover
    auto* recover = app.add_subcommand("recover", "image recovery demo");
    add_out_option(recover);
    detail::ProblemOpts rec_popts;
    rec_popts.m = 0;  // resolved after --kind is known
    detail::SolverOpts rec_sopts;
    detail::add_problem_options(recover, rec_popts);
    detail::add_solver_options(recover, rec_sopts);
    std::string idx_file;
    std::size_t image_index = 0;
    bool synthetic = false;
    std::vector<std::string> rec_methods;
    std::size_t rec_iters = 0;
    std::uint64_t rec_seed = 1;
    recover->add_option("--idx", idx_file, "MNIST IDX3-ubyte image file");
    recover->add_option("--index", image_index, "image index in the IDX file")
        ->capture_default_str();
    recover->add_flag("--synthetic", synthetic, "use the built-in 8x8 test image");
    recover->add_option("--methods", rec_methods, "comma-separated method list")
        ->delimiter(',');
    recover->add_option("--iters", rec_iters, "fixed iteration budget per method");
    recover->add_option("--seed", rec_seed, "random seed")->capture_default_str();

    // inspect
    auto* inspect = app.add_subcommand("inspect", "print matrix and partition statistics");
    detail::ProblemOpts ins_popts;
    detail::add_problem_options(inspect, ins_popts);
    std::size_t ins_tau = 20;
    std::uint64_t ins_seed = 1;
    inspect->add_option("--tau", ins_tau, "block size for the beta report")
        ->capture_default_str();
    inspect->add_option("--seed", ins_seed, "random seed")->capture_default_str();

    std::vector<std::string> expanded;
    try {
        expanded = detail::expand_config_args(args);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    std::vector<const char*> argv;
    argv.reserve(expanded.size() + 1);
    argv.push_back("kbz");
    for (const auto& a : expanded) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 1;
    }

    const std::filesystem::path out_dir =
        out_dir_flag.empty() ? detail::default_out_dir() : std::filesystem::path(out_dir_flag);

    try {
        if (solve->parsed()) {
            if (sopts.tau < 1) throw std::invalid_argument("--tau must be >= 1");
            return cmd_solve(popts, sopts, method, seed, out_dir, out);
        }
        if (bench->parsed()) {
            if (bench_methods.empty()) {
                bench_methods = bench_popts.kind == "sparse"
                                    ? std::vector<std::string>{"rebk", "crabebk", "arabebk"}
                                    : std::vector<std::string>{"reabk", "arabebk"};
            }
            if (bench_seeds.empty())
                for (std::uint64_t s = 1; s <= 10; ++s) bench_seeds.push_back(s);
            return cmd_bench(bench_popts, bench_sopts, bench_methods, bench_seeds, jobs,
                             out_dir, out);
        }
        if (recover->parsed()) {
            if (rec_methods.empty()) {
                rec_methods = rec_popts.kind == "sparse"
                                  ? std::vector<std::string>{"rebk", "crabebk", "arabebk"}
                                  : std::vector<std::string>{"reabk", "arabebk"};
            }
            if (rec_popts.m == 0) {
                if (synthetic)
                    rec_popts.m = rec_popts.kind == "sparse" ? 48 : 128;
                else
                    rec_popts.m = rec_popts.kind == "sparse" ? 500 : 2000;
            }
            if (rec_iters == 0) rec_iters = rec_popts.kind == "sparse" ? 10000 : 1000;
            return cmd_recover(idx_file, image_index, synthetic, rec_popts, rec_sopts,
                               rec_methods, rec_iters, rec_seed, out_dir, out);
        }
        if (inspect->parsed()) return cmd_inspect(ins_popts, ins_tau, ins_seed, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    err << "error: no subcommand\n";
    return 1;
}

}  // namespace kbz::cli
