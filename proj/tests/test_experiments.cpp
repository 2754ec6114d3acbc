#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <set>
#include <sstream>

#include "kbz/benchmark.hpp"
#include "kbz/problem.hpp"
#include "oracles.hpp"

using namespace kbz;

TEST(GenerateGaussian, MomentsAndDeterminism) {
    const auto a = generate_gaussian(200, 200, 7);
    double sum = 0.0, sum_sq = 0.0;
    for (double v : a.values()) {
        sum += v;
        sum_sq += v * v;
    }
    const double count = 200.0 * 200.0;
    const double mean = sum / count;
    const double var = sum_sq / count - mean * mean;
    EXPECT_GE(mean, -0.02);
    EXPECT_LE(mean, 0.02);
    EXPECT_GE(var, 0.95);
    EXPECT_LE(var, 1.05);

    const auto b = generate_gaussian(200, 200, 7);
    EXPECT_EQ(a.values(), b.values());
    const auto c = generate_gaussian(200, 200, 8);
    EXPECT_NE(a.values(), c.values());
}

TEST(GenerateStructured, RankConditionAndSpectrum) {
    const auto a = generate_structured(30, 20, 15, 10.0, 11);
    const auto sv = oracle::singular_values_jacobi(oracle::block_rows(a, {0, 30}));
    std::size_t rank = 0;
    for (double s : sv)
        if (s > 1e-10 * sv[0]) ++rank;
    EXPECT_EQ(rank, 15u);
    EXPECT_LE(sv[0] / sv[14], 10.0 + 1e-8);
    for (std::size_t k = 0; k < 15; ++k) {
        EXPECT_GT(sv[k], 1.0 - 1e-8);
        EXPECT_LT(sv[k], 10.0 + 1e-8);
    }
    // the kept singular values are exactly the diagonal draw
    for (std::size_t k = 15; k < sv.size(); ++k) EXPECT_LT(sv[k], 1e-10 * sv[0]);
}

TEST(GenerateStructured, RejectsBadArguments) {
    EXPECT_THROW(generate_structured(10, 8, 0, 5.0, 1), std::invalid_argument);
    EXPECT_THROW(generate_structured(10, 8, 9, 5.0, 1), std::invalid_argument);
    EXPECT_THROW(generate_structured(10, 8, 4, 1.0, 1), std::invalid_argument);
}

TEST(PlantSparseSolution, ExactNonzeroCounts) {
    const auto x = plant_sparse_solution(1000, 0.01, 3);
    std::size_t nz = 0;
    for (double v : x)
        if (v != 0.0) ++nz;
    EXPECT_EQ(nz, 10u);

    const auto y = plant_sparse_solution(50, 0.01, 3);
    nz = 0;
    for (double v : y)
        if (v != 0.0) ++nz;
    EXPECT_EQ(nz, 1u);  // ceil(0.5) = 1
}

TEST(PlantSparseSolution, SupportsVaryAcrossSeeds) {
    std::set<std::vector<int>> supports;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto x = plant_sparse_solution(100, 0.03, seed);
        std::vector<int> support;
        for (int j = 0; j < 100; ++j)
            if (x[j] != 0.0) support.push_back(j);
        supports.insert(support);
    }
    EXPECT_GE(supports.size(), 19u);
}

TEST(NullspaceNoise, ConstructionContracts) {
    const auto a = generate_structured(20, 8, 8, 5.0, 9);  // null(A^T) has dim 12
    std::vector<double> y_hat(20, 0.0);
    RandomStream rng(4);
    for (auto& v : y_hat) v = rng.normal();

    const auto zero = nullspace_noise(a, y_hat, 0.0, 5);
    for (double v : zero) EXPECT_EQ(v, 0.0);

    const auto e = nullspace_noise(a, y_hat, 2.0, 5);
    double e_norm = 0.0, y_norm = 0.0;
    for (double v : e) e_norm += v * v;
    for (double v : y_hat) y_norm += v * v;
    e_norm = std::sqrt(e_norm);
    y_norm = std::sqrt(y_norm);
    EXPECT_NEAR(e_norm, 2.0 * y_norm, 1e-10 * 2.0 * y_norm);

    const auto ate = col_block_transpose_times(a, {0, 8}, e);
    double ate_norm = 0.0;
    for (double v : ate) ate_norm += v * v;
    EXPECT_LE(std::sqrt(ate_norm), 1e-8 * std::sqrt(a.frobenius_sq()) * e_norm);
}

TEST(NullspaceNoise, TrivialNullSpaceIsAnError) {
    const auto a = generate_gaussian(4, 8, 2);  // full row rank almost surely
    EXPECT_THROW(nullspace_noise(a, std::vector<double>(4, 1.0), 1.0, 3), std::runtime_error);
}

TEST(PseudoInverse, Examples) {
    std::vector<double> eye(9, 0.0);
    eye[0] = eye[4] = eye[8] = 1.0;
    const DenseMatrix id3(3, 3, eye);
    const std::vector<double> b{1.0, -2.0, 0.5};
    EXPECT_EQ(pseudo_inverse_solution(id3, b), b);

    const DenseMatrix rank1(2, 2, {1.0, 0.0, 0.0, 0.0});
    const auto x = pseudo_inverse_solution(rank1, std::vector<double>{2.0, 3.0});
    EXPECT_NEAR(x[0], 2.0, 1e-12);
    EXPECT_NEAR(x[1], 0.0, 1e-12);
}

TEST(PseudoInverse, LeastSquaresAndMinimumNorm) {
    const auto a = generate_gaussian(10, 6, 19);
    RandomStream rng(20);
    std::vector<double> b(10);
    for (auto& v : b) v = rng.normal();
    const auto x = pseudo_inverse_solution(a, b);
    // normal equations: A^T (A x - b) = 0
    const auto ax = row_block_times(a, {0, 10}, x);
    std::vector<double> resid(10);
    for (std::size_t i = 0; i < 10; ++i) resid[i] = ax[i] - b[i];
    const auto normal_eq = col_block_transpose_times(a, {0, 6}, resid);
    for (double v : normal_eq) EXPECT_NEAR(v, 0.0, 1e-10);
}

TEST(Metrics, RelativeError) {
    const std::vector<double> x_hat{3.0, 4.0};
    EXPECT_EQ(relative_error(x_hat, x_hat), 0.0);
    EXPECT_EQ(relative_error(std::vector<double>{0.0, 0.0}, x_hat), 1.0);
    EXPECT_NEAR(relative_error(std::vector<double>{3.0, 0.0}, x_hat), 0.8, 1e-15);
    // absolute norm when the reference is zero
    EXPECT_NEAR(relative_error(std::vector<double>{3.0, 4.0}, std::vector<double>{0.0, 0.0}),
                5.0, 1e-15);
}

TEST(Metrics, Psnr) {
    const std::vector<double> x_hat{1.0, 0.0};
    EXPECT_TRUE(std::isinf(psnr(x_hat, x_hat)));
    EXPECT_NEAR(psnr(std::vector<double>{0.0, 0.0}, x_hat), 0.0, 1e-12);
    EXPECT_NEAR(psnr(std::vector<double>{0.9, 0.0}, x_hat), 20.0, 1e-10);
    EXPECT_THROW(psnr(x_hat, std::vector<double>{0.0, 0.0}), std::invalid_argument);
}

TEST(ProblemInstances, InvariantsHold) {
    auto sparse = make_sparse_instance(generate_gaussian(25, 10, 6), 5.0, 0.1, 3.0, 6);
    ASSERT_EQ(sparse.b.size(), 25u);
    double e_norm = 0.0, y_norm = 0.0, ate_norm = 0.0;
    std::vector<double> e(25);
    for (std::size_t i = 0; i < 25; ++i) {
        e[i] = sparse.b[i] - sparse.y_hat[i];
        e_norm += e[i] * e[i];
        y_norm += sparse.y_hat[i] * sparse.y_hat[i];
    }
    e_norm = std::sqrt(e_norm);
    y_norm = std::sqrt(y_norm);
    EXPECT_NEAR(e_norm, sparse.noise_q * y_norm, 1e-10 * std::max(1.0, e_norm));
    const auto ate = col_block_transpose_times(sparse.matrix, {0, 10}, e);
    for (double v : ate) ate_norm += v * v;
    EXPECT_LE(std::sqrt(ate_norm), 1e-8 * std::sqrt(sparse.matrix.frobenius_sq()) * e_norm);

    // underdetermined full-row-rank: noise falls back to zero
    auto flat = make_sparse_instance(generate_gaussian(6, 12, 8), 5.0, 0.1, 5.0, 8);
    EXPECT_EQ(flat.noise_q, 0.0);
    for (std::size_t i = 0; i < flat.b.size(); ++i) EXPECT_EQ(flat.b[i], flat.y_hat[i]);

    auto minnorm = make_min_norm_instance(generate_gaussian(20, 8, 9), 5.0, 9);
    const auto pinv = pseudo_inverse_solution(minnorm.matrix, minnorm.b);
    EXPECT_LT(relative_error(minnorm.x_hat, pinv), 1e-12);
}

TEST(Benchmark, OneByOneSuite) {
    SuiteConfig suite;
    suite.m = 1;
    suite.n = 1;
    suite.kind = ProblemKind::min_norm_ls;
    suite.q = 0.0;
    suite.methods = {Variant::rebk, Variant::reabk, Variant::arabebk};
    suite.seeds = {1};
    suite.tau = 1;
    suite.tol = 1e-10;
    suite.max_iters = 1000;
    const auto out = run_benchmark(suite);
    ASSERT_EQ(out.report.rows.size(), 3u);
    for (const auto& row : out.report.rows) {
        EXPECT_TRUE(row.converged);
        EXPECT_LE(row.iters, suite.max_iters);
    }
}

TEST(Benchmark, DeterministicModuloTiming) {
    SuiteConfig suite;
    suite.m = 20;
    suite.n = 10;
    suite.kind = ProblemKind::sparse_ls;
    suite.lambda = 1.0;
    suite.sparsity_fraction = 0.1;
    suite.q = 2.0;
    suite.methods = {Variant::rebk, Variant::arabebk};
    suite.seeds = {1, 2, 3};
    suite.tau = 3;
    suite.tol = 1e-5;
    suite.max_iters = 300000;
    const auto o1 = run_benchmark(suite);
    suite.jobs = 3;  // concurrent runs share immutable instances
    const auto o2 = run_benchmark(suite);
    ASSERT_EQ(o1.report.rows.size(), o2.report.rows.size());
    for (std::size_t k = 0; k < o1.report.rows.size(); ++k) {
        EXPECT_EQ(o1.report.rows[k].method, o2.report.rows[k].method);
        EXPECT_EQ(o1.report.rows[k].seed, o2.report.rows[k].seed);
        EXPECT_EQ(o1.report.rows[k].iters, o2.report.rows[k].iters);
        EXPECT_EQ(o1.report.rows[k].final_rel_err, o2.report.rows[k].final_rel_err);
    }
}

TEST(Benchmark, CsvLayout) {
    SuiteConfig suite;
    suite.m = 4;
    suite.n = 3;
    suite.kind = ProblemKind::min_norm_ls;
    suite.q = 0.0;
    suite.methods = {Variant::arabebk};
    suite.seeds = {1, 2};
    suite.tau = 2;
    suite.tol = 1e-8;
    suite.max_iters = 50000;
    const auto out = run_benchmark(suite);
    std::ostringstream os;
    out.report.write_csv(os);
    const auto text = os.str();
    EXPECT_EQ(text.substr(0, text.find('\n')),
              "method,instance,seed,iters,setup_s,solve_s,final_rel_err,final_psnr");
    std::size_t lines = 0;
    for (char ch : text)
        if (ch == '\n') ++lines;
    EXPECT_EQ(lines, 3u);  // header + one row per (method, seed)
    EXPECT_EQ(out.traces.size(), 2u);
}

TEST(Median, EvenAndOddCounts) {
    EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
    EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
    EXPECT_TRUE(std::isnan(median({})));
}
