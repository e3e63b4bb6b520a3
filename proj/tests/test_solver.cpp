#include <cmath>

#include <Eigen/SVD>

#include "doctest.h"
#include "helpers.hpp"
#include "mtfl/dual.hpp"
#include "mtfl/oracle/oracle.hpp"
#include "mtfl/solver.hpp"

using namespace mtfl;

namespace {

solver::SolverConfig config(double tol, solver::Algorithm algo = solver::Algorithm::ProximalGradient) {
    solver::SolverConfig cfg;
    cfg.kkt_tol = tol;
    cfg.algorithm = algo;
    return cfg;
}

constexpr solver::Algorithm kBoth[] = {solver::Algorithm::ProximalGradient, solver::Algorithm::BlockCoordinate};

}  // namespace

TEST_CASE("zero solution at and above lambda_max") {
    const auto ds = testing::random_dataset(3, 8, 12, 41);
    const double lmax = dual::lambda_max(ds).value;
    for (auto algo : kBoth) {
        for (double f : {1.0, 1.5, 10.0}) {
            const auto r = solver::fit(ds, f * lmax, config(1e-8, algo));
            CHECK(r.W.values.isZero(0.0));
        }
        CHECK_FALSE(solver::fit(ds, 0.99 * lmax, config(1e-8, algo)).W.values.isZero(0.0));
    }
}

TEST_CASE("orthogonal design soft-thresholds the least-squares solution") {
    std::vector<Task> tasks(1);
    tasks[0].X = Eigen::MatrixXd::Identity(2, 2);
    tasks[0].y = Eigen::VectorXd{{1.0, 0.0}};
    const MultiTaskDataset ds(tasks);
    for (auto algo : kBoth) {
        const auto r = solver::fit(ds, 0.5, config(1e-12, algo));
        CHECK(r.W.values(0, 0) == doctest::Approx(0.5).epsilon(1e-10));
        CHECK(r.W.values(1, 0) == 0.0);
    }
}

TEST_CASE("single task agrees with a coordinate-descent lasso") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto ds = testing::random_dataset(1, 50, 20, 100 + seed);
        const double lambda = 0.2 * dual::lambda_max(ds).value;
        const Eigen::VectorXd w = oracle::lasso_coordinate_descent(ds.X(0), ds.y(0), lambda);
        const double expect = 0.5 * (ds.y(0) - ds.X(0) * w).squaredNorm() + lambda * w.lpNorm<1>();
        for (auto algo : kBoth) {
            const auto r = solver::fit(ds, lambda, config(1e-10, algo));
            CHECK(testing::rel_diff(r.objective, expect) <= 1e-8);
        }
    }
}

TEST_CASE("reported KKT residual is reproducible from W") {
    const auto ds = testing::random_dataset(4, 10, 25, 42);
    const double lambda = 0.3 * dual::lambda_max(ds).value;
    for (auto algo : kBoth) {
        const auto r = solver::fit(ds, lambda, config(1e-8, algo));
        CHECK(r.kkt_residual <= 1e-8);

        // Independent recomputation of the optimality conditions.
        double worst = 0.0;
        for (Index l = 0; l < 25; ++l) {
            Eigen::VectorXd m(4);
            for (Index t = 0; t < 4; ++t) {
                const Eigen::VectorXd res = oracle::residual_loops(ds.X(t), ds.y(t), r.W.values.col(t));
                m(t) = ds.X(t).col(l).dot(res) / lambda;
            }
            const Eigen::VectorXd w = r.W.values.row(l).transpose();
            worst = std::max(worst, w.norm() > 0 ? (m - w / w.norm()).norm() : std::max(0.0, m.norm() - 1.0));
        }
        CHECK(std::abs(worst - r.kkt_residual) <= 1e-12);
        CHECK(std::abs(solver::kkt_residual(ds, r.W, lambda) - r.kkt_residual) <= 1e-12);
        CHECK(r.objective == doctest::Approx(solver::primal_objective(ds, r.W, lambda)).epsilon(1e-14));
    }
}

TEST_CASE("both algorithms reach the same optimum") {
    const auto ds = testing::random_dataset(3, 12, 40, 43);
    const double lambda = 0.15 * dual::lambda_max(ds).value;
    const auto a = solver::fit(ds, lambda, config(1e-9, solver::Algorithm::ProximalGradient));
    const auto b = solver::fit(ds, lambda, config(1e-9, solver::Algorithm::BlockCoordinate));
    CHECK(testing::rel_diff(a.objective, b.objective) <= 1e-9);
}

TEST_CASE("backtracking gives monotone descent") {
    const auto ds = testing::random_dataset(3, 10, 30, 44);
    const double lambda = 0.2 * dual::lambda_max(ds).value;
    auto cfg = config(1e-8);
    cfg.step_rule = solver::StepRule::Backtracking;
    double prev = solver::primal_objective(ds, WeightMatrix::zeros(ds), lambda);
    // Objective after k iterations, read off truncated runs.
    for (int k = 1; k <= 60; ++k) {
        cfg.max_iters = k;
        double obj = 0.0;
        try {
            obj = solver::fit(ds, lambda, cfg).objective;
        } catch (const solver::SolverFailure& e) {
            obj = solver::primal_objective(ds, e.best().W, lambda);
        }
        CHECK(obj <= prev + 1e-12 * std::abs(prev));
        prev = obj;
    }
}

TEST_CASE("warm start agrees with a cold start") {
    const auto ds = testing::random_dataset(3, 10, 30, 45);
    const double lmax = dual::lambda_max(ds).value;
    for (auto algo : kBoth) {
        auto cfg = config(1e-7, algo);
        const auto prev = solver::fit(ds, 0.3 * lmax, cfg);
        const auto cold = solver::fit(ds, 0.2 * lmax, cfg);
        cfg.warm_start = prev.W;
        const auto warm = solver::fit(ds, 0.2 * lmax, cfg);
        CHECK(testing::rel_diff(cold.objective, warm.objective) <= 1e-6);
    }
}

TEST_CASE("duality gap is nonnegative and shrinks with the tolerance") {
    const auto ds = testing::random_dataset(3, 10, 30, 46);
    const double lambda = 0.25 * dual::lambda_max(ds).value;
    double last = 1e300;
    for (double tol : {1e-3, 1e-5, 1e-7, 1e-9}) {
        const auto r = solver::fit(ds, lambda, config(tol, solver::Algorithm::BlockCoordinate));
        const double gap = solver::duality_gap(ds, r.W, lambda);
        CHECK(gap >= -1e-10 * std::max(1.0, r.objective));
        CHECK(gap <= last * 1.0000001 + 1e-12);
        last = gap;
    }
    CHECK(last <= 1e-8);
}

TEST_CASE("iteration cap raises a solver failure with the best iterate") {
    const auto ds = testing::random_dataset(3, 10, 30, 47);
    auto cfg = config(1e-12);
    cfg.max_iters = 3;
    try {
        solver::fit(ds, 0.1 * dual::lambda_max(ds).value, cfg);
        FAIL("no error");
    } catch (const solver::SolverFailure& e) {
        CHECK(e.code() == ErrorCode::MaxItersExceeded);
        CHECK(e.best().W.rows() == 30);
    }
    cfg.max_iters = 0;
    CHECK_THROWS_AS(solver::validate_config(cfg), Error);
    cfg.max_iters = 10;
    cfg.kkt_tol = 0.0;
    CHECK_THROWS_AS(solver::validate_config(cfg), Error);
}

TEST_CASE("lipschitz estimate") {
    const auto ds = testing::random_dataset(3, 9, 7, 48);
    double expect = 0.0;
    for (Index t = 0; t < 3; ++t) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(ds.X(t));
        expect = std::max(expect, std::pow(svd.singularValues()(0), 2));
    }
    CHECK(solver::lipschitz_constant(ds) == doctest::Approx(expect).epsilon(1e-8));
}

TEST_CASE("weighted loss reduction") {
    const auto ds = testing::random_dataset(3, 6, 5, 49);
    synth::Rng rng(50);
    const std::vector<double> ones{1.0, 1.0, 1.0};
    const auto same = solver::reduce_weighted(ds, ones);
    for (Index t = 0; t < 3; ++t) CHECK(same.X(t) == ds.X(t));

    const std::vector<double> fours{4.0, 4.0, 4.0};
    const auto half = solver::reduce_weighted(ds, fours);
    for (Index t = 0; t < 3; ++t) {
        CHECK(half.X(t).isApprox(ds.X(t) / 2.0, 1e-15));
        CHECK(half.y(t).isApprox(ds.y(t) / 2.0, 1e-15));
    }

    for (int probe = 0; probe < 20; ++probe) {
        std::vector<double> w(3);
        for (auto& x : w) x = 0.1 + 5.0 * rng.uniform();
        const auto red = solver::reduce_weighted(ds, w);
        const WeightMatrix W{testing::random_matrix(5, 3, rng)};
        const double lambda = rng.uniform() + 0.1;
        double direct = 0.0;
        for (Index t = 0; t < 3; ++t) {
            direct += 0.5 / w[static_cast<std::size_t>(t)] * (ds.y(t) - ds.X(t) * W.values.col(t)).squaredNorm();
        }
        for (Index l = 0; l < 5; ++l) direct += lambda * W.row_norm(l);
        CHECK(testing::rel_diff(solver::primal_objective(red, W, lambda), direct) <= 1e-12);
    }
    CHECK_THROWS_AS(solver::reduce_weighted(ds, std::vector<double>{1.0, 0.0, 1.0}), Error);
}

TEST_CASE("frobenius regularizer reduction") {
    const auto ds = testing::random_dataset(2, 6, 4, 51);
    synth::Rng rng(52);
    for (int probe = 0; probe < 20; ++probe) {
        const double rho = 0.01 + 3.0 * rng.uniform();
        const auto red = solver::reduce_frobenius(ds, rho);
        for (Index t = 0; t < 2; ++t) CHECK(red.samples(t) == ds.samples(t) + 4);
        const WeightMatrix W{testing::random_matrix(4, 2, rng)};
        const double lambda = rng.uniform();
        const double direct = solver::primal_objective(ds, W, lambda) + rho * W.values.squaredNorm();
        CHECK(testing::rel_diff(solver::primal_objective(red, W, lambda), direct) <= 1e-12);
    }
    const auto tiny = solver::reduce_frobenius(ds, 1e-300);
    const WeightMatrix W{testing::random_matrix(4, 2, rng)};
    CHECK(solver::primal_objective(tiny, W, 1.0) == doctest::Approx(solver::primal_objective(ds, W, 1.0)));
    CHECK_THROWS_AS(solver::reduce_frobenius(ds, 0.0), Error);
}
