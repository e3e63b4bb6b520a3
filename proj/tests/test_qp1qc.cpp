#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "mtfl/oracle/oracle.hpp"
#include "mtfl/qp1qc.hpp"

using namespace mtfl;

namespace {

qp1qc::Instance make(Eigen::VectorXd a, Eigen::VectorXd b, Eigen::VectorXd c, double delta) {
    return qp1qc::Instance{std::move(a), std::move(b), std::move(c), delta};
}

double phi(const qp1qc::Instance& inst, double alpha) {
    // 1/||u(alpha)|| - 1/delta with u_t = 2 b_t / (alpha - 2 a_t), written out directly.
    double s = 0.0;
    for (Index t = 0; t < inst.size(); ++t) s += std::pow(2.0 * inst.b(t) / (alpha - 2.0 * inst.a(t)), 2);
    return 1.0 / std::sqrt(s) - 1.0 / inst.delta;
}

}  // namespace

TEST_CASE("instance construction") {
    const auto zero = qp1qc::make_instance(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3), 0.5);
    CHECK(zero.a.isZero(0.0));
    CHECK(zero.b.isZero(0.0));
    CHECK(zero.c.isZero(0.0));

    // T = 1, x = [1, 0], o = [0.5, 7].
    const auto one = qp1qc::make_instance(Eigen::VectorXd{{1.0}}, Eigen::VectorXd{{0.5}}, 0.3);
    CHECK(one.a(0) == 1.0);
    CHECK(one.b(0) == 0.5);
    CHECK(one.c(0) == 0.5);

    // Fields against per-column recomputation on a real ball.
    const auto ds = testing::random_dataset(3, 5, 4, 31);
    const auto ball = dual::dual_ball(ds, dual::reference_at_lambda_max(ds), 0.7 * dual::lambda_max(ds).value);
    for (Index l = 0; l < 4; ++l) {
        const auto inst = qp1qc::build_instance(ds, ball, l);
        for (Index t = 0; t < 3; ++t) {
            const Eigen::VectorXd x = ds.X(t).col(l);
            const double c = x.dot(ball.center.segment(ds.offset(t), ds.samples(t)));
            CHECK(inst.a(t) == doctest::Approx(x.squaredNorm()).epsilon(1e-14));
            CHECK(inst.c(t) == doctest::Approx(c).epsilon(1e-12));
            CHECK(inst.b(t) == doctest::Approx(x.norm() * std::abs(c)).epsilon(1e-12));
        }
        CHECK(inst.delta == ball.radius);
    }
    CHECK_THROWS_AS(qp1qc::build_instance(ds, ball, 4), Error);
}

TEST_CASE("single task closed form") {
    const auto inst = make(Eigen::VectorXd{{1.0}}, Eigen::VectorXd{{0.5}}, Eigen::VectorXd{{0.5}}, 0.3);
    CHECK(qp1qc::solve(inst).s_value == doctest::Approx(0.64).epsilon(1e-14));

    synth::Rng rng(32);
    for (int i = 0; i < 200; ++i) {
        const auto r = oracle::random_instance(1, rng);
        const double expect = std::pow(r.delta * std::sqrt(r.a(0)) + std::abs(r.c(0)), 2);
        CHECK(std::abs(qp1qc::solve(r).s_value - expect) <= 1e-12 * std::max(1.0, expect));
    }
}

TEST_CASE("two task Newton example") {
    const auto inst = make(Eigen::VectorXd{{1.0, 4.0}}, Eigen::VectorXd{{1.0, 1.0}}, Eigen::VectorXd{{1.0, 0.5}}, 0.1);
    const auto sol = qp1qc::solve(inst);
    CHECK(sol.branch == qp1qc::Branch::Newton);
    const double bisect = oracle::secular_root_bisection(inst, 8.0, 1e4, 1e-12);
    CHECK(bisect == doctest::Approx(33.76).epsilon(0.05 / 33.76));
    CHECK(sol.alpha_star == doctest::Approx(bisect).epsilon(1e-10));
}

TEST_CASE("closed-form branch with no linear term") {
    const auto inst = make(Eigen::VectorXd{{1.0, 1.0}}, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2), 1.0);
    const auto sol = qp1qc::solve(inst);
    CHECK(sol.branch == qp1qc::Branch::ClosedForm);
    CHECK(sol.alpha_star == 2.0);
    CHECK(sol.s_value == doctest::Approx(1.0).epsilon(1e-15));
    synth::Rng rng(33);
    CHECK(oracle::qp1qc_sphere_max(inst, 20000, rng) <= sol.s_value + 1e-12);
}

TEST_CASE("zero radius collapses to the center value") {
    const auto inst = make(Eigen::VectorXd{{1.0, 2.0}}, Eigen::VectorXd{{0.3, 0.0}}, Eigen::VectorXd{{0.3, 0.0}}, 0.0);
    const auto sol = qp1qc::solve(inst);
    CHECK(sol.branch == qp1qc::Branch::PointBall);
    CHECK(sol.s_value == doctest::Approx(0.09).epsilon(1e-15));
}

TEST_CASE("random instances against the sphere oracle") {
    synth::Rng rng(34);
    for (int i = 0; i < 100; ++i) {
        const auto inst = oracle::random_instance(3, rng);
        const double s = qp1qc::solve(inst).s_value;
        const double sampled = oracle::qp1qc_sphere_max(inst, 100000, rng);
        CHECK(s >= sampled - 1e-9);
        CHECK(s <= sampled + 1e-2 * (1.0 + sampled));
    }
}

TEST_CASE("solution invariants") {
    synth::Rng rng(35);
    int newton = 0;
    for (int i = 0; i < 500; ++i) {
        const Index T = 1 + static_cast<Index>(rng.below(20));
        const auto inst = oracle::random_instance(T, rng);
        const auto sol = qp1qc::solve(inst);
        const double rho = inst.rho();
        CHECK((2.0 * rho - 2.0 * inst.a.array()).minCoeff() >= -1e-12);
        CHECK(sol.alpha_star >= 2.0 * rho);
        CHECK(sol.u_star.minCoeff() >= 0.0);
        if (sol.alpha_star > 0.0) {
            CHECK(std::abs(sol.u_star.norm() - inst.delta) <= 1e-10 * std::max(inst.delta, 1.0));
        }
        if (sol.branch == qp1qc::Branch::Newton) {
            ++newton;
            const double d = 1e-6 * sol.alpha_star;
            // Left of the root may fall below the pole; phi is only defined above 2 rho.
            if (sol.alpha_star - d > 2.0 * rho) CHECK(phi(inst, sol.alpha_star - d) < 0.0);
            CHECK(phi(inst, sol.alpha_star + d) > 0.0);
            const double sec = qp1qc::secular(inst, sol.alpha_star - 2.0 * rho);
            CHECK(std::abs(sec) * inst.delta * inst.delta <= 1e-10 * std::max(inst.delta, 1.0));
        }
    }
    CHECK(newton > 300);
}

TEST_CASE("s_ell dominates g over the ball") {
    const auto ds = testing::random_dataset(3, 6, 8, 36);
    const double lmax = dual::lambda_max(ds).value;
    const auto ball = dual::dual_ball(ds, dual::reference_at_lambda_max(ds), 0.5 * lmax);
    const Eigen::VectorXd s = qp1qc::s_all(ds, ball);
    synth::Rng rng(37);
    for (Index l = 0; l < 8; ++l) {
        CHECK(s(l) == doctest::Approx(qp1qc::s_ell(ds, ball, l)).epsilon(1e-13));
        double worst = -1e300;
        for (int i = 0; i < 10000; ++i) {
            const Eigen::VectorXd v = oracle::point_in_ball(ball.center, ball.radius, rng);
            worst = std::max(worst, oracle::g_loops(ds, v, l) - s(l));
        }
        CHECK(worst <= 1e-9);
    }

    // A point ball gives g at its center, and a null feature scores 0.
    dual::DualBall point = ball;
    point.radius = 0.0;
    for (Index l = 0; l < 8; ++l) {
        CHECK(qp1qc::s_ell(ds, point, l) == doctest::Approx(oracle::g_loops(ds, ball.center, l)).epsilon(1e-12));
    }
    std::vector<Task> tasks(ds.tasks().begin(), ds.tasks().end());
    for (auto& t : tasks) t.X.col(2).setZero();
    const MultiTaskDataset nulled(tasks);
    CHECK(qp1qc::s_ell(nulled, ball, 2) == 0.0);
}

TEST_CASE("bounded scores make the same decisions as exact ones") {
    const auto ds = testing::random_dataset(4, 10, 200, 38);
    const double lmax = dual::lambda_max(ds).value;
    const auto ref = dual::reference_at_lambda_max(ds);
    int newton_needed = 0;
    for (const double frac : {0.99, 0.9, 0.7, 0.5, 0.2}) {
        const auto ball = dual::dual_ball(ds, ref, frac * lmax);
        const Eigen::MatrixXd corr = dual::correlations(ds, DualPoint(ball.center, ds));
        const Eigen::VectorXd exact = qp1qc::s_all(ds, corr, ball.radius);
        const Eigen::VectorXd fast = qp1qc::s_screen(ds, corr, ball.radius);
        for (Index l = 0; l < ds.num_features(); ++l) {
            CHECK((exact(l) < 1.0) == (fast(l) < 1.0));
            // Upper bounds below 1, lower bounds at or above it.
            if (fast(l) < 1.0) CHECK(fast(l) >= exact(l) * (1.0 - 1e-12));
            if (fast(l) >= 1.0) CHECK(fast(l) <= exact(l) * (1.0 + 1e-12));
            if (fast(l) == exact(l)) ++newton_needed;
        }
    }
    CHECK(newton_needed < 5 * 200);
}
