#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mtfl/cli.hpp"
#include "mtfl/dual.hpp"
#include "mtfl/oracle/oracle.hpp"
#include "mtfl/qp1qc.hpp"
#include "mtfl/synth.hpp"

namespace mtfl::cli {

namespace {

std::string printf_str(const char* format, double a, double b = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), format, a, b);
    return buf;
}

// Ground truth for the path suites: unscreened block coordinate descent.
screening::PathScreeningReport reference_path(const MultiTaskDataset& ds, const VerifySettings& s, bool screen) {
    PathSettings p;
    p.grid_points = s.grid_points;
    p.grid_min = s.grid_min;
    p.kkt_tol = s.kkt_tol;
    p.seed = s.seed;
    p.screen = screen;
    p.algorithm = solver::Algorithm::BlockCoordinate;
    return run_path(ds, p);
}

void safety_suite(const MultiTaskDataset& ds, const screening::PathScreeningReport& plain, const VerifySettings& s,
                  std::vector<CheckResult>& out) {
    const auto screened = reference_path(ds, s, true);
    if (!screened.completed || !plain.completed) {
        out.push_back({"safety", "paths completed", false, screened.completed ? plain.failure : screened.failure});
        return;
    }
    Index violations = 0;
    double worst_obj = 0.0;
    for (std::size_t k = 0; k < plain.records.size(); ++k) {
        const auto& a = plain.records[k];
        const auto& b = screened.records[k];
        for (Index l = 0; l < ds.num_features(); ++l) {
            if (b.mask.inactive[static_cast<std::size_t>(l)] && a.W.row_norm(l) > 1e-6) ++violations;
        }
        worst_obj = std::max(worst_obj, std::abs(a.objective - b.objective) / std::max(1.0, std::abs(a.objective)));
    }
    out.push_back({"safety", "no active feature discarded", violations == 0,
                   std::to_string(violations) + " violations"});
    out.push_back({"safety", "objectives match unscreened path", worst_obj <= 1e-6,
                   printf_str("max rel diff %.3g", worst_obj)});
}

void ball_suite(const MultiTaskDataset& ds, const screening::PathScreeningReport& plain,
                std::vector<CheckResult>& out) {
    if (!plain.completed) {
        out.push_back({"ball", "reference path completed", false, plain.failure});
        return;
    }
    const auto ref_max = dual::reference_at_lambda_max(ds);
    double worst_seq = 0.0;
    double worst_max = 0.0;
    Index skipped = 0;
    const auto excess = [&](const dual::DualBall& ball, const DualPoint& theta) {
        const double dist = (theta.values() - ball.center).norm();
        const double slack = 1e-6 * ball.radius + 1e-9 * theta.values().norm();
        return std::max(0.0, dist - ball.radius - slack);
    };
    for (std::size_t k = 1; k < plain.records.size(); ++k) {
        const auto& cur = plain.records[k];
        const auto& prev = plain.records[k - 1];
        const DualPoint theta = dual::dual_from_primal(ds, cur.W, cur.lambda);

        worst_max = std::max(worst_max, excess(dual::dual_ball(ds, ref_max, cur.lambda), theta));

        DualPoint theta0 = dual::dual_from_primal(ds, prev.W, prev.lambda);
        if (k == 1) {
            worst_seq = std::max(worst_seq, excess(dual::dual_ball(ds, ref_max, cur.lambda), theta));
        } else if (dual::dual_feasibility_violation(ds, theta0) > 1e-6) {
            ++skipped;
        } else {
            const auto ref = dual::reference_from_dual(ds, std::move(theta0), prev.lambda);
            worst_seq = std::max(worst_seq, excess(dual::dual_ball(ds, ref, cur.lambda), theta));
        }
    }
    out.push_back({"ball", "sequential ball contains dual optimum", worst_seq == 0.0,
                   printf_str("max excess %.3g, skipped %.0f", worst_seq, static_cast<double>(skipped))});
    out.push_back({"ball", "lambda_max ball contains dual optimum", worst_max == 0.0,
                   printf_str("max excess %.3g", worst_max)});
}

void qp1qc_suite(const VerifySettings& s, std::vector<CheckResult>& out) {
    synth::Rng rng(s.seed);
    int below_sample = 0;
    int bad_maximizer = 0;
    int failures = 0;
    for (int i = 0; i < s.cases; ++i) {
        const Index T = 1 + static_cast<Index>(rng.below(12));
        const auto inst = oracle::random_instance(T, rng);
        try {
            const auto sol = qp1qc::solve(inst);
            const double sampled = oracle::qp1qc_sphere_max(inst, s.samples, rng);
            if (sol.s_value < sampled * (1.0 - 1e-12)) ++below_sample;
            // The returned maximizer must be feasible and attain s.
            double attained = 0.0;
            for (Index t = 0; t < T; ++t) {
                const double v = std::abs(inst.c(t)) + std::abs(sol.u_star(t)) * std::sqrt(inst.a(t));
                attained += v * v;
            }
            if (sol.u_star.norm() > inst.delta * (1.0 + 1e-9) ||
                std::abs(attained - sol.s_value) > 1e-9 * std::max(1.0, sol.s_value)) {
                ++bad_maximizer;
            }
        } catch (const Error&) {
            ++failures;
        }
    }
    out.push_back({"qp1qc", "value dominates sphere sampling", below_sample == 0 && failures == 0,
                   std::to_string(below_sample) + " below, " + std::to_string(failures) + " solver errors"});
    out.push_back({"qp1qc", "maximizer feasible and attains value", bad_maximizer == 0,
                   std::to_string(bad_maximizer) + " bad"});

    // Single task: the maximum is (|c| + delta ||x||)^2 exactly.
    double worst = 0.0;
    for (int i = 0; i < s.cases; ++i) {
        const auto inst = oracle::random_instance(1, rng);
        const double expect = std::pow(std::abs(inst.c(0)) + inst.delta * std::sqrt(inst.a(0)), 2);
        const double got = qp1qc::solve(inst).s_value;
        worst = std::max(worst, std::abs(got - expect) / std::max(1.0, expect));
    }
    out.push_back({"qp1qc", "single-task closed form", worst <= 1e-10, printf_str("max rel err %.3g", worst)});
}

void gap_suite(const MultiTaskDataset& ds, const screening::PathScreeningReport& plain,
               std::vector<CheckResult>& out) {
    if (!plain.completed) {
        out.push_back({"gap", "reference path completed", false, plain.failure});
        return;
    }
    double most_negative = 0.0;
    double largest = 0.0;
    bool sign_ok = true;
    for (const auto& r : plain.records) {
        const double P = std::max(1.0, std::abs(r.objective));
        const double gap = solver::duality_gap(ds, r.W, r.lambda);
        if (gap < -1e-10 * P) sign_ok = false;
        most_negative = std::min(most_negative, gap / P);
        largest = std::max(largest, gap / P);
    }
    out.push_back({"gap", "duality gap nonnegative", sign_ok, printf_str("min rel gap %.3g", most_negative)});
    out.push_back({"gap", "duality gap small at optimum", largest <= 1e-6, printf_str("max rel gap %.3g", largest)});
}

}  // namespace

std::vector<CheckResult> run_verify(const MultiTaskDataset& ds, const VerifySettings& s) {
    std::vector<CheckResult> out;
    const bool all = s.suite == "all";
    const bool need_path = all || s.suite == "safety" || s.suite == "ball" || s.suite == "gap";
    screening::PathScreeningReport plain;
    if (need_path) plain = reference_path(ds, s, false);

    if (all || s.suite == "safety") safety_suite(ds, plain, s, out);
    if (all || s.suite == "ball") ball_suite(ds, plain, out);
    if (all || s.suite == "qp1qc") qp1qc_suite(s, out);
    if (all || s.suite == "gap") gap_suite(ds, plain, out);
    return out;
}

}  // namespace mtfl::cli
