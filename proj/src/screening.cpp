#include "mtfl/screening.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <vector>

#include "mtfl/qp1qc.hpp"

namespace mtfl::screening {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

Index count_zero_rows(const WeightMatrix& W, double threshold) {
    Index n = 0;
    for (Index l = 0; l < W.rows(); ++l) {
        if (W.row_norm(l) <= threshold) ++n;
    }
    return n;
}

void fill_stats(PathRecord& rec, double threshold) {
    rec.n_screened = rec.mask.count_inactive();
    rec.n_truly_inactive = count_zero_rows(rec.W, threshold);
    if (rec.n_truly_inactive > 0) {
        rec.rejection_ratio = static_cast<double>(rec.n_screened) / static_cast<double>(rec.n_truly_inactive);
    }
}

// X^T theta0 for the sequential reference, filled in row by row on demand.
// Rows are bounded from a full pass at an older point theta_ref:
//   |<x, theta0_t>| <= |<x, theta_ref_t>| + ||x|| ||theta0_t - theta_ref_t||,
// and only rows whose bound cannot settle a test are computed exactly. The
// tests therefore decide exactly as with the full product.
class LazyCorrelations {
public:
    explicit LazyCorrelations(const MultiTaskDataset& ds) : ds_(ds), dist_(ds.num_tasks()) {}

    void set_point(const DualPoint& theta) {
        theta_ = theta.values();
        known_.assign(static_cast<std::size_t>(ds_.num_features()), 0);
        if (ref_.size() == 0) {
            refresh();
            return;
        }
        for (Index t = 0; t < ds_.num_tasks(); ++t) {
            dist_[t] = (theta.block(t) - ref_theta_.segment(ds_.offset(t), ds_.samples(t))).norm();
        }
    }

    // true iff max_l ||X_l^T theta0|| ^ 2 > 1 + tol.
    bool infeasible(double tol) {
        const Index d = ds_.num_features();
        const auto bound = [&](Index l) {
            double g = 0.0;
            for (Index t = 0; t < ds_.num_tasks(); ++t) {
                const double v = std::abs(ref_(l, t)) + ds_.column_norms()(l, t) * dist_[t];
                g += v * v;
            }
            return g;
        };
        std::vector<Index> need;
        for (Index l = 0; l < d; ++l) {
            if (!known_[static_cast<std::size_t>(l)] && bound(l) > 1.0 + tol) need.push_back(l);
        }
        fill(need);
        for (Index l = 0; l < d; ++l) {
            if (known_[static_cast<std::size_t>(l)] && exact_.row(l).squaredNorm() > 1.0 + tol) return true;
        }
        return false;
    }

    // Screening scores for the ball built on this reference (normal y/lambda0 - theta0).
    // Its center correlations are alpha X^T theta0 + beta X^T y.
    Eigen::VectorXd scores(const dual::DualBall& ball) {
        const Index d = ds_.num_features();
        const Index T = ds_.num_tasks();
        const double alpha = 0.5 * (1.0 + ball.n0_coeff);
        const double beta = 0.5 / ball.lambda - 0.5 * ball.n0_coeff / ball.lambda0;
        const auto& xty = ds_.response_correlations();
        const auto& norms = ds_.column_norms();

        Eigen::VectorXd s(d);
        std::vector<Index> need;
        for (Index l = 0; l < d; ++l) {
            if (known_[static_cast<std::size_t>(l)]) {
                need.push_back(l);
                continue;
            }
            double cc = 0.0;
            double top = 0.0;
            for (Index t = 0; t < T; ++t) {
                const double v =
                    std::abs(alpha * ref_(l, t) + beta * xty(l, t)) + std::abs(alpha) * norms(l, t) * dist_[t];
                cc += v * v;
                top = std::max(top, norms(l, t));
            }
            const double upper = std::pow(std::sqrt(cc) + top * ball.radius, 2);
            if (upper < 1.0) {
                s[l] = upper;
            } else {
                need.push_back(l);
            }
        }
        fill(need);

        std::exception_ptr failure;
#pragma omp parallel
        {
            std::vector<double> c(static_cast<std::size_t>(T));
#pragma omp for schedule(static)
            for (std::size_t j = 0; j < need.size(); ++j) {
                const Index l = need[j];
                try {
                    for (Index t = 0; t < T; ++t) c[t] = alpha * exact_(l, t) + beta * xty(l, t);
                    s[l] = qp1qc::s_screen_one(ds_, l, c.data(), ball.radius);
                } catch (...) {
#pragma omp critical
                    if (!failure) failure = std::current_exception();
                }
            }
        }
        if (failure) std::rethrow_exception(failure);
        return s;
    }

private:
    // A fresh full pass once the stale bounds fail on a quarter of the rows.
    void fill(const std::vector<Index>& rows) {
        std::size_t missing = 0;
        for (Index l : rows) missing += known_[static_cast<std::size_t>(l)] ? 0 : 1;
        if (4 * missing > static_cast<std::size_t>(ds_.num_features())) {
            refresh();
            return;
        }
        for (Index l : rows) {
            auto& k = known_[static_cast<std::size_t>(l)];
            if (k) continue;
            for (Index t = 0; t < ds_.num_tasks(); ++t) {
                exact_(l, t) = ds_.X(t).col(l).dot(theta_.segment(ds_.offset(t), ds_.samples(t)));
            }
            k = 1;
        }
    }

    void refresh() {
        ref_ = dual::correlations(ds_, DualPoint(theta_, ds_));
        ref_theta_ = theta_;
        exact_ = ref_;
        dist_.setZero();
        known_.assign(static_cast<std::size_t>(ds_.num_features()), 1);
    }

    const MultiTaskDataset& ds_;
    Eigen::VectorXd theta_;
    Eigen::VectorXd ref_theta_;
    Eigen::MatrixXd ref_;
    Eigen::MatrixXd exact_;
    Eigen::VectorXd dist_;
    std::vector<char> known_;
};

}  // namespace

ScreeningMask screen_at(const MultiTaskDataset& ds, const dual::ReferenceSolution& ref, double lambda) {
    const dual::DualBall ball = dual::dual_ball(ds, ref, lambda);
    return ScreeningMask::from_scores(qp1qc::s_screen(ds, dual::center_correlations(ds, ref, ball), ball.radius),
                                      lambda);
}

SolveFn make_solver(solver::SolverConfig cfg) {
    return [cfg](const MultiTaskDataset& ds, double lambda, const std::optional<WeightMatrix>& warm) {
        solver::SolverConfig local = cfg;
        local.warm_start = warm;
        return solver::fit(ds, lambda, local);
    };
}

double PathScreeningReport::total_screen_time() const {
    double s = 0.0;
    for (const auto& r : records) s += r.t_screen;
    return s;
}

double PathScreeningReport::total_solve_time() const {
    double s = 0.0;
    for (const auto& r : records) s += r.t_solve;
    return s;
}

double PathScreeningReport::mean_rejection_ratio() const {
    double s = 0.0;
    int n = 0;
    for (const auto& r : records) {
        if (r.rejection_ratio) {
            s += *r.rejection_ratio;
            ++n;
        }
    }
    return n ? s / n : std::numeric_limits<double>::quiet_NaN();
}

PathScreeningReport sequential_path(const MultiTaskDataset& ds, const LambdaGrid& grid, const SolveFn& solve,
                                    const PathOptions& opts) {
    const Index d = ds.num_features();
    const dual::LambdaMax lmax = dual::lambda_max(ds);
    grid.check_starts_at(lmax.value);

    PathScreeningReport report;
    const auto no_screen = [&](double lambda) {
        return ScreeningMask::from_scores(
            Eigen::VectorXd::Constant(d, std::numeric_limits<double>::infinity()), lambda);
    };

    // lambda_max: W* = 0 and theta* = y / lambda_max in closed form.
    dual::ReferenceSolution ref_max;
    dual::ReferenceSolution ref;
    {
        PathRecord rec;
        rec.lambda = grid[0];
        const auto t0 = Clock::now();
        if (opts.screen) {
            ref_max = dual::reference_at_lambda_max(ds);
            ref = ref_max;
            // Every row is zero here, so the certificate is vacuous.
            rec.mask = ScreeningMask::from_scores(Eigen::VectorXd::Zero(d), rec.lambda);
        } else {
            rec.mask = no_screen(rec.lambda);
        }
        rec.t_screen = seconds_since(t0);
        const auto t1 = Clock::now();
        try {
            if (opts.screen) {
                rec.W = WeightMatrix::zeros(ds);
                rec.kkt_residual = solver::kkt_residual(ds, rec.W, rec.lambda);
                rec.objective = solver::primal_objective(ds, rec.W, rec.lambda);
            } else {
                auto fr = solve(ds, rec.lambda, std::nullopt);
                rec.W = std::move(fr.W);
                rec.kkt_residual = fr.kkt_residual;
                rec.objective = fr.objective;
                rec.iterations = fr.iterations;
            }
        } catch (const solver::SolverFailure& e) {
            rec.W = e.best().W;
            rec.kkt_residual = e.best().kkt_residual;
            rec.objective = e.best().objective;
            rec.iterations = e.best().iterations;
            rec.status = RecordStatus::SolverFailure;
            report.completed = false;
            report.failure = e.what();
        }
        rec.t_solve = seconds_since(t1);
        fill_stats(rec, opts.inactive_threshold);
        report.records.push_back(std::move(rec));
        if (!report.completed) return report;
    }

    bool next_is_fallback = false;
    LazyCorrelations lazy(ds);
    bool lazy_active = false;
    for (std::size_t k = 1; k < grid.size(); ++k) {
        PathRecord rec;
        rec.lambda = grid[k];
        const WeightMatrix& W_prev = report.records.back().W;

        const auto t0 = Clock::now();
        if (opts.screen) {
            const bool lazy_ref = lazy_active && opts.reference == ReferenceMode::Sequential;
            const dual::ReferenceSolution& use = opts.reference == ReferenceMode::LambdaMax ? ref_max : ref;
            const dual::DualBall ball = dual::dual_ball(ds, use, rec.lambda);
            rec.ball_radius = ball.radius;
            rec.mask = ScreeningMask::from_scores(
                lazy_ref ? lazy.scores(ball)
                         : qp1qc::s_screen(ds, dual::center_correlations(ds, use, ball), ball.radius),
                rec.lambda);
            rec.fallback_reference = next_is_fallback && opts.reference == ReferenceMode::Sequential;
        } else {
            rec.mask = no_screen(rec.lambda);
        }
        rec.t_screen = seconds_since(t0);

        const auto t1 = Clock::now();
        const std::vector<Index> keep = rec.mask.kept_features();
        rec.W = WeightMatrix::zeros(ds);
        try {
            if (static_cast<Index>(keep.size()) == d) {
                std::optional<WeightMatrix> warm;
                if (opts.warm_start) warm = W_prev;
                auto fr = solve(ds, rec.lambda, warm);
                rec.W = std::move(fr.W);
                rec.iterations = fr.iterations;
            } else if (!keep.empty()) {
                const MultiTaskDataset sub = ds.select_features(keep);
                std::optional<WeightMatrix> warm;
                if (opts.warm_start) {
                    warm = WeightMatrix{Eigen::MatrixXd(static_cast<Index>(keep.size()), ds.num_tasks())};
                    for (std::size_t j = 0; j < keep.size(); ++j) {
                        warm->values.row(static_cast<Index>(j)) = W_prev.values.row(keep[j]);
                    }
                }
                auto fr = solve(sub, rec.lambda, warm);
                for (std::size_t j = 0; j < keep.size(); ++j) {
                    rec.W.values.row(keep[j]) = fr.W.values.row(static_cast<Index>(j));
                }
                rec.iterations = fr.iterations;
            }
        } catch (const solver::SolverFailure& e) {
            const auto& best = e.best().W;
            if (best.rows() == d) {
                rec.W = best;
            } else {
                for (std::size_t j = 0; j < keep.size(); ++j) {
                    rec.W.values.row(keep[j]) = best.values.row(static_cast<Index>(j));
                }
            }
            rec.iterations = e.best().iterations;
            rec.status = RecordStatus::SolverFailure;
            report.completed = false;
            report.failure = e.what();
        }
        rec.t_solve = seconds_since(t1);
        rec.objective = solver::primal_objective(ds, rec.W, rec.lambda);
        rec.kkt_residual = solver::kkt_residual(ds, rec.W, rec.lambda);
        fill_stats(rec, opts.inactive_threshold);
        const bool failed = rec.status != RecordStatus::Ok;

        if (!failed && opts.screen && opts.reference == ReferenceMode::Sequential && k + 1 < grid.size()) {
            // Building the next reference is screening work.
            const auto t2 = Clock::now();
            DualPoint theta = dual::dual_from_primal(ds, rec.W, rec.lambda);
            lazy.set_point(theta);
            lazy_active = false;
            if (lazy.infeasible(opts.feasibility_fallback)) {
                ref = ref_max;
                next_is_fallback = true;
            } else if (rec.lambda > (1.0 - 1e-9) * lmax.value) {
                // Next to lambda_max the normal is not y/lambda0 - theta0; take the full product.
                Eigen::MatrixXd corr = dual::correlations(ds, theta);
                ref = dual::reference_from_dual(ds, std::move(theta), rec.lambda, std::move(corr));
                next_is_fallback = false;
            } else {
                ref = dual::reference_from_dual(ds, std::move(theta), rec.lambda);
                lazy_active = true;
                next_is_fallback = false;
            }
            const double t_ref = seconds_since(t2);
            report.records.push_back(std::move(rec));
            report.records.back().t_screen += t_ref;
        } else {
            report.records.push_back(std::move(rec));
        }
        if (failed) break;
    }
    return report;
}

}  // namespace mtfl::screening
