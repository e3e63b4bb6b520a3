#include "mtfl/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "mtfl/dual.hpp"

namespace mtfl::solver {

namespace {

void check_lambda(double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw Error(ErrorCode::NonPositiveLambda, "lambda must be positive and finite");
    }
}

/// Per-task residuals r_t = y_t - X_t w_t.
std::vector<Eigen::VectorXd> residuals(const MultiTaskDataset& ds, const Eigen::MatrixXd& W) {
    std::vector<Eigen::VectorXd> r(static_cast<std::size_t>(ds.num_tasks()));
    for (Index t = 0; t < ds.num_tasks(); ++t) {
        r[t] = ds.y(t);
        r[t].noalias() -= ds.X(t) * W.col(t);
    }
    return r;
}

double loss_of(const std::vector<Eigen::VectorXd>& r) {
    double s = 0.0;
    for (const auto& rt : r) s += rt.squaredNorm();
    return 0.5 * s;
}

double l21(const Eigen::MatrixXd& W) { return W.rowwise().norm().sum(); }

/// Row-wise group soft-thresholding: w^l <- max(0, 1 - tau/||v^l||) v^l.
void group_shrink(const Eigen::MatrixXd& V, double tau, Eigen::MatrixXd& out) {
    out.resize(V.rows(), V.cols());
    for (Index l = 0; l < V.rows(); ++l) {
        const double nv = V.row(l).norm();
        const double factor = nv > tau ? 1.0 - tau / nv : 0.0;
        if (factor > 0.0) {
            out.row(l) = factor * V.row(l);
        } else {
            out.row(l).setZero();
        }
    }
}

// Gradient of the smooth part: column t is -X_t^T r_t.
void gradient(const MultiTaskDataset& ds, const std::vector<Eigen::VectorXd>& r, Eigen::MatrixXd& G) {
    G.resize(ds.num_features(), ds.num_tasks());
#pragma omp parallel for schedule(static)
    for (Index t = 0; t < ds.num_tasks(); ++t) {
        G.col(t).noalias() = -(ds.X(t).transpose() * r[t]);
    }
}

WeightMatrix initial_point(const MultiTaskDataset& ds, const SolverConfig& cfg) {
    if (cfg.warm_start) {
        validate_weights(ds, *cfg.warm_start);
        return *cfg.warm_start;
    }
    return WeightMatrix::zeros(ds);
}

FitResult finish(const MultiTaskDataset& ds, double lambda, Eigen::MatrixXd W, int iters, double kkt) {
    FitResult res;
    res.W = WeightMatrix{std::move(W)};
    res.kkt_residual = kkt;
    res.objective = primal_objective(ds, res.W, lambda);
    res.iterations = iters;
    return res;
}

[[noreturn]] void fail(const MultiTaskDataset& ds, double lambda, Eigen::MatrixXd W, int iters, double kkt) {
    std::ostringstream os;
    os << "no KKT certificate after " << iters << " iterations (residual " << kkt << ")";
    throw SolverFailure(os.str(), finish(ds, lambda, std::move(W), iters, kkt));
}

FitResult fit_proximal(const MultiTaskDataset& ds, double lambda, const SolverConfig& cfg) {
    Eigen::MatrixXd W = initial_point(ds, cfg).values;
    Eigen::MatrixXd Z = W;
    Eigen::MatrixXd W_next;
    Eigen::MatrixXd G;
    // Power iteration approaches ||X||^2 from below; a small margin keeps 1/L a valid step.
    double L = std::max(lipschitz_constant(ds, 100, 1e-10, cfg.seed) * 1.01, 1e-300);
    const bool monotone = cfg.step_rule == StepRule::Backtracking;
    if (monotone) L = std::max(L * 0.5, 1e-300);

    double momentum = 1.0;
    auto r_w = residuals(ds, W);
    double f_w = loss_of(r_w) + lambda * l21(W);
    double best_kkt = std::numeric_limits<double>::infinity();
    const int check_every = 10;

    for (int it = 1; it <= cfg.max_iters; ++it) {
        const auto r_z = residuals(ds, Z);
        gradient(ds, r_z, G);
        const double loss_z = loss_of(r_z);
        std::vector<Eigen::VectorXd> r_next;
        while (true) {
            group_shrink(Z - G / L, lambda / L, W_next);
            if (!monotone) break;
            r_next = residuals(ds, W_next);
            const Eigen::MatrixXd D = W_next - Z;
            const double upper = loss_z + (G.array() * D.array()).sum() + 0.5 * L * D.squaredNorm();
            if (loss_of(r_next) <= upper * (1.0 + 1e-15) + 1e-300) break;
            L *= 2.0;
        }

        if (monotone) {
            const double f_next = loss_of(r_next) + lambda * l21(W_next);
            if (f_next > f_w) {
                // Reject and restart momentum from the last accepted point.
                momentum = 1.0;
                Z = W;
                continue;
            }
            f_w = f_next;
            r_w = std::move(r_next);
        }

        // Gradient-based adaptive restart.
        const bool restart = ((Z - W_next).array() * (W_next - W).array()).sum() > 0.0;
        const double next_momentum = restart ? 1.0 : 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
        if (restart) {
            Z = W_next;
        } else {
            Z = W_next + ((momentum - 1.0) / next_momentum) * (W_next - W);
        }
        momentum = next_momentum;
        W.swap(W_next);

        if (it % check_every == 0 || it == 1) {
            const double kkt = kkt_residual(ds, WeightMatrix{W}, lambda);
            best_kkt = std::min(best_kkt, kkt);
            if (kkt <= cfg.kkt_tol) {
                return finish(ds, lambda, std::move(W), it, kkt);
            }
        }
    }
    fail(ds, lambda, std::move(W), cfg.max_iters, kkt_residual(ds, WeightMatrix{W}, lambda));
}

/// Solves min_v 1/2 sum_t a_t v_t^2 - g^T v + lambda ||v|| given ||g|| > lambda.
/// The minimizer is v_t = g_t s / (a_t s + lambda) with s = ||v|| the root of
/// sum_t g_t^2 / (a_t s + lambda)^2 = 1.
double row_norm_root(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& g,
                     double lambda) {
    const double a_max = a.maxCoeff();
    // At s0 every denominator is at most the one for a_max, so f(s0) >= 0 and
    // Newton on the convex decreasing f approaches the root monotonically.
    double s = (g.norm() - lambda) / a_max;
    for (int k = 0; k < 100; ++k) {
        double f = -1.0;
        double df = 0.0;
        for (Index t = 0; t < a.size(); ++t) {
            const double den = a[t] * s + lambda;
            const double q = g[t] * g[t] / (den * den);
            f += q;
            df -= 2.0 * q * a[t] / den;
        }
        if (f <= 0.0 || df >= 0.0) break;
        const double next = s - f / df;
        if (!(next > s)) break;
        s = next;
    }
    return s;
}

FitResult fit_block_coordinate(const MultiTaskDataset& ds, double lambda, const SolverConfig& cfg) {
    const Index d = ds.num_features();
    const Index T = ds.num_tasks();
    const auto& A = ds.column_sq_norms();
    Eigen::MatrixXd W = initial_point(ds, cfg).values;
    auto r = residuals(ds, W);

    Eigen::VectorXd g(T);
    Eigen::VectorXd a(T);
    Eigen::VectorXd w_new(T);

    // Returns ||X_l (w_new - w_old)||, the size of the change to the residuals.
    auto update_row = [&](Index l) -> double {
        for (Index t = 0; t < T; ++t) {
            a[t] = A(l, t);
            g[t] = ds.X(t).col(l).dot(r[t]) + a[t] * W(l, t);
        }
        const double gn = g.norm();
        if (gn <= lambda) {
            w_new.setZero();
        } else {
            const double s = row_norm_root(a, g, lambda);
            for (Index t = 0; t < T; ++t) w_new[t] = g[t] * s / (a[t] * s + lambda);
        }
        double effect = 0.0;
        for (Index t = 0; t < T; ++t) {
            const double delta = w_new[t] - W(l, t);
            if (delta != 0.0) {
                r[t].noalias() -= delta * ds.X(t).col(l);
                effect += a[t] * delta * delta;
            }
            W(l, t) = w_new[t];
        }
        return std::sqrt(effect);
    };

    const double x_scale = std::sqrt(A.rowwise().maxCoeff().maxCoeff());
    // Inner sweeps stop once no row moved the residual by more than this; the
    // induced change in any m^l is then at most x_scale * inner_tol / lambda.
    double inner_tol = 0.1 * cfg.kkt_tol * lambda / std::max(x_scale, 1e-300);
    double kkt = std::numeric_limits<double>::infinity();
    int sweeps = 0;
    std::vector<Index> active;

    while (sweeps < cfg.max_iters) {
        ++sweeps;
        double max_effect = 0.0;
        for (Index l = 0; l < d; ++l) max_effect = std::max(max_effect, update_row(l));

        active.clear();
        for (Index l = 0; l < d; ++l) {
            if (W.row(l).squaredNorm() > 0.0) active.push_back(l);
        }
        while (max_effect > inner_tol && sweeps < cfg.max_iters) {
            ++sweeps;
            max_effect = 0.0;
            for (Index l : active) max_effect = std::max(max_effect, update_row(l));
        }

        // Residuals drift from repeated rank-one updates; refresh before certifying.
        r = residuals(ds, W);
        kkt = kkt_residual(ds, WeightMatrix{W}, lambda);
        if (kkt <= cfg.kkt_tol) {
            return finish(ds, lambda, std::move(W), sweeps, kkt);
        }
        inner_tol = std::max(inner_tol * 0.1, 1e-300);
    }
    fail(ds, lambda, std::move(W), sweeps, kkt);
}

}  // namespace

void validate_config(const SolverConfig& cfg) {
    if (!(cfg.kkt_tol > 0.0)) {
        throw Error(ErrorCode::InvalidConfig, "kkt_tol must be positive");
    }
    if (cfg.max_iters < 1) {
        throw Error(ErrorCode::InvalidConfig, "max_iters must be at least 1");
    }
}

FitResult fit(const MultiTaskDataset& ds, double lambda, const SolverConfig& cfg) {
    check_lambda(lambda);
    validate_config(cfg);
    // W* = 0 exactly whenever lambda >= lambda_max; no iteration needed. A zero
    // response (no lambda_max) has the same answer for every lambda.
    bool closed_form = false;
    try {
        closed_form = lambda >= dual::lambda_max(ds).value;
    } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateData) throw;
        closed_form = true;
    }
    if (closed_form) {
        FitResult r;
        r.W = WeightMatrix::zeros(ds);
        r.kkt_residual = kkt_residual(ds, r.W, lambda);
        r.objective = primal_objective(ds, r.W, lambda);
        return r;
    }
    switch (cfg.algorithm) {
        case Algorithm::ProximalGradient: return fit_proximal(ds, lambda, cfg);
        case Algorithm::BlockCoordinate: return fit_block_coordinate(ds, lambda, cfg);
    }
    throw Error(ErrorCode::InvalidConfig, "unknown algorithm");
}

double primal_objective(const MultiTaskDataset& ds, const WeightMatrix& W, double lambda) {
    validate_weights(ds, W);
    return loss_of(residuals(ds, W.values)) + lambda * l21(W.values);
}

Eigen::VectorXd kkt_row_residuals(const MultiTaskDataset& ds, const WeightMatrix& W, double lambda) {
    const DualPoint theta = dual::dual_from_primal(ds, W, lambda);
    const Eigen::MatrixXd M = dual::correlations(ds, theta);
    Eigen::VectorXd res(ds.num_features());
    for (Index l = 0; l < ds.num_features(); ++l) {
        const double wn = W.values.row(l).norm();
        if (wn > 0.0) {
            res[l] = (M.row(l) - W.values.row(l) / wn).norm();
        } else {
            res[l] = std::max(0.0, M.row(l).norm() - 1.0);
        }
    }
    return res;
}

double kkt_residual(const MultiTaskDataset& ds, const WeightMatrix& W, double lambda) {
    return kkt_row_residuals(ds, W, lambda).maxCoeff();
}

double duality_gap(const MultiTaskDataset& ds, const WeightMatrix& W, double lambda) {
    const DualPoint theta = dual::feasible_scaling(ds, dual::dual_from_primal(ds, W, lambda));
    return primal_objective(ds, W, lambda) - dual::dual_objective(ds, theta, lambda);
}

double lipschitz_constant(const MultiTaskDataset& ds, int iters, double tol, std::uint64_t seed) {
    double best = 0.0;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    for (Index t = 0; t < ds.num_tasks(); ++t) {
        const auto& X = ds.X(t);
        Eigen::VectorXd v(X.cols());
        for (Index j = 0; j < v.size(); ++j) v[j] = normal(rng);
        v.normalize();
        double est = 0.0;
        for (int k = 0; k < iters; ++k) {
            Eigen::VectorXd next = X.transpose() * (X * v);
            const double nn = next.norm();
            if (nn == 0.0) {
                est = 0.0;
                break;
            }
            const double prev = est;
            est = nn;
            next /= nn;
            v.swap(next);
            if (std::abs(est - prev) <= tol * est) break;
        }
        best = std::max(best, est);
    }
    return best;
}

MultiTaskDataset reduce_weighted(const MultiTaskDataset& ds, std::span<const double> weights) {
    if (static_cast<Index>(weights.size()) != ds.num_tasks()) {
        throw Error(ErrorCode::DimensionMismatch, "need one weight per task");
    }
    std::vector<Task> tasks;
    for (Index t = 0; t < ds.num_tasks(); ++t) {
        const double w = weights[static_cast<std::size_t>(t)];
        if (!(w > 0.0) || !std::isfinite(w)) {
            throw Error(ErrorCode::NonPositiveWeight, "task weights must be positive");
        }
        const double s = 1.0 / std::sqrt(w);
        tasks.push_back(Task{ds.X(t) * s, ds.y(t) * s});
    }
    return MultiTaskDataset(std::move(tasks));
}

MultiTaskDataset reduce_frobenius(const MultiTaskDataset& ds, double rho) {
    if (!(rho > 0.0) || !std::isfinite(rho)) {
        throw Error(ErrorCode::NonPositiveRho, "rho must be positive");
    }
    const Index d = ds.num_features();
    const double diag = std::sqrt(2.0 * rho);
    std::vector<Task> tasks;
    for (Index t = 0; t < ds.num_tasks(); ++t) {
        const Index n = ds.samples(t);
        Task task;
        task.X = Eigen::MatrixXd::Zero(n + d, d);
        task.X.topRows(n) = ds.X(t);
        task.X.bottomRows(d).diagonal().setConstant(diag);
        task.y = Eigen::VectorXd::Zero(n + d);
        task.y.head(n) = ds.y(t);
        tasks.push_back(std::move(task));
    }
    return MultiTaskDataset(std::move(tasks));
}

}  // namespace mtfl::solver
