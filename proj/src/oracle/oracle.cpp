#include "mtfl/oracle/oracle.hpp"

#include <cmath>

namespace mtfl::oracle {

double qp1qc_sphere_max(const qp1qc::Instance& inst, int samples, synth::Rng& rng) {
    const Index T = inst.size();
    Eigen::VectorXd u(T);
    double best = 0.0;
    for (int s = 0; s < samples; ++s) {
        double nrm = 0.0;
        while (nrm == 0.0) {
            for (Index t = 0; t < T; ++t) u[t] = rng.normal();
            nrm = u.norm();
        }
        u *= inst.delta / nrm;
        double v = 0.0;
        for (Index t = 0; t < T; ++t) {
            const double term = std::abs(inst.c[t]) + std::abs(u[t]) * std::sqrt(inst.a[t]);
            v += term * term;
        }
        best = std::max(best, v);
    }
    return best;
}

double secular_root_bisection(const qp1qc::Instance& inst, double lo, double hi, double tol) {
    auto norm_u = [&](double alpha) {
        double s = 0.0;
        for (Index t = 0; t < inst.size(); ++t) {
            const double u = 2.0 * inst.b[t] / (alpha - 2.0 * inst.a[t]);
            s += u * u;
        }
        return std::sqrt(s);
    };
    while (hi - lo > tol * std::max(1.0, std::abs(hi))) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (norm_u(mid) > inst.delta) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double g_loops(const MultiTaskDataset& ds, const Eigen::VectorXd& theta, Index ell) {
    double g = 0.0;
    Index offset = 0;
    for (Index t = 0; t < ds.num_tasks(); ++t) {
        const auto& X = ds.X(t);
        double dot = 0.0;
        for (Index i = 0; i < X.rows(); ++i) dot += X(i, ell) * theta[offset + i];
        g += dot * dot;
        offset += X.rows();
    }
    return g;
}

Eigen::VectorXd residual_loops(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
    Eigen::VectorXd r(X.rows());
    for (Index i = 0; i < X.rows(); ++i) {
        double s = 0.0;
        for (Index j = 0; j < X.cols(); ++j) s += X(i, j) * w[j];
        r[i] = y[i] - s;
    }
    return r;
}

Eigen::VectorXd lasso_coordinate_descent(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                                         double tol, int max_sweeps) {
    const Index p = X.cols();
    Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd r = y;
    const Eigen::VectorXd sq = X.colwise().squaredNorm().transpose();
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double max_move = 0.0;
        for (Index j = 0; j < p; ++j) {
            if (sq[j] == 0.0) continue;
            const double z = X.col(j).dot(r) + sq[j] * w[j];
            const double shrunk = std::copysign(std::max(std::abs(z) - lambda, 0.0), z) / sq[j];
            const double move = shrunk - w[j];
            if (move != 0.0) {
                r -= move * X.col(j);
                w[j] = shrunk;
                max_move = std::max(max_move, std::abs(move));
            }
        }
        if (max_move < tol) break;
    }
    return w;
}

qp1qc::Instance random_instance(Index T, synth::Rng& rng) {
    Eigen::VectorXd norms(T);
    Eigen::VectorXd corr(T);
    for (Index t = 0; t < T; ++t) {
        norms[t] = 0.1 + 2.9 * rng.uniform();
        corr[t] = rng.normal();
    }
    Index top = 0;
    for (Index t = 1; t < T; ++t) {
        if (norms[t] > norms[top]) top = t;
    }
    if (T > 1 && rng.uniform() < 0.25) {
        const Index other = (top + 1) % T;
        norms[other] = norms[top];
    }
    if (rng.uniform() < 0.125) {
        for (Index t = 0; t < T; ++t) {
            if (norms[t] == norms[top]) corr[t] = 0.0;
        }
    }
    const double delta = std::exp(std::log(1e-3) + rng.uniform() * (std::log(10.0) - std::log(1e-3)));
    return qp1qc::make_instance(norms, corr, delta);
}

Eigen::VectorXd point_in_ball(const Eigen::VectorXd& center, double radius, synth::Rng& rng) {
    const Index n = center.size();
    Eigen::VectorXd dir(n);
    double nrm = 0.0;
    while (nrm == 0.0) {
        for (Index i = 0; i < n; ++i) dir[i] = rng.normal();
        nrm = dir.norm();
    }
    const double scale = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(n));
    return center + (scale / nrm) * dir;
}

}  // namespace mtfl::oracle
