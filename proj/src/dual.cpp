#include "mtfl/dual.hpp"

#include <cmath>
#include <sstream>
#include <vector>

namespace mtfl::dual {

namespace {

void check_theta(const MultiTaskDataset& ds, const DualPoint& theta) {
    if (!theta.compatible_with(ds)) {
        throw Error(ErrorCode::DimensionMismatch, "dual point blocks do not match the dataset tasks");
    }
}

void check_feature(const MultiTaskDataset& ds, Index ell) {
    if (ell < 0 || ell >= ds.num_features()) {
        std::ostringstream os;
        os << "feature " << ell << " not in [0, " << ds.num_features() << ")";
        throw Error(ErrorCode::IndexOutOfRange, os.str());
    }
}

bool near_lambda_max(double lambda0, double lmax) { return std::abs(lambda0 - lmax) <= 1e-12 * lmax; }

}  // namespace

Eigen::MatrixXd correlations(const MultiTaskDataset& ds, const DualPoint& theta) {
    check_theta(ds, theta);
    Eigen::MatrixXd M(ds.num_features(), ds.num_tasks());
    for (Index t = 0; t < ds.num_tasks(); ++t) {
        M.col(t).noalias() = ds.X(t).transpose() * theta.block(t);
    }
    return M;
}

double g_ell(const MultiTaskDataset& ds, const DualPoint& theta, Index ell) {
    check_theta(ds, theta);
    check_feature(ds, ell);
    double g = 0.0;
    for (Index t = 0; t < ds.num_tasks(); ++t) {
        const double c = ds.X(t).col(ell).dot(theta.block(t));
        g += c * c;
    }
    return g;
}

Eigen::VectorXd g_all(const MultiTaskDataset& ds, const DualPoint& theta) {
    return correlations(ds, theta).rowwise().squaredNorm();
}

Eigen::VectorXd g_gradient(const MultiTaskDataset& ds, const DualPoint& theta, Index ell) {
    check_theta(ds, theta);
    check_feature(ds, ell);
    Eigen::VectorXd grad(ds.total_samples());
    for (Index t = 0; t < ds.num_tasks(); ++t) {
        const auto x = ds.X(t).col(ell);
        grad.segment(ds.offset(t), ds.samples(t)) = 2.0 * x.dot(theta.block(t)) * x;
    }
    return grad;
}

LambdaMax lambda_max(const MultiTaskDataset& ds) {
    // g_l(y) from the cached <x_l^(t), y_t>.
    const Eigen::VectorXd g = ds.response_correlations().rowwise().squaredNorm();
    LambdaMax out;
    double best = -1.0;
    for (Index l = 0; l < g.size(); ++l) {
        if (g[l] > best) {
            best = g[l];
            out.argmax = l;
        }
    }
    out.value = std::sqrt(best);
    if (!(out.value > 0.0)) {
        throw Error(ErrorCode::DegenerateData, "lambda_max is zero: every feature is orthogonal to its response");
    }
    return out;
}

DualPoint dual_from_primal(const MultiTaskDataset& ds, const WeightMatrix& W, double lambda) {
    if (!(lambda > 0.0)) {
        throw Error(ErrorCode::NonPositiveLambda, "lambda must be positive");
    }
    validate_weights(ds, W);
    std::vector<Index> rows;
    for (Index l = 0; l < W.rows(); ++l) {
        if (W.values.row(l).squaredNorm() > 0.0) rows.push_back(l);
    }
    Eigen::VectorXd theta(ds.total_samples());
    for (Index t = 0; t < ds.num_tasks(); ++t) {
        auto block = theta.segment(ds.offset(t), ds.samples(t));
        block = ds.y(t);
        // Path solutions are row-sparse; only nonzero rows touch X.
        for (Index l : rows) block.noalias() -= W.values(l, t) * ds.X(t).col(l);
        block /= lambda;
    }
    return DualPoint(std::move(theta), ds);
}

double dual_feasibility_violation(const MultiTaskDataset& ds, const DualPoint& theta) {
    return std::max(0.0, g_all(ds, theta).maxCoeff() - 1.0);
}

double dual_objective(const MultiTaskDataset& ds, const DualPoint& theta, double lambda) {
    check_theta(ds, theta);
    const auto& y = ds.stacked_response();
    return 0.5 * y.squaredNorm() - 0.5 * lambda * lambda * (y / lambda - theta.values()).squaredNorm();
}

DualPoint feasible_scaling(const MultiTaskDataset& ds, const DualPoint& theta) {
    const double gmax = g_all(ds, theta).maxCoeff();
    const double scale = 1.0 / std::max(1.0, std::sqrt(gmax));
    DualPoint out = theta;
    out.values() *= scale;
    return out;
}

Eigen::VectorXd normal_vector(const MultiTaskDataset& ds, const DualPoint& theta0, double lambda0) {
    check_theta(ds, theta0);
    const LambdaMax lmax = lambda_max(ds);
    if (!(lambda0 > 0.0) || (lambda0 > lmax.value && !near_lambda_max(lambda0, lmax.value))) {
        std::ostringstream os;
        os << "lambda0 = " << lambda0 << " outside (0, lambda_max = " << lmax.value << "]";
        throw Error(ErrorCode::LambdaOutOfRange, os.str());
    }
    const auto& y = ds.stacked_response();
    Eigen::VectorXd n;
    if (near_lambda_max(lambda0, lmax.value)) {
        const Eigen::VectorXd y_over = y / lmax.value;
        if ((theta0.values() - y_over).norm() > 1e-10 * std::max(1.0, y_over.norm())) {
            throw Error(ErrorCode::LambdaOutOfRange, "at lambda_max the reference dual point must be y/lambda_max");
        }
        n = g_gradient(ds, DualPoint(y_over, ds), lmax.argmax);
    } else {
        n = y / lambda0 - theta0.values();
    }
    if (n.norm() < 1e-14 * y.norm() / lambda0) {
        throw Error(ErrorCode::ZeroNormal, "normal vector vanishes at the reference point");
    }
    return n;
}

ReferenceSolution reference_at_lambda_max(const MultiTaskDataset& ds) {
    const LambdaMax lmax = lambda_max(ds);
    DualPoint theta0(ds.stacked_response() / lmax.value, ds);
    Eigen::VectorXd n0 = normal_vector(ds, theta0, lmax.value);
    ReferenceSolution ref{lmax.value, std::move(theta0), std::move(n0)};
    ref.theta0_corr = ds.response_correlations() / lmax.value;
    ref.n0_corr = correlations(ds, DualPoint(ref.n0, ds));
    return ref;
}

ReferenceSolution reference_from_dual(const MultiTaskDataset& ds, DualPoint theta0, double lambda0) {
    Eigen::VectorXd n0;
    try {
        n0 = normal_vector(ds, theta0, lambda0);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::ZeroNormal) throw;
        n0 = Eigen::VectorXd::Zero(ds.total_samples());
    }
    return ReferenceSolution{lambda0, std::move(theta0), std::move(n0)};
}

ReferenceSolution reference_from_dual(const MultiTaskDataset& ds, DualPoint theta0, double lambda0,
                                      Eigen::MatrixXd theta0_corr) {
    ReferenceSolution ref = reference_from_dual(ds, std::move(theta0), lambda0);
    if (theta0_corr.rows() != ds.num_features() || theta0_corr.cols() != ds.num_tasks()) {
        throw Error(ErrorCode::DimensionMismatch, "reference correlations must be d x T");
    }
    // Below lambda_max the normal is y/lambda0 - theta0, so its correlations are free.
    if (ref.n0.isZero(0.0)) {
        ref.n0_corr = Eigen::MatrixXd::Zero(ds.num_features(), ds.num_tasks());
    } else if (near_lambda_max(lambda0, lambda_max(ds).value)) {
        ref.n0_corr = correlations(ds, DualPoint(ref.n0, ds));
    } else {
        ref.n0_corr = ds.response_correlations() / lambda0 - theta0_corr;
    }
    ref.theta0_corr = std::move(theta0_corr);
    return ref;
}

DualBall dual_ball(const MultiTaskDataset& ds, const ReferenceSolution& ref, double lambda) {
    check_theta(ds, ref.theta0);
    if (!(lambda > 0.0) || !(lambda < ref.lambda0)) {
        std::ostringstream os;
        os << "target lambda = " << lambda << " must lie in (0, lambda0 = " << ref.lambda0 << ")";
        throw Error(ErrorCode::LambdaOutOfRange, os.str());
    }
    const auto& y = ds.stacked_response();
    const Eigen::VectorXd r = y / lambda - ref.theta0.values();

    DualBall ball;
    ball.lambda = lambda;
    ball.lambda0 = ref.lambda0;

    const double n_norm = ref.n0.norm();
    if (n_norm < 1e-14 * y.norm() / ref.lambda0) {
        // Nonexpansiveness alone still gives ||theta*(lambda) - (theta0 + r/2)|| <= ||r||/2.
        ball.center = ref.theta0.values() + 0.5 * r;
        ball.radius = 0.5 * r.norm();
        ball.projected = false;
        ball.n0_coeff = 0.0;
        return ball;
    }

    const double rn = r.dot(ref.n0);
    if (rn < -sign_tolerance(r.norm(), n_norm)) {
        std::ostringstream os;
        os << "<r, n0> = " << rn << " < 0; the reference solution is inconsistent";
        throw Error(ErrorCode::NegativeInnerProduct, os.str());
    }
    ball.n0_coeff = rn / (n_norm * n_norm);
    const Eigen::VectorXd r_perp = r - ball.n0_coeff * ref.n0;
    ball.center = ref.theta0.values() + 0.5 * r_perp;
    ball.radius = 0.5 * r_perp.norm();
    return ball;
}

Eigen::MatrixXd center_correlations(const MultiTaskDataset& ds, const ReferenceSolution& ref, const DualBall& ball) {
    const bool cached = ref.theta0_corr.rows() == ds.num_features() && ref.theta0_corr.cols() == ds.num_tasks() &&
                        ref.n0_corr.rows() == ds.num_features() && ref.n0_corr.cols() == ds.num_tasks();
    if (!cached) return correlations(ds, DualPoint(ball.center, ds));
    // center = theta0 + (y/lambda - theta0 - kappa n0) / 2, and X^T is linear.
    return 0.5 * ref.theta0_corr + (0.5 / ball.lambda) * ds.response_correlations() - (0.5 * ball.n0_coeff) * ref.n0_corr;
}

}  // namespace mtfl::dual
