#pragma once

#include <Eigen/Core>

#include "mtfl/core.hpp"

namespace mtfl::dual {

/// d x T matrix M with M(l, t) = <x_l^(t), theta_t>. Row l is m^l.
Eigen::MatrixXd correlations(const MultiTaskDataset& ds, const DualPoint& theta);

/// g_l(theta) = sum_t <x_l^(t), theta_t>^2.
double g_ell(const MultiTaskDataset& ds, const DualPoint& theta, Index ell);

/// g_l(theta) for every feature.
Eigen::VectorXd g_all(const MultiTaskDataset& ds, const DualPoint& theta);

/// Gradient of g_l at theta; block t is 2 <x_l^(t), theta_t> x_l^(t).
Eigen::VectorXd g_gradient(const MultiTaskDataset& ds, const DualPoint& theta, Index ell);

struct LambdaMax {
    double value = 0.0;
    Index argmax = 0;  // smallest maximizing feature index
};

/// Smallest lambda with W*(lambda) = 0. Throws DegenerateData when it is 0.
LambdaMax lambda_max(const MultiTaskDataset& ds);

/// theta_t = (y_t - X_t w_t) / lambda.
DualPoint dual_from_primal(const MultiTaskDataset& ds, const WeightMatrix& W, double lambda);

/// max(0, max_l g_l(theta) - 1).
double dual_feasibility_violation(const MultiTaskDataset& ds, const DualPoint& theta);

/// Dual objective 1/2 ||y||^2 - lambda^2/2 ||y/lambda - theta||^2.
double dual_objective(const MultiTaskDataset& ds, const DualPoint& theta, double lambda);

/// theta scaled by 1/max(1, sqrt(max_l g_l(theta))), which is dual feasible.
DualPoint feasible_scaling(const MultiTaskDataset& ds, const DualPoint& theta);

/**
 * A vector in the normal cone of the dual feasible set at theta*(lambda0).
 *
 * Below lambda_max this is y/lambda0 - theta0. At lambda_max the residual is
 * zero, so the gradient of the binding constraint g_{l*} at y/lambda_max is
 * used instead. Throws LambdaOutOfRange outside (0, lambda_max], and
 * ZeroNormal when the result is numerically zero.
 */
Eigen::VectorXd normal_vector(const MultiTaskDataset& ds, const DualPoint& theta0, double lambda0);

/// Dual optimum at a reference lambda0, plus the normal-cone direction there.
struct ReferenceSolution {
    double lambda0 = 0.0;
    DualPoint theta0;
    Eigen::VectorXd n0;  // zero vector when the normal degenerated
    /// Optional d x T caches of X_t^T theta0_t and X_t^T n0_t; empty when unknown.
    Eigen::MatrixXd theta0_corr{};
    Eigen::MatrixXd n0_corr{};
};

/// Reference at lambda_max, where theta* = y/lambda_max is known in closed form.
ReferenceSolution reference_at_lambda_max(const MultiTaskDataset& ds);

/// Reference built from a (numerically) optimal primal solution at lambda0.
/// A degenerate normal is stored as zero; dual_ball then uses the unprojected ball.
ReferenceSolution reference_from_dual(const MultiTaskDataset& ds, DualPoint theta0, double lambda0);

/// Same, reusing theta0_corr = correlations(ds, theta0) (typically left over
/// from the feasibility check) so later balls need no pass over X.
ReferenceSolution reference_from_dual(const MultiTaskDataset& ds, DualPoint theta0, double lambda0,
                                      Eigen::MatrixXd theta0_corr);

/// Ball {theta : ||theta - center|| <= radius} certified to contain theta*(lambda).
struct DualBall {
    Eigen::VectorXd center;
    double radius = 0.0;
    double lambda = 0.0;
    double lambda0 = 0.0;
    bool projected = true;  // false for the fallback ball without the normal projection
    double n0_coeff = 0.0;  // <r, n0> / ||n0||^2, the component removed from r
};

DualBall dual_ball(const MultiTaskDataset& ds, const ReferenceSolution& ref, double lambda);

/// d x T matrix of <x_l^(t), center_t>: from the reference caches when
/// present, otherwise by a pass over X.
Eigen::MatrixXd center_correlations(const MultiTaskDataset& ds, const ReferenceSolution& ref, const DualBall& ball);

/// Relative scale for sign checks: 1e-9 * ||a|| * ||b||.
inline double sign_tolerance(double norm_a, double norm_b) { return 1e-9 * norm_a * norm_b; }

}  // namespace mtfl::dual
