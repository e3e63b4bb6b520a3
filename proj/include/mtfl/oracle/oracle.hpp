#pragma once

// Independent reference computations. Nothing here calls into the dual,
// qp1qc or solver implementations; they are the yardsticks those are
// checked against.

#include <Eigen/Core>

#include "mtfl/core.hpp"
#include "mtfl/qp1qc.hpp"
#include "mtfl/synth.hpp"

namespace mtfl::oracle {

/// Best value of sum_t (|c_t| + |u_t| ||x_t||)^2 over `samples` uniform points
/// of the sphere ||u|| = delta. Never exceeds the true maximum.
double qp1qc_sphere_max(const qp1qc::Instance& inst, int samples, synth::Rng& rng);

/// Root of ||(H + alpha I)^{-1} q|| = delta on (lo, hi) by plain bisection,
/// evaluating u_t = 2 b_t / (alpha - 2 a_t) directly.
double secular_root_bisection(const qp1qc::Instance& inst, double lo, double hi, double tol = 1e-12);

/// sum_t <x_l^(t), theta_t>^2 with explicit loops.
double g_loops(const MultiTaskDataset& ds, const Eigen::VectorXd& theta, Index ell);

/// y - X w with explicit loops.
Eigen::VectorXd residual_loops(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w);

/// Single-task lasso  min 1/2 ||y - X w||^2 + lambda ||w||_1  by cyclic
/// coordinate descent, iterated until the largest coordinate move is below tol.
Eigen::VectorXd lasso_coordinate_descent(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                                         double tol = 1e-14, int max_sweeps = 1000000);

/// Random instance with T tasks: column norms in [0.1, 3], center
/// correlations ~ N(0, 1), radius log-uniform in [1e-3, 10]. With
/// probability 1/4 two tasks share the top norm, and with probability 1/8
/// the top-set correlations are zeroed so the closed-form branch can occur.
qp1qc::Instance random_instance(Index T, synth::Rng& rng);

/// Uniform random point of the ball ||v - center|| <= radius.
Eigen::VectorXd point_in_ball(const Eigen::VectorXd& center, double radius, synth::Rng& rng);

}  // namespace mtfl::oracle
