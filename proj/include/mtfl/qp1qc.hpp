#pragma once

#include <Eigen/Core>

#include "mtfl/core.hpp"
#include "mtfl/dual.hpp"

namespace mtfl::qp1qc {

/**
 * Diagonal trust-region style subproblem for one feature l:
 *
 *     min_{||u|| <= delta}  1/2 u^T H u + q^T u,   H = -diag(2a),  q = -2b,
 *
 * with a_t = ||x_l^(t)||^2, b_t = ||x_l^(t)|| |c_t| and c_t = <x_l^(t), o_t>.
 * Its negated optimum plus sum_t c_t^2 is the largest value of g_l over the
 * dual ball with center o and radius delta.
 */
struct Instance {
    Eigen::VectorXd a;
    Eigen::VectorXd b;
    Eigen::VectorXd c;
    double delta = 0.0;

    Index size() const { return a.size(); }
    /// max_t a_t. The PSD threshold for H + alpha I is 2 * rho().
    double rho() const { return a.size() ? a.maxCoeff() : 0.0; }
};

/// Builds the instance from per-task column norms and center correlations.
Instance make_instance(const Eigen::Ref<const Eigen::VectorXd>& col_norms,
                       const Eigen::Ref<const Eigen::VectorXd>& center_corr, double delta);

enum class Branch { PointBall, ClosedForm, Newton };
const char* to_string(Branch b);

struct Solution {
    double alpha_star = 0.0;
    Eigen::VectorXd u_star;
    double s_value = 0.0;
    Branch branch = Branch::ClosedForm;
    int newton_iters = 0;
};

struct NewtonOptions {
    int max_iters = 50;
    /// Stop once | ||u_k|| - delta | <= stop_tol * max(delta, 1).
    double stop_tol = 1e-14;
    /// Fail with NoConvergence if the final error exceeds this (same scaling).
    double fail_tol = 1e-10;
};

Solution solve(const Instance& inst, const NewtonOptions& opts = {});

/// ||(H + alpha I)^{-1} q||^{-1} - delta^{-1}, evaluated with alpha = 2 rho + shift.
double secular(const Instance& inst, double shift);

/// The instance for feature `ell` against the given dual ball.
Instance build_instance(const MultiTaskDataset& ds, const dual::DualBall& ball, Index ell);

/// max over the ball of g_l.
double s_ell(const MultiTaskDataset& ds, const dual::DualBall& ball, Index ell);

/// s_l for every feature, reusing one pass of X_t^T o_t.
Eigen::VectorXd s_all(const MultiTaskDataset& ds, const dual::DualBall& ball);

/// s_l for every feature from precomputed center correlations (d x T).
Eigen::VectorXd s_all(const MultiTaskDataset& ds, const Eigen::MatrixXd& center_corr, double radius);

/// Like s_all, but a feature whose cheap bounds already settle the test
/// against 1 gets that bound instead of s_l. So s_screen < 1 <=> s_all < 1.
Eigen::VectorXd s_screen(const MultiTaskDataset& ds, const Eigen::MatrixXd& center_corr, double radius);

/// One entry of s_screen; center_corr points at the T correlations of feature ell.
double s_screen_one(const MultiTaskDataset& ds, Index ell, const double* center_corr, double radius);

}  // namespace mtfl::qp1qc
