#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include <Eigen/Core>

#include "mtfl/core.hpp"

namespace mtfl::solver {

enum class StepRule { Fixed, Backtracking };

enum class Algorithm {
    /// Accelerated proximal gradient with row-wise group soft-thresholding.
    ProximalGradient,
    /// Cyclic exact minimization over rows w^l with an active-set outer loop.
    BlockCoordinate,
};

struct SolverConfig {
    int max_iters = 200000;
    /// Bound on the largest per-row KKT violation.
    double kkt_tol = 1e-6;
    StepRule step_rule = StepRule::Fixed;
    Algorithm algorithm = Algorithm::ProximalGradient;
    /// Seeds the power-iteration start vector of the Lipschitz estimate.
    std::uint64_t seed = 0;
    std::optional<WeightMatrix> warm_start;
};

void validate_config(const SolverConfig& cfg);

struct FitResult {
    WeightMatrix W;
    double kkt_residual = 0.0;
    double objective = 0.0;
    int iterations = 0;
};

/// Thrown when max_iters is hit; carries the best iterate found.
class SolverFailure : public Error {
public:
    SolverFailure(const std::string& what, FitResult best)
        : Error(ErrorCode::MaxItersExceeded, what), best_(std::move(best)) {}
    const FitResult& best() const { return best_; }

private:
    FitResult best_;
};

/**
 * Solves  min_W  sum_t 1/2 ||y_t - X_t w_t||^2 + lambda * sum_l ||w^l||
 * until every row satisfies the optimality conditions to within kkt_tol.
 * Rows that shrink to zero are stored as exact zeros.
 */
FitResult fit(const MultiTaskDataset& ds, double lambda, const SolverConfig& cfg = {});

double primal_objective(const MultiTaskDataset& ds, const WeightMatrix& W, double lambda);

/// Per-row optimality violation: ||m^l - w^l/||w^l|| || for nonzero rows,
/// max(0, ||m^l|| - 1) for zero rows, with m^l taken at theta = (y - XW)/lambda.
Eigen::VectorXd kkt_row_residuals(const MultiTaskDataset& ds, const WeightMatrix& W, double lambda);
double kkt_residual(const MultiTaskDataset& ds, const WeightMatrix& W, double lambda);

/// Primal objective minus the dual objective at the feasibly rescaled dual
/// point recovered from W. Nonnegative up to rounding.
double duality_gap(const MultiTaskDataset& ds, const WeightMatrix& W, double lambda);

/// max_t ||X_t||_2^2 by power iteration.
double lipschitz_constant(const MultiTaskDataset& ds, int iters = 100, double tol = 1e-10, std::uint64_t seed = 0);

/// X_t / sqrt(w_t), y_t / sqrt(w_t): fitting the result with the plain model
/// fits the loss sum_t 1/(2 w_t) ||y_t - X_t w_t||^2.
MultiTaskDataset reduce_weighted(const MultiTaskDataset& ds, std::span<const double> weights);

/// Appends sqrt(2 rho) I below every X_t and d zeros below every y_t, which
/// folds an extra rho ||W||_F^2 term into the squared loss.
MultiTaskDataset reduce_frobenius(const MultiTaskDataset& ds, double rho);

}  // namespace mtfl::solver
