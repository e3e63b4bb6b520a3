#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mtfl/core.hpp"
#include "mtfl/dual.hpp"
#include "mtfl/solver.hpp"

namespace mtfl::screening {

/// Certifies features with s_l(lambda, lambda0) < 1 as inactive at lambda.
/// Requires 0 < lambda < ref.lambda0.
ScreeningMask screen_at(const MultiTaskDataset& ds, const dual::ReferenceSolution& ref, double lambda);

enum class ReferenceMode {
    Sequential,  // reference at the previous grid point
    LambdaMax,   // reference at lambda_max for every target
};

/// Solves one (possibly reduced) problem, optionally from a warm start.
using SolveFn =
    std::function<solver::FitResult(const MultiTaskDataset&, double lambda, const std::optional<WeightMatrix>& warm)>;

SolveFn make_solver(solver::SolverConfig cfg);

struct PathOptions {
    bool screen = true;
    ReferenceMode reference = ReferenceMode::Sequential;
    bool warm_start = true;
    /// Rows with Euclidean norm at or below this count as truly inactive.
    double inactive_threshold = 1e-6;
    /// A sequential reference whose dual point violates feasibility by more
    /// than this is replaced by the lambda_max reference.
    double feasibility_fallback = 1e-6;
};

enum class RecordStatus { Ok, SolverFailure };

struct PathRecord {
    double lambda = 0.0;
    ScreeningMask mask;
    Index n_screened = 0;
    Index n_truly_inactive = 0;
    /// n_screened / n_truly_inactive; empty when nothing is truly inactive.
    std::optional<double> rejection_ratio;
    double t_screen = 0.0;
    double t_solve = 0.0;
    WeightMatrix W;
    double objective = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
    double ball_radius = 0.0;
    bool fallback_reference = false;
    RecordStatus status = RecordStatus::Ok;
};

struct PathScreeningReport {
    std::vector<PathRecord> records;
    bool completed = true;
    std::string failure;

    double total_screen_time() const;
    double total_solve_time() const;
    /// Mean over records with a defined rejection ratio.
    double mean_rejection_ratio() const;
};

/**
 * Walks the grid from lambda_max downwards. At each step the features
 * certified by the screening rule are deleted from every task, the reduced
 * problem is solved, and the solution is re-embedded with exact zero rows.
 * A solver failure stops the path; the failing step is recorded and
 * `completed` is false.
 */
PathScreeningReport sequential_path(const MultiTaskDataset& ds, const LambdaGrid& grid, const SolveFn& solve,
                                    const PathOptions& opts = {});

}  // namespace mtfl::screening
