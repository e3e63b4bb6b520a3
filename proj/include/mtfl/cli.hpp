#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "mtfl/core.hpp"
#include "mtfl/screening.hpp"
#include "mtfl/solver.hpp"

namespace mtfl::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kVerifyFailed = 1, kUsage = 2, kSolverFailed = 3 };

/// Entry point behind the `mtfl` binary; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

struct PathSettings {
    std::size_t grid_points = 100;
    double grid_min = 0.01;
    bool screen = true;
    double kkt_tol = 1e-6;
    std::uint64_t seed = 0;
    screening::ReferenceMode reference = screening::ReferenceMode::Sequential;
    solver::Algorithm algorithm = solver::Algorithm::ProximalGradient;
    int max_iters = 200000;
};

/// Tolerance actually used by path solves: the requested one, capped so that
/// every solve yields a sequential reference within the feasibility fallback.
double effective_kkt_tol(double requested, double feasibility_fallback);

screening::PathScreeningReport run_path(const MultiTaskDataset& ds, const PathSettings& s);

/// One row per lambda; `%.12g` numbers, fixed column order.
void write_path_csv(std::ostream& out, const screening::PathScreeningReport& report, double lambda_max);

struct BenchRow {
    double lambda_rel = 0.0;
    Index n_screened = 0;
    Index n_inactive_true = 0;
    std::optional<double> rejection_ratio;
    double t_screen_s = 0.0;
    double t_solve_s = 0.0;
};

struct BenchReport {
    std::vector<BenchRow> rows;
    double t_total_with_dpc = 0.0;
    double t_total_without_dpc = 0.0;
    double speedup = 0.0;
    double screen_overhead = 0.0;  // total screening time / total DPC path time
    double mean_rejection_ratio = 0.0;
    bool completed = true;
    std::string failure;
};

/// Runs the path with and without screening `reps` times each; totals are medians.
BenchReport run_bench(const MultiTaskDataset& ds, const PathSettings& s, int reps);
void write_bench_csv(std::ostream& out, const BenchReport& report);
nlohmann::json bench_summary(const BenchReport& report, const MultiTaskDataset& ds, const PathSettings& s, int reps);

struct CheckResult {
    std::string suite;
    std::string name;
    bool pass = false;
    std::string detail;
};

struct VerifySettings {
    std::string suite = "all";  // all | safety | ball | qp1qc | gap
    int cases = 200;
    int samples = 100000;
    std::size_t grid_points = 20;
    double grid_min = 0.01;
    double kkt_tol = 1e-8;
    std::uint64_t seed = 0;
};

std::vector<CheckResult> run_verify(const MultiTaskDataset& ds, const VerifySettings& s);

}  // namespace mtfl::cli
