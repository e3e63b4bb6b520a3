#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mtfl/cli.hpp"
#include "mtfl/dual.hpp"
#include "mtfl/io.hpp"
#include "mtfl/synth.hpp"

namespace mtfl::cli {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::string fmt_ratio(const std::optional<double>& v) { return v ? fmt(*v) : "NA"; }

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Index nonzero_rows(const WeightMatrix& W) {
    Index n = 0;
    for (Index l = 0; l < W.rows(); ++l) {
        if (W.values.row(l).squaredNorm() > 0.0) ++n;
    }
    return n;
}

int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

std::string cpu_model() {
    std::ifstream in("/proc/cpuinfo");
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("model name", 0) == 0) {
            const auto colon = line.find(':');
            if (colon != std::string::npos) {
                auto s = line.substr(colon + 1);
                s.erase(0, s.find_first_not_of(' '));
                return s;
            }
        }
    }
    return "unknown";
}

// Shared path flags for `path`, `bench`.
void add_path_flags(CLI::App& cmd, std::string& data, PathSettings& s, std::string& screen, std::string& reference,
                    std::string& algorithm) {
    cmd.add_option("--data", data, "Dataset directory")->required();
    cmd.add_option("--grid-points", s.grid_points, "Number of lambda values")->check(CLI::PositiveNumber);
    cmd.add_option("--grid-min", s.grid_min, "Smallest lambda as a fraction of lambda_max")
        ->check(CLI::Range(1e-300, 1.0));
    cmd.add_option("--kkt-tol", s.kkt_tol, "KKT tolerance of every solve")->check(CLI::PositiveNumber);
    cmd.add_option("--seed", s.seed, "Seed for the step-size estimate");
    cmd.add_option("--max-iters", s.max_iters, "Iteration cap per solve")->check(CLI::PositiveNumber);
    cmd.add_option("--screen", screen, "Screening rule")->check(CLI::IsMember({"dpc", "none"}));
    cmd.add_option("--reference", reference, "Reference point for screening")
        ->check(CLI::IsMember({"sequential", "lambda-max"}));
    cmd.add_option("--solver", algorithm, "Solver algorithm")->check(CLI::IsMember({"apg", "bcd"}));
}

void apply_path_flags(PathSettings& s, const std::string& screen, const std::string& reference,
                      const std::string& algorithm) {
    s.screen = screen == "dpc";
    s.reference = reference == "lambda-max" ? screening::ReferenceMode::LambdaMax : screening::ReferenceMode::Sequential;
    s.algorithm = algorithm == "bcd" ? solver::Algorithm::BlockCoordinate : solver::Algorithm::ProximalGradient;
}

std::ostream* open_or(const std::string& file, std::ofstream& holder, std::ostream& fallback) {
    if (file.empty() || file == "-") return &fallback;
    holder.open(file);
    if (!holder) throw Error(ErrorCode::IoError, "cannot write " + file);
    return &holder;
}

}  // namespace

double effective_kkt_tol(double requested, double feasibility_fallback) {
    // A zero row with ||m|| = 1 + tol has g = (1 + tol)^2 > 1 + 2 tol, so a
    // reference solved to tol above fallback / 2 would be rejected.
    return std::min(requested, 0.25 * feasibility_fallback);
}

screening::PathScreeningReport run_path(const MultiTaskDataset& ds, const PathSettings& s) {
    const double lmax = dual::lambda_max(ds).value;
    const LambdaGrid grid = LambdaGrid::log_spaced(lmax, s.grid_points, s.grid_min);
    screening::PathOptions opts;
    solver::SolverConfig cfg;
    cfg.kkt_tol = effective_kkt_tol(s.kkt_tol, opts.feasibility_fallback);
    cfg.max_iters = s.max_iters;
    cfg.algorithm = s.algorithm;
    cfg.seed = s.seed;
    opts.screen = s.screen;
    opts.reference = s.reference;
    return screening::sequential_path(ds, grid, screening::make_solver(cfg), opts);
}

void write_path_csv(std::ostream& out, const screening::PathScreeningReport& report, double lambda_max) {
    out << "k,lambda,lambda_rel,n_screened,n_inactive_true,rejection_ratio,t_screen_s,t_solve_s,objective,"
           "kkt_residual,iterations,n_nonzero_rows,status\n";
    for (std::size_t k = 0; k < report.records.size(); ++k) {
        const auto& r = report.records[k];
        out << k << ',' << fmt(r.lambda) << ',' << fmt(r.lambda / lambda_max) << ',' << r.n_screened << ','
            << r.n_truly_inactive << ',' << fmt_ratio(r.rejection_ratio) << ',' << fmt(r.t_screen) << ','
            << fmt(r.t_solve) << ',' << fmt(r.objective) << ',' << fmt(r.kkt_residual) << ',' << r.iterations << ','
            << nonzero_rows(r.W) << ',' << (r.status == screening::RecordStatus::Ok ? "ok" : "solver_failure")
            << '\n';
    }
}

BenchReport run_bench(const MultiTaskDataset& ds, const PathSettings& s, int reps) {
    reps = std::max(reps, 1);
    const double lmax = dual::lambda_max(ds).value;
    PathSettings with = s;
    with.screen = true;
    PathSettings without = s;
    without.screen = false;

    std::vector<screening::PathScreeningReport> dpc_runs;
    std::vector<screening::PathScreeningReport> plain_runs;
    for (int r = 0; r < reps; ++r) {
        dpc_runs.push_back(run_path(ds, with));
        plain_runs.push_back(run_path(ds, without));
    }

    BenchReport out;
    const auto& dpc = dpc_runs.front();
    const auto& plain = plain_runs.front();
    out.completed = dpc.completed && plain.completed;
    out.failure = !dpc.completed ? dpc.failure : plain.failure;

    const std::size_t n = std::min(dpc.records.size(), plain.records.size());
    double ratio_sum = 0.0;
    int ratio_count = 0;
    for (std::size_t k = 0; k < n; ++k) {
        BenchRow row;
        row.lambda_rel = dpc.records[k].lambda / lmax;
        row.n_screened = dpc.records[k].n_screened;
        row.n_inactive_true = plain.records[k].n_truly_inactive;
        if (row.n_inactive_true > 0) {
            row.rejection_ratio = static_cast<double>(row.n_screened) / static_cast<double>(row.n_inactive_true);
            ratio_sum += *row.rejection_ratio;
            ++ratio_count;
        }
        std::vector<double> ts;
        std::vector<double> tv;
        for (const auto& run : dpc_runs) {
            if (k >= run.records.size()) continue;
            ts.push_back(run.records[k].t_screen);
            tv.push_back(run.records[k].t_solve);
        }
        row.t_screen_s = median(ts);
        row.t_solve_s = median(tv);
        out.rows.push_back(row);
    }

    std::vector<double> with_totals;
    std::vector<double> screen_totals;
    std::vector<double> without_totals;
    for (const auto& run : dpc_runs) {
        with_totals.push_back(run.total_screen_time() + run.total_solve_time());
        screen_totals.push_back(run.total_screen_time());
    }
    for (const auto& run : plain_runs) without_totals.push_back(run.total_screen_time() + run.total_solve_time());
    out.t_total_with_dpc = median(with_totals);
    out.t_total_without_dpc = median(without_totals);
    out.speedup = out.t_total_with_dpc > 0.0 ? out.t_total_without_dpc / out.t_total_with_dpc : 0.0;
    out.screen_overhead = out.t_total_with_dpc > 0.0 ? median(screen_totals) / out.t_total_with_dpc : 0.0;
    out.mean_rejection_ratio = ratio_count ? ratio_sum / ratio_count : 0.0;
    return out;
}

void write_bench_csv(std::ostream& out, const BenchReport& report) {
    out << "lambda_rel,n_screened,n_inactive_true,rejection_ratio,t_screen_s,t_solve_s\n";
    for (const auto& r : report.rows) {
        out << fmt(r.lambda_rel) << ',' << r.n_screened << ',' << r.n_inactive_true << ','
            << fmt_ratio(r.rejection_ratio) << ',' << fmt(r.t_screen_s) << ',' << fmt(r.t_solve_s) << '\n';
    }
}

nlohmann::json bench_summary(const BenchReport& report, const MultiTaskDataset& ds, const PathSettings& s, int reps) {
    nlohmann::json j;
    j["t_total_with_dpc"] = report.t_total_with_dpc;
    j["t_total_without_dpc"] = report.t_total_without_dpc;
    j["speedup"] = report.speedup;
    j["screen_overhead"] = report.screen_overhead;
    j["mean_rejection_ratio"] = report.mean_rejection_ratio;
    j["completed"] = report.completed;
    if (!report.completed) j["failure"] = report.failure;
    j["dataset"] = {{"T", ds.num_tasks()}, {"d", ds.num_features()}, {"N", ds.total_samples()}};
    j["settings"] = {{"grid_points", s.grid_points},
                     {"grid_min", s.grid_min},
                     {"kkt_tol", s.kkt_tol},
                     {"kkt_tol_effective", effective_kkt_tol(s.kkt_tol, screening::PathOptions{}.feasibility_fallback)},
                     {"reference", s.reference == screening::ReferenceMode::Sequential ? "sequential" : "lambda-max"},
                     {"solver", s.algorithm == solver::Algorithm::ProximalGradient ? "apg" : "bcd"},
                     {"reps", reps}};
    j["environment"] = {{"cpu_model", cpu_model()},
                        {"threads", thread_count()},
                        {"hardware_concurrency", std::thread::hardware_concurrency()},
                        {"library_version", kVersion}};
    return j;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-task feature learning with safe feature screening"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", kVersion);
    int threads = 0;
    app.add_option("--threads", threads, "Worker threads (overrides MTFL_THREADS)")->check(CLI::NonNegativeNumber);

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic benchmark dataset");
    synth::SynthConfig scfg;
    std::string kind = "s1";
    std::string synth_out;
    synth_cmd->add_option("--kind", kind, "s1 (independent) or s2 (AR(1) correlated)")
        ->check(CLI::IsMember({"s1", "s2"}));
    synth_cmd->add_option("--tasks", scfg.tasks, "Number of tasks");
    synth_cmd->add_option("--n", scfg.n_per_task, "Samples per task");
    synth_cmd->add_option("--d", scfg.d, "Number of features");
    synth_cmd->add_option("--seed", scfg.seed, "RNG seed");
    synth_cmd->add_option("--support-fraction", scfg.support_fraction, "Fraction of features in the true support");
    synth_cmd->add_option("--noise", scfg.noise_scale, "Noise standard deviation");
    synth_cmd->add_flag("--per-task-support", scfg.per_task_support, "Independent support per task");
    synth_cmd->add_option("--out", synth_out, "Output directory")->required();

    // path
    auto* path_cmd = app.add_subcommand("path", "Solve along a lambda path, with or without screening");
    PathSettings path_s;
    std::string path_data, path_out, screen = "dpc", reference = "sequential", algorithm = "apg";
    add_path_flags(*path_cmd, path_data, path_s, screen, reference, algorithm);
    path_cmd->add_option("--out", path_out, "CSV output file (default stdout)");

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "Compare path timings with and without screening");
    PathSettings bench_s;
    std::string bench_data, bench_csv, bench_json, b_screen = "dpc", b_reference = "sequential", b_algorithm = "apg";
    int reps = 1;
    add_path_flags(*bench_cmd, bench_data, bench_s, b_screen, b_reference, b_algorithm);
    bench_cmd->add_option("--reps", reps, "Repetitions; totals are medians")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--out", bench_csv, "Per-lambda CSV output (default stdout)");
    bench_cmd->add_option("--json", bench_json, "JSON summary output (default stderr-free stdout after CSV)");

    // verify
    auto* verify_cmd = app.add_subcommand("verify", "Run the invariant suites on a dataset");
    VerifySettings vs;
    std::string verify_data;
    verify_cmd->add_option("--data", verify_data, "Dataset directory")->required();
    verify_cmd->add_option("--suite", vs.suite, "Suite to run")
        ->check(CLI::IsMember({"all", "safety", "ball", "qp1qc", "gap"}));
    verify_cmd->add_option("--cases", vs.cases, "Random QP1QC instances")->check(CLI::PositiveNumber);
    verify_cmd->add_option("--samples", vs.samples, "Sphere samples per QP1QC instance")->check(CLI::PositiveNumber);
    verify_cmd->add_option("--grid-points", vs.grid_points, "Lambda values for the path suites")
        ->check(CLI::PositiveNumber);
    verify_cmd->add_option("--grid-min", vs.grid_min, "Smallest lambda / lambda_max")->check(CLI::Range(1e-300, 1.0));
    verify_cmd->add_option("--kkt-tol", vs.kkt_tol, "KKT tolerance of reference solves")->check(CLI::PositiveNumber);
    verify_cmd->add_option("--seed", vs.seed, "Seed for random instances");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    if (threads > 0) {
        set_threads(threads);
    } else if (const char* env = std::getenv("MTFL_THREADS")) {
        set_threads(std::atoi(env));
    }

    try {
        if (*synth_cmd) {
            scfg.kind = synth::parse_kind(kind);
            synth::validate_config(scfg);
            const auto gen = synth::generate(scfg);
            save_dataset(gen.data, synth_out);
            save_weights_csv(gen.truth, std::filesystem::path(synth_out) / "truth.csv");
            nlohmann::json meta = {{"kind", synth::to_string(scfg.kind)},
                                   {"tasks", scfg.tasks},
                                   {"n_per_task", scfg.n_per_task},
                                   {"d", scfg.d},
                                   {"support_fraction", scfg.support_fraction},
                                   {"noise_scale", scfg.noise_scale},
                                   {"seed", scfg.seed},
                                   {"per_task_support", scfg.per_task_support},
                                   {"rng", synth::Rng::kAlgorithm},
                                   {"library_version", kVersion}};
            std::ofstream(std::filesystem::path(synth_out) / "synth.json") << meta.dump(2) << "\n";
            return kOk;
        }
        if (*path_cmd) {
            apply_path_flags(path_s, screen, reference, algorithm);
            const auto ds = load_dataset(path_data);
            const double lmax = dual::lambda_max(ds).value;
            const auto report = run_path(ds, path_s);
            std::ofstream file;
            write_path_csv(*open_or(path_out, file, out), report, lmax);
            if (!report.completed) {
                err << "solver failure: " << report.failure << "\n";
                return kSolverFailed;
            }
            return kOk;
        }
        if (*bench_cmd) {
            apply_path_flags(bench_s, b_screen, b_reference, b_algorithm);
            const auto ds = load_dataset(bench_data);
            const auto report = run_bench(ds, bench_s, reps);
            std::ofstream csv_file;
            write_bench_csv(*open_or(bench_csv, csv_file, out), report);
            const auto summary = bench_summary(report, ds, bench_s, reps);
            if (bench_json.empty()) {
                out << summary.dump(2) << "\n";
            } else {
                std::ofstream json_file;
                *open_or(bench_json, json_file, out) << summary.dump(2) << "\n";
            }
            if (!report.completed) {
                err << "solver failure: " << report.failure << "\n";
                return kSolverFailed;
            }
            return kOk;
        }
        if (*verify_cmd) {
            const auto ds = load_dataset(verify_data);
            const auto results = run_verify(ds, vs);
            bool all = true;
            char line[512];
            std::snprintf(line, sizeof(line), "%-8s %-40s %-6s %s\n", "suite", "check", "result", "detail");
            out << line;
            for (const auto& r : results) {
                std::snprintf(line, sizeof(line), "%-8s %-40s %-6s %s\n", r.suite.c_str(), r.name.c_str(),
                              r.pass ? "PASS" : "FAIL", r.detail.c_str());
                out << line;
                all = all && r.pass;
            }
            out << (all ? "all checks passed\n" : "some checks FAILED\n");
            return all ? kOk : kVerifyFailed;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        switch (e.code()) {
            case ErrorCode::MaxItersExceeded:
            case ErrorCode::SolverFailure:
            case ErrorCode::NoConvergence:
                return kSolverFailed;
            default:
                return kUsage;
        }
    }
    return kUsage;
}

}  // namespace mtfl::cli
