#include "mtfl/synth.hpp"

#include <cmath>
#include <algorithm>
#include <limits>
#include <numeric>

namespace mtfl::synth {

void validate_config(const SynthConfig& cfg) {
    if (cfg.d < 1 || cfg.tasks < 1 || cfg.n_per_task < 1) {
        throw Error(ErrorCode::InvalidConfig, "tasks, n and d must be at least 1");
    }
    if (!(cfg.support_fraction > 0.0) || cfg.support_fraction > 1.0) {
        throw Error(ErrorCode::InvalidConfig, "support fraction must lie in (0, 1]");
    }
    if (!(cfg.noise_scale >= 0.0) || !std::isfinite(cfg.noise_scale)) {
        throw Error(ErrorCode::InvalidConfig, "noise scale must be finite and nonnegative");
    }
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::uint64_t Rng::below(std::uint64_t n) {
    // Rejection keeps the draw unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
}

namespace {

std::vector<Index> draw_support(Rng& rng, Index d, Index k) {
    std::vector<Index> perm(static_cast<std::size_t>(d));
    std::iota(perm.begin(), perm.end(), Index{0});
    for (Index i = 0; i < k; ++i) {
        const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(d - i)));
        std::swap(perm[i], perm[j]);
    }
    perm.resize(static_cast<std::size_t>(k));
    std::sort(perm.begin(), perm.end());
    return perm;
}

}  // namespace

Generated generate(const SynthConfig& cfg) {
    validate_config(cfg);
    Rng rng(cfg.seed);
    const Index d = cfg.d;
    const Index T = cfg.tasks;
    const Index n = cfg.n_per_task;
    const auto k = static_cast<Index>(std::ceil(cfg.support_fraction * static_cast<double>(d) - 1e-9));

    WeightMatrix truth{Eigen::MatrixXd::Zero(d, T)};
    const auto shared = draw_support(rng, d, k);
    for (Index t = 0; t < T; ++t) {
        const auto support = cfg.per_task_support ? draw_support(rng, d, k) : shared;
        for (Index l : support) truth.values(l, t) = rng.normal();
    }

    const double innovation = std::sqrt(0.75);
    std::vector<Task> tasks;
    tasks.reserve(static_cast<std::size_t>(T));
    for (Index t = 0; t < T; ++t) {
        Task task;
        task.X.resize(n, d);
        for (Index i = 0; i < n; ++i) {
            if (cfg.kind == Kind::Synthetic1) {
                for (Index j = 0; j < d; ++j) task.X(i, j) = rng.normal();
            } else {
                double prev = rng.normal();
                task.X(i, 0) = prev;
                for (Index j = 1; j < d; ++j) {
                    prev = 0.5 * prev + innovation * rng.normal();
                    task.X(i, j) = prev;
                }
            }
        }
        task.y = task.X * truth.values.col(t);
        for (Index i = 0; i < n; ++i) task.y[i] += cfg.noise_scale * rng.normal();
        tasks.push_back(std::move(task));
    }
    return Generated{MultiTaskDataset(std::move(tasks)), std::move(truth)};
}

Kind parse_kind(const std::string& s) {
    if (s == "s1" || s == "synthetic1") return Kind::Synthetic1;
    if (s == "s2" || s == "synthetic2") return Kind::Synthetic2;
    throw Error(ErrorCode::InvalidConfig, "unknown synthetic kind '" + s + "' (expected s1 or s2)");
}

std::string to_string(Kind k) { return k == Kind::Synthetic1 ? "s1" : "s2"; }

}  // namespace mtfl::synth
