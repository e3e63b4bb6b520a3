#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "mtfl/core.hpp"

namespace mtfl::synth {

enum class Kind {
    Synthetic1,  // i.i.d. standard Gaussian entries
    Synthetic2,  // each row is AR(1) across features: corr(x_i, x_j) = 0.5^|i-j|
};

struct SynthConfig {
    Kind kind = Kind::Synthetic1;
    Index tasks = 10;
    Index n_per_task = 30;
    Index d = 1000;
    double support_fraction = 0.10;
    double noise_scale = 0.01;
    std::uint64_t seed = 0;
    /// Draw an independent support for every task instead of one shared support.
    bool per_task_support = false;
};

void validate_config(const SynthConfig& cfg);

/// Seeded generator whose output does not depend on the standard library:
/// raw mt19937_64 words, 53-bit uniforms and Box-Muller normals.
class Rng {
public:
    static constexpr const char* kAlgorithm = "mt19937_64/box-muller";

    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    double uniform();  // [0, 1)
    double normal();
    std::uint64_t below(std::uint64_t n);  // uniform in [0, n)

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

struct Generated {
    MultiTaskDataset data;
    WeightMatrix truth;
};

Generated generate(const SynthConfig& cfg);

Kind parse_kind(const std::string& s);  // "s1" | "s2"
std::string to_string(Kind k);

}  // namespace mtfl::synth
