#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "mtfl/core.hpp"

namespace mtfl {

// Dataset directory layout:
//   meta.json      {"T": int, "d": int, "n": [N_1, ..., N_T]}
//   task_<t>.csv   N_t rows of d feature values followed by the response
// Sparse inputs are not supported; everything is read densely.

MultiTaskDataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const MultiTaskDataset& ds, const std::filesystem::path& dir);

/// d rows x T columns, no header.
void save_weights_csv(const WeightMatrix& W, const std::filesystem::path& file);
WeightMatrix load_weights_csv(const std::filesystem::path& file);

/// Shortest round-trip decimal form of a double.
std::string format_exact(double v);

}  // namespace mtfl

// JSON forms of the core value types. Doubles are written in shortest
// round-trip form, so to_json/from_json is bit-exact for finite values.
namespace nlohmann {

template <>
struct adl_serializer<mtfl::WeightMatrix> {
    static void to_json(json& j, const mtfl::WeightMatrix& W);
    static mtfl::WeightMatrix from_json(const json& j);
};

template <>
struct adl_serializer<mtfl::DualPoint> {
    static void to_json(json& j, const mtfl::DualPoint& p);
    static mtfl::DualPoint from_json(const json& j);
};

template <>
struct adl_serializer<mtfl::LambdaGrid> {
    static void to_json(json& j, const mtfl::LambdaGrid& g);
    static mtfl::LambdaGrid from_json(const json& j);
};

template <>
struct adl_serializer<mtfl::ScreeningMask> {
    static void to_json(json& j, const mtfl::ScreeningMask& m);
    static mtfl::ScreeningMask from_json(const json& j);
};

}  // namespace nlohmann
