#pragma once

// Model persistence.
//
// Binary layout (all integers little-endian):
//   "HFSELMDL" | u32 version | u64 hierarchy fingerprint
//   u32 len | config JSON (training config, feature count, metadata)
//   u32 edges | (i64 parent, i64 child)*
//   u64 idf count | f64*
//   u32 nodes | per node:
//     i64 node id | u8 trivial | f64 lambda | u32 children
//     varint |subset| | varint deltas of ascending ids
//     f32 weights, child-major
//
// Timings are deliberately left out so identical runs give identical bytes.

#include <iosfwd>
#include <string>

#include "hfsel/trainer.hpp"
#include "json.hpp"

namespace hfsel {

inline constexpr std::uint32_t kModelFormatVersion = 1;

void write_model(std::ostream& out, const TrainedModel& m);
TrainedModel read_model(std::istream& in);
void save_model(const std::string& path, const TrainedModel& m);
TrainedModel load_model(const std::string& path);

nlohmann::json config_to_json(const TrainingConfig& cfg);
TrainingConfig config_from_json(const nlohmann::json& j);

// Lossless JSON mirror of the binary container.
nlohmann::json model_to_json(const TrainedModel& m);
TrainedModel model_from_json(const nlohmann::json& j);

}  // namespace hfsel
