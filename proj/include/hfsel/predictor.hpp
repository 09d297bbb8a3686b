#pragma once

// Greedy root-to-leaf prediction.

#include <cstdint>
#include <vector>

#include "hfsel/corpus.hpp"
#include "hfsel/trainer.hpp"

namespace hfsel {

struct PathStep {
  NodeIndex node = 0;
  NodeIndex chosen = 0;
  std::vector<double> scores;  // one per child, in children() order
};

struct PredictionTrace {
  std::uint64_t instance = 0;
  std::vector<PathStep> path;
  NodeIndex leaf = 0;
};

struct PredictCounters {
  std::uint64_t dot_products = 0;      // child scores evaluated
  std::uint64_t dropped_features = 0;  // input ids beyond the model's feature space
};

// Descends from the root, at every node taking the child with the largest
// w_c . x over the node's feature subset (ties to the smaller child id).
// `x` must already be in the model's input space (see prepare_input).
// Throws ModelIncomplete(node id) when a path node has no model.
PredictionTrace predict(const TrainedModel& m, SparseRowView x, PredictCounters* counters = nullptr);

// Applies the model's frozen idf and normalization to a raw row.
Dataset prepare_inputs(const TrainedModel& m, const Dataset& raw);

struct BatchPrediction {
  std::vector<NodeIndex> leaves;
  std::vector<PredictionTrace> traces;  // empty unless requested
  double seconds = 0.0;
  double mean_seconds = 0.0;
  PredictCounters counters;
};

// Predicts every row of `data` (already in the model's input space).
BatchPrediction predict_batch(const TrainedModel& m, const Dataset& data, bool keep_traces = false);

}  // namespace hfsel
