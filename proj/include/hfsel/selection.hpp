#pragma once

// How many top-ranked features each internal node keeps.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hfsel/hierarchy.hpp"
#include "hfsel/scoring.hpp"

namespace hfsel {

struct TuningGrid {
  std::vector<double> fractions{0.01, 0.02, 0.05, 0.10, 0.25, 0.40, 0.50, 0.60, 0.75};

  // Throws EmptyGrid, or InvalidArgument unless every fraction lies in
  // (0, 1] and the list is strictly increasing.
  void validate() const;
  // "0.01,0.05,0.1"
  static TuningGrid parse(std::string_view list);
};

struct FeatureSubset {
  NodeIndex node = 0;
  std::vector<FeatureId> features;  // ascending
  std::optional<ScoreMethod> method;  // nullopt: no selection applied
  double fraction = 1.0;

  std::size_t size() const { return features.size(); }
};

// round(fraction * active), at least 1 when any feature is active.
std::size_t subset_size(std::size_t active, double fraction);
// The first subset_size(...) entries of the table's rank order, sorted by id.
FeatureSubset prefix_subset(const FeatureScoreTable& table, double fraction);
// Every feature id in [0, num_features).
FeatureSubset all_features(NodeIndex node, std::size_t num_features);

// Score tables keyed by internal node.
using ScoreTables = std::map<NodeIndex, FeatureScoreTable>;
using SubsetMap = std::map<NodeIndex, FeatureSubset>;

struct GlobalSelection {
  double fraction = 1.0;
  double score = 0.0;
  std::vector<double> grid_scores;  // one per grid fraction
  SubsetMap subsets;
};

// Picks the grid fraction that maximizes `evaluate(fraction)` (end-to-end
// validation score with that fraction at every node). Ties go to the smaller
// fraction. Throws EmptyGrid.
GlobalSelection global_select(const ScoreTables& tables, const TuningGrid& grid,
                              const std::function<double(double)>& evaluate);

struct NodeScore {
  double accuracy = 0.0;       // routing accuracy on the node's validation rows
  std::size_t instances = 0;   // validation rows under the node
};

struct NodeSelection {
  FeatureSubset subset;
  double validation_score = 0.0;
  std::size_t validation_instances = 0;
  bool fallback = false;
};

struct AdaptiveSelection {
  std::map<NodeIndex, NodeSelection> nodes;
  std::size_t fallback_count() const;
  SubsetMap subsets() const;
};

// Nodes with fewer validation rows than this use the fallback fraction.
inline constexpr std::size_t kMinAdaptiveValidation = 5;

// Per node, the grid fraction that maximizes `evaluate(node, fraction)`;
// ties go to the smaller fraction. Nodes with fewer than
// kMinAdaptiveValidation validation rows take `fallback_fraction` (the
// global winner) and are flagged. Throws EmptyGrid.
AdaptiveSelection adaptive_select(const ScoreTables& tables, const TuningGrid& grid,
                                  const std::function<NodeScore(NodeIndex, double)>& evaluate,
                                  double fallback_fraction);

}  // namespace hfsel
