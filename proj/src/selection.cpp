#include "hfsel/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hfsel/error.hpp"
#include "hfsel/parallel.hpp"

namespace hfsel {

void TuningGrid::validate() const {
  if (fractions.empty()) throw Error(ErrorCode::EmptyGrid, "fraction grid is empty");
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double f = fractions[i];
    if (!(f > 0.0 && f <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "fraction outside (0,1]: " + std::to_string(f));
    }
    if (i > 0 && !(f > fractions[i - 1])) {
      throw Error(ErrorCode::InvalidArgument, "fractions must be strictly increasing");
    }
  }
}

TuningGrid TuningGrid::parse(std::string_view list) {
  TuningGrid g;
  g.fractions.clear();
  std::stringstream ss{std::string(list)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
      g.fractions.push_back(v);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "bad grid entry '" + item + "'");
    }
  }
  g.validate();
  return g;
}

std::size_t subset_size(std::size_t active, double fraction) {
  if (active == 0) return 0;
  const auto n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(active)));
  return std::clamp<std::size_t>(n, 1, active);
}

FeatureSubset prefix_subset(const FeatureScoreTable& table, double fraction) {
  FeatureSubset s;
  s.node = table.node;
  s.method = table.method;
  s.fraction = fraction;
  const std::size_t k = subset_size(table.rank_order.size(), fraction);
  s.features.assign(table.rank_order.begin(), table.rank_order.begin() + k);
  std::sort(s.features.begin(), s.features.end());
  return s;
}

FeatureSubset all_features(NodeIndex node, std::size_t num_features) {
  FeatureSubset s;
  s.node = node;
  s.features.resize(num_features);
  std::iota(s.features.begin(), s.features.end(), FeatureId{0});
  return s;
}

GlobalSelection global_select(const ScoreTables& tables, const TuningGrid& grid,
                              const std::function<double(double)>& evaluate) {
  grid.validate();
  GlobalSelection out;
  out.grid_scores.assign(grid.fractions.size(), 0.0);
  parallel_for(grid.fractions.size(),
               [&](std::size_t i) { out.grid_scores[i] = evaluate(grid.fractions[i]); });
  std::size_t best = 0;
  for (std::size_t i = 1; i < out.grid_scores.size(); ++i) {
    if (out.grid_scores[i] > out.grid_scores[best]) best = i;
  }
  out.fraction = grid.fractions[best];
  out.score = out.grid_scores[best];
  for (const auto& [node, table] : tables) out.subsets[node] = prefix_subset(table, out.fraction);
  return out;
}

std::size_t AdaptiveSelection::fallback_count() const {
  return static_cast<std::size_t>(std::count_if(
      nodes.begin(), nodes.end(), [](const auto& kv) { return kv.second.fallback; }));
}

SubsetMap AdaptiveSelection::subsets() const {
  SubsetMap out;
  for (const auto& [node, sel] : nodes) out[node] = sel.subset;
  return out;
}

AdaptiveSelection adaptive_select(const ScoreTables& tables, const TuningGrid& grid,
                                  const std::function<NodeScore(NodeIndex, double)>& evaluate,
                                  double fallback_fraction) {
  grid.validate();
  std::vector<const FeatureScoreTable*> order;
  for (const auto& [node, table] : tables) order.push_back(&table);
  std::vector<NodeSelection> results(order.size());

  parallel_for(order.size(), [&](std::size_t i) {
    const FeatureScoreTable& table = *order[i];
    NodeSelection sel;
    std::size_t best = 0;
    double best_score = -1.0;
    std::size_t instances = 0;
    for (std::size_t g = 0; g < grid.fractions.size(); ++g) {
      const NodeScore s = evaluate(table.node, grid.fractions[g]);
      instances = s.instances;
      if (instances < kMinAdaptiveValidation) break;
      if (s.accuracy > best_score) {
        best = g;
        best_score = s.accuracy;
      }
    }
    sel.validation_instances = instances;
    if (instances < kMinAdaptiveValidation) {
      sel.fallback = true;
      sel.subset = prefix_subset(table, fallback_fraction);
      sel.validation_score = instances > 0 ? evaluate(table.node, fallback_fraction).accuracy : 0.0;
    } else {
      sel.subset = prefix_subset(table, grid.fractions[best]);
      sel.validation_score = best_score;
    }
    results[i] = std::move(sel);
  });

  AdaptiveSelection out;
  for (std::size_t i = 0; i < order.size(); ++i) out.nodes[order[i]->node] = std::move(results[i]);
  return out;
}

}  // namespace hfsel
