#pragma once

// Synthetic corpora with planted discriminative features.
//
// Every informative feature is tied to one (internal node, child) pair: it
// fires often for instances routed through that child and at background rate
// everywhere else. All other features are class-independent noise.

#include <cstdint>
#include <vector>

#include "hfsel/corpus.hpp"
#include "hfsel/hierarchy.hpp"

namespace hfsel {

struct SyntheticSpec {
  std::size_t num_features = 1000;
  std::size_t num_informative = 10;
  std::size_t num_instances = 2000;
  // Children per node at each depth. {2, 4} gives a root, 2 inner nodes and
  // 8 leaves: exactly 10 (node, child) pairs, so every child owns a marker.
  std::vector<std::size_t> branching{2, 4};
  double noise_min = 0.02;  // noise feature frequencies are uniform in [min, max]
  double noise_max = 0.10;
  double informative_rate = 0.9;        // frequency inside the marked child
  double informative_background = 0.05; // frequency elsewhere
  std::uint64_t seed = 42;
};

struct PlantedFeature {
  FeatureId feature = 0;
  NodeIndex node = 0;   // node where the feature separates children
  NodeIndex child = 0;  // child it marks
};

struct SyntheticCorpus {
  Hierarchy hierarchy;
  Dataset data;  // raw counts; labels are leaf ids, balanced across leaves
  std::vector<PlantedFeature> planted;
};

SyntheticCorpus make_synthetic(const SyntheticSpec& spec);

// Same taxonomy and planted features, fresh instances (e.g. a test set).
Dataset sample_synthetic(const SyntheticSpec& spec, const SyntheticCorpus& like, std::size_t num_instances,
                         std::uint64_t seed);

}  // namespace hfsel
