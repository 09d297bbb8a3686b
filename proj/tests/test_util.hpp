#pragma once

#include <random>
#include <vector>

#include "hfsel/corpus.hpp"
#include "hfsel/hierarchy.hpp"

namespace testutil {

// Random tree with `depth` levels below the root. Node ids are assigned in
// creation order starting at 0 (the root).
inline hfsel::Hierarchy random_tree(std::mt19937_64& rng, int depth, int min_b = 2, int max_b = 4) {
  std::vector<hfsel::Edge> edges;
  std::vector<hfsel::NodeId> frontier{0};
  hfsel::NodeId next = 1;
  std::uniform_int_distribution<int> br(min_b, max_b);
  for (int d = 0; d < depth; ++d) {
    std::vector<hfsel::NodeId> nf;
    for (auto p : frontier) {
      const int b = br(rng);
      for (int c = 0; c < b; ++c) {
        edges.emplace_back(p, next);
        nf.push_back(next++);
      }
    }
    frontier = nf;
  }
  return hfsel::Hierarchy::from_edges(edges);
}

inline hfsel::Hierarchy tree_from(std::initializer_list<hfsel::Edge> e) {
  std::vector<hfsel::Edge> v(e);
  return hfsel::Hierarchy::from_edges(v);
}

struct Row {
  std::vector<hfsel::FeatureId> idx;
  std::vector<double> val;
  hfsel::NodeId label;
};

inline hfsel::Dataset make_dataset(const std::vector<Row>& rows, std::size_t num_features = 0) {
  hfsel::Dataset d;
  for (const auto& r : rows) d.add_row(r.idx, r.val, r.label);
  if (num_features) d.set_num_features(num_features);
  return d;
}

// Random sparse rows labeled with random leaves of `h`.
inline hfsel::Dataset random_dataset(std::mt19937_64& rng, const hfsel::Hierarchy& h, std::size_t n,
                                     std::size_t num_features, double density) {
  hfsel::Dataset d;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> leaf(0, h.leaves().size() - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<hfsel::FeatureId> idx;
    std::vector<double> val;
    for (std::size_t f = 0; f < num_features; ++f) {
      if (u(rng) < density) {
        idx.push_back(static_cast<hfsel::FeatureId>(f));
        val.push_back(1.0 + std::floor(u(rng) * 3.0));
      }
    }
    d.add_row(idx, val, h.external_id(h.leaves()[leaf(rng)]));
  }
  d.set_num_features(num_features);
  return d;
}

}  // namespace testutil
