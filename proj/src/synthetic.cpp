#include "hfsel/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "hfsel/error.hpp"

namespace hfsel {

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double draw_count(std::mt19937_64& rng) {
  double c = 1.0;
  while (uniform01(rng) < 0.4) c += 1.0;
  return c;
}

Hierarchy build_tree(const std::vector<std::size_t>& branching) {
  std::vector<Edge> edges;
  std::vector<NodeId> frontier{0};
  NodeId next = 1;
  for (std::size_t b : branching) {
    if (b < 2) throw Error(ErrorCode::InvalidArgument, "branching factor must be at least 2");
    std::vector<NodeId> level;
    for (NodeId p : frontier) {
      for (std::size_t c = 0; c < b; ++c) {
        edges.emplace_back(p, next);
        level.push_back(next++);
      }
    }
    frontier = std::move(level);
  }
  return Hierarchy::from_edges(edges);
}

// Per-feature noise frequencies, drawn once from the corpus seed.
std::vector<double> noise_rates(const SyntheticSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x5bd1e995u);
  std::vector<double> rate(spec.num_features);
  for (auto& r : rate) r = spec.noise_min + (spec.noise_max - spec.noise_min) * uniform01(rng);
  return rate;
}

Dataset draw_rows(const SyntheticSpec& spec, const SyntheticCorpus& c, std::size_t n, std::uint64_t seed) {
  const Hierarchy& h = c.hierarchy;
  const auto rate = noise_rates(spec, spec.seed);
  std::vector<std::int64_t> planted_at(spec.num_features, -1);
  for (std::size_t k = 0; k < c.planted.size(); ++k) planted_at[c.planted[k].feature] = static_cast<std::int64_t>(k);

  std::mt19937_64 rng(seed);
  const auto& leaves = h.leaves();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i % leaves.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  deterministic_shuffle(perm, seed ^ 0x9e3779b97f4a7c15ull);

  Dataset d;
  std::vector<FeatureId> idx;
  std::vector<double> val;
  for (std::size_t i = 0; i < n; ++i) {
    const NodeIndex leaf = leaves[order[perm[i]]];
    idx.clear();
    val.clear();
    for (std::size_t f = 0; f < spec.num_features; ++f) {
      double p = rate[f];
      if (planted_at[f] >= 0) {
        const auto& pf = c.planted[static_cast<std::size_t>(planted_at[f])];
        p = h.is_ancestor_or_self(pf.child, leaf) ? spec.informative_rate : spec.informative_background;
      }
      if (uniform01(rng) < p) {
        idx.push_back(static_cast<FeatureId>(f));
        val.push_back(draw_count(rng));
      }
    }
    d.add_row(idx, val, h.external_id(leaf), i);
  }
  d.set_num_features(spec.num_features);
  return d;
}

}  // namespace

SyntheticCorpus make_synthetic(const SyntheticSpec& spec) {
  if (spec.num_informative > spec.num_features) {
    throw Error(ErrorCode::InvalidArgument, "more informative features than features");
  }
  SyntheticCorpus c;
  c.hierarchy = build_tree(spec.branching);
  const Hierarchy& h = c.hierarchy;

  // (node, child) slots, interleaved so every node gets its first child
  // marked before any node gets a second one.
  std::vector<std::pair<NodeIndex, NodeIndex>> slots;
  std::size_t max_children = 0;
  for (NodeIndex n : h.internal_nodes()) max_children = std::max(max_children, h.children(n).size());
  for (std::size_t k = 0; k < max_children; ++k) {
    for (NodeIndex n : h.internal_nodes()) {
      if (k < h.children(n).size()) slots.emplace_back(n, h.children(n)[k]);
    }
  }
  if (spec.num_informative > slots.size()) {
    throw Error(ErrorCode::InvalidArgument, "more informative features than (node, child) pairs");
  }

  std::vector<std::size_t> ids(spec.num_features);
  std::iota(ids.begin(), ids.end(), 0);
  deterministic_shuffle(ids, spec.seed ^ 0xc2b2ae3d27d4eb4full);
  for (std::size_t k = 0; k < spec.num_informative; ++k) {
    c.planted.push_back({static_cast<FeatureId>(ids[k]), slots[k].first, slots[k].second});
  }
  c.data = draw_rows(spec, c, spec.num_instances, spec.seed);
  return c;
}

Dataset sample_synthetic(const SyntheticSpec& spec, const SyntheticCorpus& like, std::size_t num_instances,
                         std::uint64_t seed) {
  return draw_rows(spec, like, num_instances, seed);
}

}  // namespace hfsel
