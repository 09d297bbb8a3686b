#include "hfsel/predictor.hpp"

#include <algorithm>
#include <chrono>
#include <limits>

#include "hfsel/error.hpp"
#include "hfsel/kernels.hpp"
#include "hfsel/parallel.hpp"

namespace hfsel {

namespace {

struct Scratch {
  std::vector<std::uint32_t> pos;
  std::vector<double> val;
};

// Positions of x's entries inside the node subset.
void restrict_to_subset(const std::vector<FeatureId>& subset, SparseRowView x, Scratch& s) {
  s.pos.clear();
  s.val.clear();
  auto lo = subset.begin();
  for (std::size_t k = 0; k < x.size(); ++k) {
    lo = std::lower_bound(lo, subset.end(), x.indices[k]);
    if (lo == subset.end()) break;
    if (*lo == x.indices[k]) {
      s.pos.push_back(static_cast<std::uint32_t>(lo - subset.begin()));
      s.val.push_back(x.values[k]);
    }
  }
}

PredictionTrace predict_with(const TrainedModel& m, SparseRowView x, PredictCounters* counters,
                             Scratch& scratch, bool keep_scores) {
  const auto& h = m.hierarchy;
  const auto& kt = kernels::active();
  PredictionTrace trace;

  if (counters != nullptr) {
    for (std::size_t k = 0; k < x.size(); ++k) counters->dropped_features += x.indices[k] >= m.num_features;
  }

  NodeIndex cur = h.root();
  while (!h.is_leaf(cur)) {
    if (m.nodes.size() <= cur || !m.nodes[cur]) {
      throw Error(ErrorCode::ModelIncomplete, "no model on prediction path", h.external_id(cur));
    }
    const NodeModel& model = *m.nodes[cur];
    const auto children = h.children(cur);
    PathStep step;
    step.node = cur;
    restrict_to_subset(model.subset, x, scratch);
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    if (keep_scores) step.scores.resize(children.size(), 0.0);
    for (std::size_t c = 0; c < children.size(); ++c) {
      const double s = c < model.num_children
                           ? kt.gather_dot_f32(model.child_weights(c).data(), scratch.pos.data(),
                                               scratch.val.data(), scratch.pos.size())
                           : 0.0;
      if (keep_scores) step.scores[c] = s;
      if (s > best_score) {
        best_score = s;
        best = c;
      }
    }
    if (counters != nullptr) counters->dot_products += children.size();
    step.chosen = children[best];
    cur = children[best];
    trace.path.push_back(std::move(step));
  }
  trace.leaf = cur;
  return trace;
}

}  // namespace

PredictionTrace predict(const TrainedModel& m, SparseRowView x, PredictCounters* counters) {
  Scratch scratch;
  return predict_with(m, x, counters, scratch, true);
}

Dataset prepare_inputs(const TrainedModel& m, const Dataset& raw) {
  if (!m.idf.empty()) return apply_idf(raw, m.idf);
  if (m.l2_normalize_inputs) return l2_normalize(raw);
  return raw;
}

BatchPrediction predict_batch(const TrainedModel& m, const Dataset& data, bool keep_traces) {
  BatchPrediction out;
  const std::size_t n = data.num_instances();
  out.leaves.resize(n);
  if (keep_traces) out.traces.resize(n);
  if (n == 0) return out;

  const auto start = std::chrono::steady_clock::now();
  constexpr std::size_t kChunk = 256;
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<PredictCounters> per_chunk(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    Scratch scratch;
    const std::size_t end = std::min(n, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      try {
        auto trace = predict_with(m, data.row(i), &per_chunk[c], scratch, keep_traces);
        trace.instance = data.instance_id(i);
        out.leaves[i] = trace.leaf;
        if (keep_traces) out.traces[i] = std::move(trace);
      } catch (const Error& e) {
        throw Error(e.code(), std::string(e.what()) + " (instance " + std::to_string(data.instance_id(i)) + ")",
                    e.subject());
      }
    }
  });
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.mean_seconds = out.seconds / static_cast<double>(n);
  for (const auto& pc : per_chunk) {
    out.counters.dot_products += pc.dot_products;
    out.counters.dropped_features += pc.dropped_features;
  }
  return out;
}

}  // namespace hfsel
