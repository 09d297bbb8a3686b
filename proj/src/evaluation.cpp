#include "hfsel/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "hfsel/error.hpp"

namespace hfsel {

namespace {

double normal_two_sided(double z) { return std::min(1.0, std::erfc(std::fabs(z) / std::sqrt(2.0))); }

// 2PR/(P+R) rewritten as 2TP/(2TP+FP+FN); same value, and exact when
// FP == FN (single-label micro averaging reduces to hits / n).
double f1_of(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
  if (tp == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) {
    throw Error(ErrorCode::LengthMismatch,
                "paired inputs differ in length (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

}  // namespace

ConfusionStats ConfusionStats::build(const Hierarchy& h, std::span<const NodeIndex> truth,
                                     std::span<const NodeIndex> predicted) {
  check_lengths(truth.size(), predicted.size());
  ConfusionStats s;
  s.leaves = h.leaves();
  const std::size_t L = s.leaves.size();
  s.tp.assign(L, 0);
  s.fp.assign(L, 0);
  s.fn.assign(L, 0);
  std::vector<std::int64_t> slot(h.size(), -1);
  for (std::size_t k = 0; k < L; ++k) slot[s.leaves[k]] = static_cast<std::int64_t>(k);
  auto slot_of = [&](NodeIndex n) {
    if (n >= h.size() || slot[n] < 0) {
      throw Error(ErrorCode::UnknownLabel, "evaluated label is not a leaf", n < h.size() ? h.external_id(n) : -1);
    }
    return static_cast<std::size_t>(slot[n]);
  };
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const std::size_t t = slot_of(truth[i]);
    const std::size_t p = slot_of(predicted[i]);
    if (t == p) {
      ++s.tp[t];
    } else {
      ++s.fn[t];
      ++s.fp[p];
    }
  }
  return s;
}

std::uint64_t ConfusionStats::total_tp() const { return std::accumulate(tp.begin(), tp.end(), std::uint64_t{0}); }
std::uint64_t ConfusionStats::total_fp() const { return std::accumulate(fp.begin(), fp.end(), std::uint64_t{0}); }
std::uint64_t ConfusionStats::total_fn() const { return std::accumulate(fn.begin(), fn.end(), std::uint64_t{0}); }

F1Value micro_f1(const ConfusionStats& s) {
  const std::uint64_t tp = s.total_tp(), fp = s.total_fp(), fn = s.total_fn();
  if (tp == 0) return {0.0, true};
  return {f1_of(tp, fp, fn), false};
}

std::vector<double> per_class_f1(const ConfusionStats& s) {
  std::vector<double> out(s.leaves.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = f1_of(s.tp[k], s.fp[k], s.fn[k]);
  return out;
}

double macro_f1(const ConfusionStats& s) {
  if (s.leaves.empty()) return 0.0;
  const auto f = per_class_f1(s);
  return std::accumulate(f.begin(), f.end(), 0.0) / static_cast<double>(f.size());
}

double accuracy(std::span<const NodeIndex> truth, std::span<const NodeIndex> predicted) {
  check_lengths(truth.size(), predicted.size());
  if (truth.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += truth[i] == predicted[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

TestResult sign_test(std::span<const std::uint8_t> a_correct, std::span<const std::uint8_t> b_correct) {
  check_lengths(a_correct.size(), b_correct.size());
  std::size_t a_wins = 0, b_wins = 0;
  for (std::size_t i = 0; i < a_correct.size(); ++i) {
    const bool a = a_correct[i] != 0, b = b_correct[i] != 0;
    a_wins += a && !b;
    b_wins += b && !a;
  }
  TestResult r;
  r.pairs = a_wins + b_wins;
  r.statistic = static_cast<double>(a_wins);
  if (r.pairs == 0) {
    r.degenerate = true;
    return r;
  }
  const std::size_t n = r.pairs;
  const std::size_t k = std::min(a_wins, b_wins);
  if (n <= kSignTestExactLimit) {
    // P(X <= k) for X ~ Bin(n, 1/2), summed in log space.
    double tail = 0.0;
    const double log_half_n = static_cast<double>(n) * std::log(0.5);
    for (std::size_t i = 0; i <= k; ++i) {
      const double log_c = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0);
      tail += std::exp(log_c + log_half_n);
    }
    r.p_value = std::min(1.0, 2.0 * tail);
  } else {
    r.exact = false;
    const double diff = std::fabs(static_cast<double>(a_wins) - static_cast<double>(b_wins));
    const double z = std::max(0.0, diff - 1.0) / std::sqrt(static_cast<double>(n));
    r.p_value = normal_two_sided(z);
  }
  return r;
}

TestResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  check_lengths(a.size(), b.size());
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i] - b[i];
    if (!std::isfinite(x)) throw Error(ErrorCode::NonFiniteValue, "non-finite paired value", static_cast<std::int64_t>(i));
    if (x != 0.0) d.push_back(x);
  }
  TestResult r;
  const std::size_t n = d.size();
  r.pairs = n;
  if (n == 0) {
    r.degenerate = true;
    return r;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return std::fabs(d[x]) < std::fabs(d[y]); });
  // Doubled midranks keep tied ranks integral.
  std::vector<std::uint64_t> rank2(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::fabs(d[order[j + 1]]) == std::fabs(d[order[i]])) ++j;
    const std::uint64_t r2 = (i + 1) + (j + 1);
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = r2;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  std::uint64_t w2 = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (d[i] > 0) w2 += rank2[i];
  r.statistic = static_cast<double>(w2) / 2.0;

  if (n <= kWilcoxonExactLimit) {
    const std::uint64_t total2 = static_cast<std::uint64_t>(n) * (n + 1);
    std::vector<double> ways(total2 + 1, 0.0);
    ways[0] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::uint64_t s = total2; s + 1 > rank2[i]; --s) ways[s] += ways[s - rank2[i]];
    }
    const double all = std::ldexp(1.0, static_cast<int>(n));
    double lower = 0.0, upper = 0.0;
    for (std::uint64_t s = 0; s <= total2; ++s) {
      if (s <= w2) lower += ways[s];
      if (s >= w2) upper += ways[s];
    }
    r.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / all);
  } else {
    r.exact = false;
    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    r.p_value = var > 0.0 ? normal_two_sided((r.statistic - mean) / std::sqrt(var)) : 1.0;
  }
  return r;
}

LevelErrors levelwise_errors(const Hierarchy& h, std::span<const NodeIndex> truth,
                             std::span<const NodeIndex> predicted) {
  check_lengths(truth.size(), predicted.size());
  const std::uint32_t H = h.height();
  LevelErrors out;
  out.cumulative.assign(H, 0.0);
  out.conditional.assign(H, 0.0);
  out.instances.assign(H, 0);
  std::vector<std::size_t> wrong(H, 0), cond_n(H, 0), cond_wrong(H, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const NodeIndex t = truth[i], p = predicted[i];
    bool prev_ok = true;
    for (std::uint32_t d = 1; d <= h.level(t); ++d) {
      const bool ok = h.level(p) >= d && h.ancestor_at(p, d) == h.ancestor_at(t, d);
      ++out.instances[d - 1];
      wrong[d - 1] += !ok;
      if (prev_ok) {
        ++cond_n[d - 1];
        cond_wrong[d - 1] += !ok;
      }
      prev_ok = ok;
    }
  }
  for (std::uint32_t d = 0; d < H; ++d) {
    if (out.instances[d] > 0) out.cumulative[d] = static_cast<double>(wrong[d]) / static_cast<double>(out.instances[d]);
    if (cond_n[d] > 0) out.conditional[d] = static_cast<double>(cond_wrong[d]) / static_cast<double>(cond_n[d]);
  }
  return out;
}

std::string human_size(std::uint64_t bytes) {
  const double b = static_cast<double>(bytes);
  char buf[64];
  if (b >= 1e8) {
    std::snprintf(buf, sizeof buf, "%.2f GB", b / 1e9);
  } else if (b >= 1e6) {
    std::snprintf(buf, sizeof buf, "%.2f MB", b / 1e6);
  } else {
    std::snprintf(buf, sizeof buf, "%.2f KB", b / 1e3);
  }
  return buf;
}

ModelReport model_report(const TrainedModel& m) {
  ModelReport r;
  const auto& h = m.hierarchy;
  r.parameter_count = m.parameter_count();
  r.size_bytes = static_cast<std::uint64_t>(r.parameter_count) * 4;
  r.size_human = human_size(r.size_bytes);
  r.internal_nodes = h.internal_nodes().size();
  r.child_edges = h.child_edge_count();
  std::vector<NodeIndex> nodes = h.internal_nodes();
  std::sort(nodes.begin(), nodes.end());
  for (NodeIndex n : nodes) {
    const std::size_t k = n < m.nodes.size() && m.nodes[n] ? m.nodes[n]->subset.size() : 0;
    r.subset_sizes.emplace_back(h.external_id(n), k);
  }
  r.training_seconds = m.manifest.total_seconds;
  return r;
}

}  // namespace hfsel
