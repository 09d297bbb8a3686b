#pragma once

// Set-based metrics, paired significance tests and model accounting.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hfsel/hierarchy.hpp"
#include "hfsel/trainer.hpp"

namespace hfsel {

struct ConfusionStats {
  std::vector<NodeIndex> leaves;  // evaluated categories (all leaves of the taxonomy)
  std::vector<std::uint64_t> tp, fp, fn;

  // Single-label counts: every instance contributes one prediction.
  static ConfusionStats build(const Hierarchy& h, std::span<const NodeIndex> truth,
                              std::span<const NodeIndex> predicted);
  std::uint64_t total_tp() const;
  std::uint64_t total_fp() const;
  std::uint64_t total_fn() const;
};

struct F1Value {
  double value = 0.0;
  bool undefined = false;  // P + R == 0
};

F1Value micro_f1(const ConfusionStats& s);
// Mean over all leaves of the per-leaf F1; a leaf with undefined precision or
// recall contributes 0. The divisor is the number of leaves.
double macro_f1(const ConfusionStats& s);
std::vector<double> per_class_f1(const ConfusionStats& s);
double accuracy(std::span<const NodeIndex> truth, std::span<const NodeIndex> predicted);

struct TestResult {
  double p_value = 1.0;
  std::size_t pairs = 0;  // discordant pairs / non-zero differences
  double statistic = 0.0;
  bool exact = true;
  bool degenerate = false;  // no discordant pairs / all differences zero
};

// Two-sided sign test over pairs where exactly one system is correct. Exact
// binomial up to 100 discordant pairs, normal approximation above.
TestResult sign_test(std::span<const std::uint8_t> a_correct, std::span<const std::uint8_t> b_correct);

// Two-sided Wilcoxon signed-rank test on paired values (e.g. per-class F1).
// Zero differences are dropped; tied magnitudes get midranks. Exact
// distribution for up to 25 non-zero differences, normal approximation
// above. `statistic` is the positive rank sum.
TestResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

inline constexpr std::size_t kSignTestExactLimit = 100;
inline constexpr std::size_t kWilcoxonExactLimit = 25;

struct LevelErrors {
  // Index d-1 holds level d (1..height).
  std::vector<double> cumulative;
  std::vector<double> conditional;  // given the level d-1 choice was right
  std::vector<std::size_t> instances;  // true labels reaching level d
};

// Cumulative error at level d: fraction of instances whose true leaf has
// depth >= d and whose predicted level-d node differs from the true one.
LevelErrors levelwise_errors(const Hierarchy& h, std::span<const NodeIndex> truth,
                             std::span<const NodeIndex> predicted);

struct ModelReport {
  std::size_t parameter_count = 0;
  std::uint64_t size_bytes = 0;  // 4 bytes per parameter
  std::string size_human;        // decimal units: KB, MB, GB
  std::size_t internal_nodes = 0;
  std::size_t child_edges = 0;
  std::vector<std::pair<NodeId, std::size_t>> subset_sizes;
  double training_seconds = 0.0;
};

// Decimal size string as reported in memory tables, e.g. "6.61 MB".
std::string human_size(std::uint64_t bytes);
ModelReport model_report(const TrainedModel& m);

}  // namespace hfsel
