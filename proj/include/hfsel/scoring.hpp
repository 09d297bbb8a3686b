#pragma once

// Filter scores computed at one internal node. Classes are the node's
// children: every routed instance counts toward the child on its path.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "hfsel/corpus.hpp"
#include "hfsel/hierarchy.hpp"

namespace hfsel {

enum class ScoreMethod { Gini, MrmrDifference, MrmrQuotient, KruskalWallis };

std::string_view to_string(ScoreMethod m);
// Accepts gini, mrmr-d, mrmr-q, kw (and the underscore spellings).
std::optional<ScoreMethod> parse_score_method(std::string_view s);

// Column-major copy of one node's training rows, restricted to features that
// are non-zero somewhere at the node.
struct NodeColumns {
  std::size_t num_rows = 0;
  std::size_t num_classes = 0;
  std::vector<std::uint32_t> row_class;     // branch of each local row
  std::vector<std::uint32_t> class_totals;  // rows per branch
  std::vector<FeatureId> active;            // ascending global ids
  std::vector<std::uint64_t> col_ptr;       // size active.size() + 1
  std::vector<std::uint32_t> col_rows;      // ascending local row ids
  std::vector<double> col_values;

  static NodeColumns build(const NodeTrainingView& view, const Dataset& data,
                           std::size_t num_classes);

  std::size_t num_active() const { return active.size(); }
  std::span<const std::uint32_t> rows_of(std::size_t a) const {
    return {col_rows.data() + col_ptr[a], col_rows.data() + col_ptr[a + 1]};
  }
  std::span<const double> values_of(std::size_t a) const {
    return {col_values.data() + col_ptr[a], col_values.data() + col_ptr[a + 1]};
  }
  // Dense/low-dimensional data (fraction of non-zero cells above 1/2).
  bool is_dense() const;
};

// Non-zero occurrence counts of each active feature per class.
class FeatureClassCounts {
 public:
  static FeatureClassCounts build(const NodeColumns& cols);

  std::size_t num_classes() const { return num_classes_; }
  std::size_t num_rows() const { return num_rows_; }
  std::uint32_t class_total(std::size_t k) const { return class_totals_[k]; }
  // 0 for features that never occur.
  std::uint32_t count(FeatureId f, std::size_t k) const;
  std::uint32_t total(FeatureId f) const;
  const std::vector<FeatureId>& features() const { return features_; }

  // Direct construction for tests: counts is features.size() x num_classes.
  FeatureClassCounts(std::vector<FeatureId> features, std::vector<std::uint32_t> counts,
                     std::vector<std::uint32_t> class_totals);

 private:
  FeatureClassCounts() = default;
  std::optional<std::size_t> position(FeatureId f) const;

  std::size_t num_classes_ = 0;
  std::size_t num_rows_ = 0;
  std::vector<FeatureId> features_;
  std::vector<std::uint32_t> counts_;
  std::vector<std::uint32_t> totals_;
  std::vector<std::uint32_t> class_totals_;
};

// 1 - sum_k p(k|f)^2 with p estimated from presence counts. Smaller is more
// relevant. Throws FeatureAbsent(f) when the feature never occurs.
double gini_index(const FeatureClassCounts& counts, FeatureId f);

// Plug-in mutual information (nats) of a joint count table with `rows` x
// `cols` cells stored row-major.
double mutual_information_from_counts(std::span<const double> joint, std::size_t rows,
                                      std::size_t cols);
// Plug-in mutual information (nats) between two discrete columns. Throws
// LengthMismatch.
double mutual_information(std::span<const std::int32_t> x, std::span<const std::int32_t> y);

enum class MrmrFlavor { Difference, Quotient };

// Discrete codes per active feature used by the MI-based methods.
enum class Discretization {
  Auto,      // presence for sparse nodes, quartiles for dense ones
  Presence,  // zero / non-zero
  Quartile,  // equal-frequency 4 bins over the node's rows (zeros included)
};

struct MrmrResult {
  std::vector<FeatureId> order;     // selected features in pick order
  std::vector<double> criterion;    // objective value of each pick
  std::vector<double> relevance;    // I(f; class) per active feature
};

// Greedy forward mRMR. The first pick maximizes I(f; class); pick t > 1
// maximizes I(f; class) - mean_s I(f; s) (Difference) or
// I(f; class) / mean_s I(f; s) (Quotient) over the already-selected s.
// Ties go to the smaller feature id. Throws NotEnoughFeatures when k exceeds
// the active feature count and InvalidArgument when k == 0.
MrmrResult mrmr_select(const NodeColumns& cols, std::size_t k, MrmrFlavor flavor,
                       Discretization disc = Discretization::Auto);

// Denominator floor for the quotient flavor when the selected set carries no
// redundancy with the candidate.
inline constexpr double kMrmrQuotientFloor = 1e-12;

// Kruskal-Wallis H with midranks:
//   H = (N-1) * sum_i n_i (rbar_i - rbar)^2 / sum_ij (r_ij - rbar)^2.
// Larger values mean stronger class separation. Throws DegenerateRanking
// when all values tie, InvalidArgument with fewer than two classes present
// or fewer than two values.
double kruskal_wallis(std::span<const double> values, std::span<const std::uint32_t> classes);

struct ScoringOptions {
  Discretization discretization = Discretization::Auto;
  // Rank smaller H first, as the original method description states.
  bool kw_smaller_is_better = false;
  // mRMR orders greedily only this prefix of the active features; the tail
  // follows by relevance.
  double mrmr_greedy_fraction = 0.75;
};

struct FeatureScoreTable {
  NodeIndex node = 0;
  ScoreMethod method = ScoreMethod::Gini;
  // Indexed by global feature id. Features absent at the node hold the worst
  // value in the table's direction (+inf when lower is better, else -inf).
  std::vector<double> score;
  // Active features, most relevant first. For mRMR this is the pick order.
  std::vector<FeatureId> rank_order;
  bool lower_is_better = false;
};

// Throws SingleChildNode when fewer than two children receive instances.
FeatureScoreTable score_node(const NodeTrainingView& view, const Dataset& data,
                             const Hierarchy& h, ScoreMethod method,
                             const ScoringOptions& opts = {});
FeatureScoreTable score_node(const NodeColumns& cols, NodeIndex node, std::size_t num_features,
                             ScoreMethod method, const ScoringOptions& opts = {});

}  // namespace hfsel
