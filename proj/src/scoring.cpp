#include "hfsel/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hfsel/error.hpp"

namespace hfsel {

std::string_view to_string(ScoreMethod m) {
  switch (m) {
    case ScoreMethod::Gini: return "gini";
    case ScoreMethod::MrmrDifference: return "mrmr-d";
    case ScoreMethod::MrmrQuotient: return "mrmr-q";
    case ScoreMethod::KruskalWallis: return "kw";
  }
  return "unknown";
}

std::optional<ScoreMethod> parse_score_method(std::string_view s) {
  if (s == "gini") return ScoreMethod::Gini;
  if (s == "mrmr-d" || s == "mrmr_d") return ScoreMethod::MrmrDifference;
  if (s == "mrmr-q" || s == "mrmr_q") return ScoreMethod::MrmrQuotient;
  if (s == "kw" || s == "kruskal_wallis" || s == "kruskal-wallis") return ScoreMethod::KruskalWallis;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Node-local columns

NodeColumns NodeColumns::build(const NodeTrainingView& view, const Dataset& data,
                               std::size_t num_classes) {
  NodeColumns c;
  c.num_rows = view.count();
  c.num_classes = num_classes;
  c.row_class.resize(c.num_rows);
  c.class_totals.assign(num_classes, 0);

  std::vector<std::uint32_t> per_feature(data.num_features(), 0);
  for (std::size_t r = 0; r < c.num_rows; ++r) {
    const auto& routed = view.rows[r];
    c.row_class[r] = routed.branch;
    ++c.class_totals[routed.branch];
    const auto row = data.row(routed.instance);
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (row.values[k] != 0.0) ++per_feature[row.indices[k]];
    }
  }

  std::vector<std::uint32_t> position(data.num_features(), 0);
  c.col_ptr.push_back(0);
  for (FeatureId f = 0; f < per_feature.size(); ++f) {
    if (per_feature[f] == 0) continue;
    position[f] = static_cast<std::uint32_t>(c.active.size());
    c.active.push_back(f);
    c.col_ptr.push_back(c.col_ptr.back() + per_feature[f]);
  }
  c.col_rows.resize(c.col_ptr.back());
  c.col_values.resize(c.col_ptr.back());
  std::vector<std::uint64_t> fill(c.col_ptr.begin(), c.col_ptr.end() - 1);
  for (std::size_t r = 0; r < c.num_rows; ++r) {
    const auto row = data.row(view.rows[r].instance);
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (row.values[k] == 0.0) continue;
      const auto slot = fill[position[row.indices[k]]]++;
      c.col_rows[slot] = static_cast<std::uint32_t>(r);
      c.col_values[slot] = row.values[k];
    }
  }
  return c;
}

bool NodeColumns::is_dense() const {
  if (num_rows == 0 || active.empty()) return false;
  const double cells = static_cast<double>(num_rows) * static_cast<double>(active.size());
  return static_cast<double>(col_rows.size()) > 0.5 * cells;
}

// ---------------------------------------------------------------------------
// Counts and Gini

FeatureClassCounts::FeatureClassCounts(std::vector<FeatureId> features,
                                       std::vector<std::uint32_t> counts,
                                       std::vector<std::uint32_t> class_totals)
    : num_classes_(class_totals.size()),
      features_(std::move(features)),
      counts_(std::move(counts)),
      class_totals_(std::move(class_totals)) {
  if (counts_.size() != features_.size() * num_classes_) {
    throw Error(ErrorCode::LengthMismatch, "counts must be features x classes");
  }
  if (!std::is_sorted(features_.begin(), features_.end())) {
    throw Error(ErrorCode::InvalidArgument, "features must be ascending");
  }
  num_rows_ = std::accumulate(class_totals_.begin(), class_totals_.end(), std::size_t{0});
  totals_.assign(features_.size(), 0);
  for (std::size_t a = 0; a < features_.size(); ++a) {
    for (std::size_t k = 0; k < num_classes_; ++k) totals_[a] += counts_[a * num_classes_ + k];
  }
}

FeatureClassCounts FeatureClassCounts::build(const NodeColumns& cols) {
  FeatureClassCounts out;
  out.num_classes_ = cols.num_classes;
  out.num_rows_ = cols.num_rows;
  out.features_ = cols.active;
  out.class_totals_ = cols.class_totals;
  out.counts_.assign(cols.num_active() * cols.num_classes, 0);
  out.totals_.assign(cols.num_active(), 0);
  for (std::size_t a = 0; a < cols.num_active(); ++a) {
    const auto rows = cols.rows_of(a);
    for (std::uint32_t r : rows) ++out.counts_[a * out.num_classes_ + cols.row_class[r]];
    out.totals_[a] = static_cast<std::uint32_t>(rows.size());
  }
  return out;
}

std::optional<std::size_t> FeatureClassCounts::position(FeatureId f) const {
  const auto it = std::lower_bound(features_.begin(), features_.end(), f);
  if (it == features_.end() || *it != f) return std::nullopt;
  return static_cast<std::size_t>(it - features_.begin());
}

std::uint32_t FeatureClassCounts::count(FeatureId f, std::size_t k) const {
  const auto p = position(f);
  return p ? counts_[*p * num_classes_ + k] : 0;
}

std::uint32_t FeatureClassCounts::total(FeatureId f) const {
  const auto p = position(f);
  return p ? totals_[*p] : 0;
}

double gini_index(const FeatureClassCounts& counts, FeatureId f) {
  const std::uint32_t total = counts.total(f);
  if (total == 0) {
    throw Error(ErrorCode::FeatureAbsent, "feature never occurs at this node",
                static_cast<std::int64_t>(f));
  }
  const double inv = 1.0 / static_cast<double>(total);
  double sum_sq = 0.0;
  for (std::size_t k = 0; k < counts.num_classes(); ++k) {
    const double p = counts.count(f, k) * inv;
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

// ---------------------------------------------------------------------------
// Mutual information

double mutual_information_from_counts(std::span<const double> joint, std::size_t rows,
                                      std::size_t cols) {
  if (joint.size() != rows * cols) throw Error(ErrorCode::LengthMismatch, "joint table shape");
  std::vector<double> row_sum(rows, 0.0);
  std::vector<double> col_sum(cols, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      row_sum[i] += joint[i * cols + j];
      col_sum[j] += joint[i * cols + j];
    }
  }
  for (double v : row_sum) total += v;
  if (total <= 0.0) return 0.0;
  double mi = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double n = joint[i * cols + j];
      if (n <= 0.0) continue;
      mi += (n / total) * std::log(n * total / (row_sum[i] * col_sum[j]));
    }
  }
  return std::max(0.0, mi);
}

double mutual_information(std::span<const std::int32_t> x, std::span<const std::int32_t> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "columns differ in length");
  if (x.empty()) throw Error(ErrorCode::InvalidArgument, "empty columns");
  const auto [xmin, xmax] = std::minmax_element(x.begin(), x.end());
  const auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
  const std::size_t rows = static_cast<std::size_t>(*xmax - *xmin) + 1;
  const std::size_t cols = static_cast<std::size_t>(*ymax - *ymin) + 1;
  std::vector<double> joint(rows * cols, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    joint[static_cast<std::size_t>(x[i] - *xmin) * cols + static_cast<std::size_t>(y[i] - *ymin)] += 1.0;
  }
  return mutual_information_from_counts(joint, rows, cols);
}

namespace {

// Codes of one active feature at every node row.
std::vector<std::uint8_t> quartile_codes(const NodeColumns& cols, std::size_t a) {
  const std::size_t n = cols.num_rows;
  std::vector<double> values(n, 0.0);
  const auto rows = cols.rows_of(a);
  const auto vals = cols.values_of(a);
  for (std::size_t k = 0; k < rows.size(); ++k) values[rows[k]] = vals[k];
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t l, std::uint32_t r) { return values[l] < values[r]; });
  std::vector<std::uint8_t> codes(n, 0);
  std::size_t group_start = 0;
  for (std::size_t pos = 0; pos < n; ++pos) {
    if (pos > 0 && values[order[pos]] != values[order[pos - 1]]) group_start = pos;
    codes[order[pos]] = static_cast<std::uint8_t>(std::min<std::size_t>(3, group_start * 4 / n));
  }
  return codes;
}

class MiColumns {
 public:
  MiColumns(const NodeColumns& cols, Discretization disc) : cols_(cols) {
    quartile_ = disc == Discretization::Quartile ||
                (disc == Discretization::Auto && cols.is_dense());
    if (quartile_) {
      codes_.reserve(cols.num_active());
      for (std::size_t a = 0; a < cols.num_active(); ++a) codes_.push_back(quartile_codes(cols, a));
    }
    marks_.assign(cols.num_rows, 0);
  }

  double relevance(std::size_t a) const {
    const std::size_t k = cols_.num_classes;
    if (quartile_) {
      std::vector<double> joint(4 * k, 0.0);
      for (std::size_t r = 0; r < cols_.num_rows; ++r) {
        joint[codes_[a][r] * k + cols_.row_class[r]] += 1.0;
      }
      return mutual_information_from_counts(joint, 4, k);
    }
    std::vector<double> joint(2 * k, 0.0);
    for (std::size_t c = 0; c < k; ++c) joint[c] = cols_.class_totals[c];
    for (std::uint32_t r : cols_.rows_of(a)) {
      joint[cols_.row_class[r]] -= 1.0;
      joint[k + cols_.row_class[r]] += 1.0;
    }
    return mutual_information_from_counts(joint, 2, k);
  }

  // Prepares redundancy() against active feature `s`.
  void focus(std::size_t s) {
    focus_ = s;
    if (!quartile_) {
      std::fill(marks_.begin(), marks_.end(), 0);
      for (std::uint32_t r : cols_.rows_of(s)) marks_[r] = 1;
    }
  }

  double redundancy(std::size_t a) const {
    if (quartile_) {
      double joint[16] = {};
      const auto& ca = codes_[a];
      const auto& cs = codes_[focus_];
      for (std::size_t r = 0; r < cols_.num_rows; ++r) joint[ca[r] * 4 + cs[r]] += 1.0;
      return mutual_information_from_counts(joint, 4, 4);
    }
    const auto rows = cols_.rows_of(a);
    double both = 0.0;
    for (std::uint32_t r : rows) both += marks_[r];
    const double n = static_cast<double>(cols_.num_rows);
    const double na = static_cast<double>(rows.size());
    const double ns = static_cast<double>(cols_.rows_of(focus_).size());
    const double joint[4] = {n - na - ns + both, ns - both, na - both, both};
    return mutual_information_from_counts(joint, 2, 2);
  }

 private:
  const NodeColumns& cols_;
  bool quartile_ = false;
  std::vector<std::vector<std::uint8_t>> codes_;
  std::vector<std::uint8_t> marks_;
  std::size_t focus_ = 0;
};

double mrmr_criterion(double relevance, double redundancy_sum, std::size_t selected,
                      MrmrFlavor flavor) {
  if (selected == 0) return relevance;
  const double mean = redundancy_sum / static_cast<double>(selected);
  if (flavor == MrmrFlavor::Difference) return relevance - mean;
  return relevance / std::max(mean, kMrmrQuotientFloor);
}

}  // namespace

MrmrResult mrmr_select(const NodeColumns& cols, std::size_t k, MrmrFlavor flavor,
                       Discretization disc) {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  const std::size_t m = cols.num_active();
  if (k > m) {
    throw Error(ErrorCode::NotEnoughFeatures,
                "requested " + std::to_string(k) + " of " + std::to_string(m) + " active features");
  }
  MiColumns mi(cols, disc);
  MrmrResult out;
  out.relevance.resize(m);
  for (std::size_t a = 0; a < m; ++a) out.relevance[a] = mi.relevance(a);

  std::vector<double> red_sum(m, 0.0);
  std::vector<std::uint8_t> taken(m, 0);
  out.order.reserve(k);
  out.criterion.reserve(k);
  for (std::size_t t = 0; t < k; ++t) {
    std::size_t best = m;
    double best_value = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < m; ++a) {
      if (taken[a]) continue;
      const double v = mrmr_criterion(out.relevance[a], red_sum[a], t, flavor);
      if (best == m || v > best_value) {
        best = a;
        best_value = v;
      }
    }
    taken[best] = 1;
    out.order.push_back(cols.active[best]);
    out.criterion.push_back(best_value);
    if (t + 1 < k) {
      mi.focus(best);
      for (std::size_t a = 0; a < m; ++a) {
        if (!taken[a]) red_sum[a] += mi.redundancy(a);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Kruskal-Wallis

namespace {

struct RankedValue {
  double value;
  std::uint32_t cls;
};

// `sorted` ascending by value; `zeros_per_class` adds an implicit block of
// zero values. Returns nullopt when every value ties.
std::optional<double> kw_statistic(std::span<const RankedValue> sorted,
                                   std::span<const std::uint32_t> zeros_per_class,
                                   std::span<const std::uint32_t> class_sizes) {
  const std::size_t k = class_sizes.size();
  std::size_t n = 0;
  std::size_t present = 0;
  for (auto s : class_sizes) {
    n += s;
    present += s > 0;
  }
  if (n < 2 || present < 2) {
    throw Error(ErrorCode::InvalidArgument, "Kruskal-Wallis needs two classes and two values");
  }
  std::size_t zeros = 0;
  for (auto z : zeros_per_class) zeros += z;

  const double rbar = (static_cast<double>(n) + 1.0) / 2.0;
  std::vector<double> rank_sum(k, 0.0);
  double ss = 0.0;
  std::size_t next_rank = 1;  // rank of the next unassigned position
  bool zero_done = zeros == 0;

  auto place_zeros = [&] {
    const double mid = static_cast<double>(next_rank) + (static_cast<double>(zeros) - 1.0) / 2.0;
    for (std::size_t c = 0; c < zeros_per_class.size(); ++c) rank_sum[c] += mid * zeros_per_class[c];
    ss += static_cast<double>(zeros) * (mid - rbar) * (mid - rbar);
    next_rank += zeros;
    zero_done = true;
  };

  std::size_t i = 0;
  while (i < sorted.size()) {
    if (!zero_done && sorted[i].value > 0.0) place_zeros();
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].value == sorted[i].value) ++j;
    std::size_t tie = j - i;
    std::size_t extra_zeros = 0;
    if (!zero_done && sorted[i].value == 0.0) {
      // explicit zeros merge with the implicit block
      extra_zeros = zeros;
      zero_done = true;
    }
    const std::size_t group = tie + extra_zeros;
    const double mid = static_cast<double>(next_rank) + (static_cast<double>(group) - 1.0) / 2.0;
    for (std::size_t t = i; t < j; ++t) rank_sum[sorted[t].cls] += mid;
    if (extra_zeros > 0) {
      for (std::size_t c = 0; c < zeros_per_class.size(); ++c) rank_sum[c] += mid * zeros_per_class[c];
    }
    ss += static_cast<double>(group) * (mid - rbar) * (mid - rbar);
    next_rank += group;
    i = j;
  }
  if (!zero_done) place_zeros();

  if (!(ss > 1e-12 * static_cast<double>(n) * static_cast<double>(n))) return std::nullopt;
  double between = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    if (class_sizes[c] == 0) continue;
    const double d = rank_sum[c] / class_sizes[c] - rbar;
    between += class_sizes[c] * d * d;
  }
  return (static_cast<double>(n) - 1.0) * between / ss;
}

}  // namespace

double kruskal_wallis(std::span<const double> values, std::span<const std::uint32_t> classes) {
  if (values.size() != classes.size()) throw Error(ErrorCode::LengthMismatch, "values vs classes");
  std::uint32_t max_class = 0;
  for (auto c : classes) max_class = std::max(max_class, c);
  std::vector<std::uint32_t> sizes(values.empty() ? 0 : max_class + 1, 0);
  std::vector<RankedValue> sorted;
  sorted.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw Error(ErrorCode::NonFiniteValue, "non-finite value");
    ++sizes[classes[i]];
    sorted.push_back({values[i], classes[i]});
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const RankedValue& a, const RankedValue& b) { return a.value < b.value; });
  const std::vector<std::uint32_t> no_zeros(sizes.size(), 0);
  const auto h = kw_statistic(sorted, no_zeros, sizes);
  if (!h) throw Error(ErrorCode::DegenerateRanking, "all values tie");
  return *h;
}

// ---------------------------------------------------------------------------
// Node tables

namespace {

std::vector<FeatureId> rank_by_score(const std::vector<FeatureId>& active,
                                     const std::vector<double>& score, bool lower_better) {
  std::vector<FeatureId> order = active;
  std::stable_sort(order.begin(), order.end(), [&](FeatureId a, FeatureId b) {
    const double sa = score[a];
    const double sb = score[b];
    if (sa != sb) return lower_better ? sa < sb : sa > sb;
    return a < b;
  });
  return order;
}

}  // namespace

FeatureScoreTable score_node(const NodeTrainingView& view, const Dataset& data,
                             const Hierarchy& h, ScoreMethod method,
                             const ScoringOptions& opts) {
  if (view.count() == 0) {
    throw Error(ErrorCode::NoInstances, "node has no training instances",
                h.external_id(view.node));
  }
  const auto cols = NodeColumns::build(view, data, h.children(view.node).size());
  return score_node(cols, view.node, data.num_features(), method, opts);
}

FeatureScoreTable score_node(const NodeColumns& cols, NodeIndex node, std::size_t num_features,
                             ScoreMethod method, const ScoringOptions& opts) {
  std::size_t represented = 0;
  for (auto t : cols.class_totals) represented += t > 0;
  if (represented < 2) {
    throw Error(ErrorCode::SingleChildNode, "fewer than two children receive instances");
  }

  constexpr double kInf = std::numeric_limits<double>::infinity();
  FeatureScoreTable table;
  table.node = node;
  table.method = method;
  const std::size_t m = cols.num_active();

  switch (method) {
    case ScoreMethod::Gini: {
      table.score.assign(num_features, kInf);
      const auto counts = FeatureClassCounts::build(cols);
      for (std::size_t a = 0; a < m; ++a) table.score[cols.active[a]] = gini_index(counts, cols.active[a]);
      table.rank_order = rank_by_score(cols.active, table.score, true);
      table.lower_is_better = true;
      break;
    }
    case ScoreMethod::KruskalWallis: {
      const bool lower = opts.kw_smaller_is_better;
      const double worst = lower ? kInf : -kInf;
      table.score.assign(num_features, worst);
      std::vector<RankedValue> sorted;
      std::vector<std::uint32_t> zeros(cols.num_classes);
      for (std::size_t a = 0; a < m; ++a) {
        const auto rows = cols.rows_of(a);
        const auto vals = cols.values_of(a);
        sorted.clear();
        zeros.assign(cols.class_totals.begin(), cols.class_totals.end());
        for (std::size_t t = 0; t < rows.size(); ++t) {
          const auto c = cols.row_class[rows[t]];
          --zeros[c];
          sorted.push_back({vals[t], c});
        }
        std::sort(sorted.begin(), sorted.end(),
                  [](const RankedValue& x, const RankedValue& y) { return x.value < y.value; });
        // Degenerate columns stay at the worst value.
        if (const auto hstat = kw_statistic(sorted, zeros, cols.class_totals)) {
          table.score[cols.active[a]] = *hstat;
        }
      }
      table.rank_order = rank_by_score(cols.active, table.score, lower);
      table.lower_is_better = lower;
      break;
    }
    case ScoreMethod::MrmrDifference:
    case ScoreMethod::MrmrQuotient: {
      table.score.assign(num_features, -kInf);
      const auto flavor = method == ScoreMethod::MrmrDifference ? MrmrFlavor::Difference
                                                                : MrmrFlavor::Quotient;
      const std::size_t k = std::clamp<std::size_t>(
          static_cast<std::size_t>(std::ceil(opts.mrmr_greedy_fraction * static_cast<double>(m))), 1, m);
      const auto res = mrmr_select(cols, k, flavor, opts.discretization);
      std::vector<std::uint8_t> picked(num_features, 0);
      for (std::size_t t = 0; t < res.order.size(); ++t) {
        table.score[res.order[t]] = res.criterion[t];
        picked[res.order[t]] = 1;
      }
      table.rank_order = res.order;
      // Tail by relevance; scores there are relevance values.
      std::vector<FeatureId> rest;
      std::vector<double> rel(num_features, -kInf);
      for (std::size_t a = 0; a < m; ++a) {
        rel[cols.active[a]] = res.relevance[a];
        if (!picked[cols.active[a]]) rest.push_back(cols.active[a]);
      }
      for (FeatureId f : rank_by_score(rest, rel, false)) {
        table.score[f] = rel[f];
        table.rank_order.push_back(f);
      }
      break;
    }
  }
  return table;
}

}  // namespace hfsel
