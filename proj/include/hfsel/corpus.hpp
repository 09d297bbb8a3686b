#pragma once

// Sparse labeled data: loading, tf-idf weighting, normalization and splits.

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hfsel/hierarchy.hpp"

namespace hfsel {

using FeatureId = std::uint32_t;

struct SparseRowView {
  std::span<const FeatureId> indices;
  std::span<const double> values;
  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
};

// Row-compressed instance matrix with one leaf label per row.
class Dataset {
 public:
  Dataset() : row_ptr_{0} {}

  std::size_t num_instances() const { return labels_.size(); }
  std::size_t num_features() const { return num_features_; }
  std::size_t nnz() const { return indices_.size(); }

  SparseRowView row(std::size_t i) const {
    const auto b = row_ptr_[i];
    const auto e = row_ptr_[i + 1];
    return {{indices_.data() + b, e - b}, {values_.data() + b, e - b}};
  }
  NodeId label(std::size_t i) const { return labels_[i]; }
  const std::vector<NodeId>& labels() const { return labels_; }
  // Position of each row in the file it was loaded from; preserved by subset().
  std::uint64_t instance_id(std::size_t i) const { return ids_[i]; }
  const std::vector<std::uint64_t>& instance_ids() const { return ids_; }

  // Appends a row. Indices must be strictly increasing and values finite.
  void add_row(std::span<const FeatureId> indices, std::span<const double> values, NodeId label);
  void add_row(std::span<const FeatureId> indices, std::span<const double> values, NodeId label,
               std::uint64_t instance_id);
  void set_num_features(std::size_t n);

  Dataset subset(std::span<const std::size_t> rows) const;

  const std::vector<std::uint64_t>& row_ptr() const { return row_ptr_; }
  const std::vector<FeatureId>& indices() const { return indices_; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<std::uint64_t> row_ptr_;
  std::vector<FeatureId> indices_;
  std::vector<double> values_;
  std::vector<NodeId> labels_;
  std::vector<std::uint64_t> ids_;
  std::size_t num_features_ = 0;
};

struct LoadOptions {
  // Indices in the file start at 1. A header comment "# index-base: 0|1"
  // overrides this flag for the file that carries it.
  bool one_based = false;
  // Lower bound for num_features (e.g. the training feature space).
  std::size_t min_features = 0;
};

// "label idx:val idx:val ..." per line. Rows are sorted by feature id.
// Errors: MalformedLine(line), NonFiniteValue(line), DuplicateFeatureInRow(line).
Dataset load_sparse(std::istream& in, const LoadOptions& opts = {});
// Files ending in ".gz" are decompressed on the fly.
Dataset load_sparse_file(const std::string& path, const LoadOptions& opts = {});
// Writes the 0-based text form with shortest round-trip value formatting.
void write_sparse(std::ostream& out, const Dataset& d);

// idf(f) = ln(N / df(f)), 0 for features absent from `d`.
std::vector<double> fit_idf(const Dataset& d);
// value *= idf(feature), zero products dropped, then each row L2-normalized.
// Features beyond idf.size() are dropped.
Dataset apply_idf(const Dataset& d, std::span<const double> idf);
Dataset tfidf_transform(const Dataset& d);
Dataset l2_normalize(const Dataset& d);

struct SplitSpec {
  double train_fraction = 0.9;
  std::uint64_t seed = 42;
  bool stratified = true;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

// Deterministic given (d, s). Stratified splits allocate per-label train
// counts by largest remainder, with at least one train row for every label
// that has two or more rows. DegenerateSplit if either side would be empty.
SplitIndices split_indices(const Dataset& d, const SplitSpec& s);
std::pair<Dataset, Dataset> split(const Dataset& d, const SplitSpec& s);

// Up to `per_class` randomly chosen rows of every label, ascending order.
std::vector<std::size_t> sample_per_class(const Dataset& d, std::size_t per_class,
                                          std::uint64_t seed);

// Fisher-Yates over a 64-bit Mersenne twister; identical on every platform.
void deterministic_shuffle(std::vector<std::size_t>& v, std::uint64_t seed);

}  // namespace hfsel
