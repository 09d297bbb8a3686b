#pragma once

// One-vs-rest regularized logistic regression at every internal node.
//
// For child c of node n the fitted weights minimize
//
//   lambda * sum_i log(1 + exp(-y_i * w.x_i)) + R(w),   R = ||w||_1 or ||w||_2^2
//
// over the node's routed instances, with y_i = +1 when instance i routes to
// c and -1 otherwise. lambda scales the loss, so larger lambda means weaker
// regularization. There is no intercept.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hfsel/corpus.hpp"
#include "hfsel/hierarchy.hpp"
#include "hfsel/selection.hpp"

namespace hfsel {

enum class Regularizer { L1, L2 };
std::string_view to_string(Regularizer r);

struct TrainingConfig {
  std::vector<double> lambda_grid{0.001, 0.01, 0.1, 1, 10, 100, 1000};
  // Used where no per-node lambda has been tuned (e.g. during fraction search).
  double default_lambda = 1.0;
  Regularizer regularizer = Regularizer::L1;
  std::size_t max_epochs = 500;
  double tolerance = 1e-6;  // relative objective decrease per epoch
  std::uint64_t seed = 42;

  void validate() const;
};

// Instances routed at a node, restricted to a feature subset and stored in
// both row- and column-compressed form over local column positions.
class NodeDesign {
 public:
  // `subset` must be ascending. Features outside it are dropped.
  static NodeDesign build(const NodeTrainingView& view, const Dataset& data,
                          std::span<const FeatureId> subset, std::size_t num_children);

  std::size_t rows() const { return branch_.size(); }
  std::size_t cols() const { return num_cols_; }
  std::size_t num_children() const { return num_children_; }
  std::uint32_t branch(std::size_t r) const { return branch_[r]; }
  std::size_t nnz() const { return row_idx_.size(); }

  // margins[r] = w . x_r
  void multiply(std::span<const double> w, std::span<double> margins) const;
  // out[j] = sum_r x_rj * v[r]
  void multiply_transpose(std::span<const double> v, std::span<double> out) const;
  // Labels +1 for rows routed to `child_branch`, -1 otherwise.
  std::vector<double> binary_labels(std::uint32_t child_branch) const;

 private:
  std::size_t num_cols_ = 0;
  std::size_t num_children_ = 0;
  std::vector<std::uint32_t> branch_;
  std::vector<std::uint64_t> row_ptr_;
  std::vector<std::uint32_t> row_idx_;
  std::vector<double> row_val_;
  std::vector<std::uint64_t> col_ptr_;
  std::vector<std::uint32_t> col_idx_;
  std::vector<double> col_val_;
};

// Full objective (loss + regularizer) at w.
double objective(const NodeDesign& d, std::span<const double> y, std::span<const double> w,
                 double lambda, Regularizer reg);
// Gradient of the smooth part (lambda * loss, plus ||w||^2 under L2).
std::vector<double> smooth_gradient(const NodeDesign& d, std::span<const double> y,
                                    std::span<const double> w, double lambda, Regularizer reg);

struct BinaryFit {
  std::vector<double> weights;
  double objective = 0.0;
  std::size_t epochs = 0;
  bool converged = false;
  std::vector<double> history;  // objective after every epoch, when recorded
};

// Deterministic proximal gradient with backtracking line search, starting
// from w = 0. Stops when the relative objective decrease over an epoch drops
// below cfg.tolerance or after cfg.max_epochs.
BinaryFit fit_binary(const NodeDesign& d, std::span<const double> y, double lambda,
                     const TrainingConfig& cfg, bool record_history = false);

struct ChildFitInfo {
  std::size_t epochs = 0;
  double objective = 0.0;
  double zero_fraction = 0.0;
  bool converged = false;
};

struct NodeModel {
  NodeIndex node = 0;
  std::vector<FeatureId> subset;  // ascending global feature ids
  std::size_t num_children = 0;
  // Child-major: weights for child c occupy [c * subset.size(), (c+1) * subset.size()).
  std::vector<float> weights;
  double lambda = 0.0;
  bool trivial = false;  // single child or no instances: always routes to child 0
  std::vector<ChildFitInfo> fits;

  std::span<const float> child_weights(std::size_t c) const {
    return {weights.data() + c * subset.size(), subset.size()};
  }
  std::size_t parameter_count() const { return num_children * subset.size(); }
};

// Trains every child of the view's node on `subset`. Single-child nodes get a
// trivial all-zero model. Throws NoInstances for an empty view.
NodeModel train_node(const NodeTrainingView& view, const Dataset& data,
                     const FeatureSubset& subset, const Hierarchy& h, double lambda,
                     const TrainingConfig& cfg);
NodeModel train_node(const NodeDesign& design, NodeIndex node, std::span<const FeatureId> subset,
                     double lambda, const TrainingConfig& cfg);

// Fraction of validation rows whose highest-scoring child is the routed one
// (ties to the smaller branch). 0 when `validation` is empty.
double routing_accuracy(const NodeModel& model, const NodeDesign& validation);

struct LambdaTuning {
  double lambda = 0.0;
  std::vector<double> grid_scores;
  NodeModel model;
};

// Tries every grid value on `train`, scores routing accuracy on
// `validation`, keeps the best (ties to the smaller lambda). Throws EmptyGrid.
LambdaTuning tune_lambda(const NodeDesign& train, const NodeDesign& validation, NodeIndex node,
                         std::span<const FeatureId> subset, const TrainingConfig& cfg);

struct TrainingManifest {
  TrainingConfig config;
  std::vector<std::pair<NodeIndex, double>> node_seconds;
  double total_seconds = 0.0;
  std::size_t parameter_count = 0;
};

struct TrainedModel {
  Hierarchy hierarchy;
  std::size_t num_features = 0;
  // Indexed by NodeIndex; set for every internal node.
  std::vector<std::optional<NodeModel>> nodes;
  // Frozen idf weights applied to inputs before prediction; empty when the
  // data was not tf-idf transformed.
  std::vector<double> idf;
  bool l2_normalize_inputs = false;
  // Free-form run settings frozen into the model file (selection method,
  // mode, idf source, ...).
  std::map<std::string, std::string> metadata;
  TrainingConfig config;
  TrainingManifest manifest;

  std::size_t parameter_count() const;
  // Throws ModelIncomplete(node id) for the first internal node lacking a model.
  void check_complete() const;
};

// Sum over internal nodes of |children(n)| * subset_size(n).
std::size_t parameter_count(const Hierarchy& h, const std::function<std::size_t(NodeIndex)>& subset_size);

// Trains all internal nodes, each at lambdas[node] (cfg.default_lambda when
// absent). Nodes without training instances get a trivial model. Node errors
// are rethrown with the node's external id.
TrainedModel train_hierarchy(const Hierarchy& h, const Dataset& data, const SubsetMap& subsets,
                             const std::map<NodeIndex, double>& lambdas,
                             const TrainingConfig& cfg);

}  // namespace hfsel
