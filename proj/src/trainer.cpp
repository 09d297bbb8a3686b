#include "hfsel/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "hfsel/error.hpp"
#include "hfsel/kernels.hpp"
#include "hfsel/parallel.hpp"

namespace hfsel {

std::string_view to_string(Regularizer r) { return r == Regularizer::L1 ? "l1" : "l2"; }

void TrainingConfig::validate() const {
  if (lambda_grid.empty()) throw Error(ErrorCode::EmptyGrid, "lambda grid is empty");
  for (double l : lambda_grid) {
    if (!(l > 0.0) || !std::isfinite(l)) throw Error(ErrorCode::InvalidArgument, "lambda must be positive");
  }
  if (!(default_lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be positive");
  if (!(tolerance > 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerance must be positive");
  if (max_epochs == 0) throw Error(ErrorCode::InvalidArgument, "max_epochs must be positive");
}

// ---------------------------------------------------------------------------
// Design matrices

NodeDesign NodeDesign::build(const NodeTrainingView& view, const Dataset& data,
                             std::span<const FeatureId> subset, std::size_t num_children) {
  NodeDesign d;
  d.num_cols_ = subset.size();
  d.num_children_ = num_children;
  const std::size_t span_features =
      std::max<std::size_t>(data.num_features(), subset.empty() ? 0 : std::size_t{subset.back()} + 1);
  constexpr std::uint32_t kAbsent = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> local(span_features, kAbsent);
  for (std::size_t j = 0; j < subset.size(); ++j) {
    if (j > 0 && subset[j] <= subset[j - 1]) {
      throw Error(ErrorCode::InvalidArgument, "subset must be strictly increasing");
    }
    local[subset[j]] = static_cast<std::uint32_t>(j);
  }

  d.branch_.reserve(view.count());
  d.row_ptr_.reserve(view.count() + 1);
  d.row_ptr_.push_back(0);
  std::vector<std::uint64_t> col_count(d.num_cols_ + 1, 0);
  for (const auto& routed : view.rows) {
    d.branch_.push_back(routed.branch);
    const auto row = data.row(routed.instance);
    for (std::size_t k = 0; k < row.size(); ++k) {
      const std::uint32_t j = local[row.indices[k]];
      if (j == kAbsent || row.values[k] == 0.0) continue;
      d.row_idx_.push_back(j);
      d.row_val_.push_back(row.values[k]);
      ++col_count[j + 1];
    }
    d.row_ptr_.push_back(d.row_idx_.size());
  }

  for (std::size_t j = 0; j < d.num_cols_; ++j) col_count[j + 1] += col_count[j];
  d.col_ptr_ = col_count;
  d.col_idx_.resize(d.row_idx_.size());
  d.col_val_.resize(d.row_idx_.size());
  std::vector<std::uint64_t> fill(d.col_ptr_.begin(), d.col_ptr_.end() - 1);
  for (std::size_t r = 0; r < d.rows(); ++r) {
    for (auto k = d.row_ptr_[r]; k < d.row_ptr_[r + 1]; ++k) {
      const auto slot = fill[d.row_idx_[k]]++;
      d.col_idx_[slot] = static_cast<std::uint32_t>(r);
      d.col_val_[slot] = d.row_val_[k];
    }
  }
  return d;
}

void NodeDesign::multiply(std::span<const double> w, std::span<double> margins) const {
  const auto& kt = kernels::active();
  for (std::size_t r = 0; r < rows(); ++r) {
    const auto b = row_ptr_[r];
    margins[r] = kt.gather_dot(w.data(), row_idx_.data() + b, row_val_.data() + b, row_ptr_[r + 1] - b);
  }
}

void NodeDesign::multiply_transpose(std::span<const double> v, std::span<double> out) const {
  const auto& kt = kernels::active();
  for (std::size_t j = 0; j < cols(); ++j) {
    const auto b = col_ptr_[j];
    out[j] = kt.gather_dot(v.data(), col_idx_.data() + b, col_val_.data() + b, col_ptr_[j + 1] - b);
  }
}

std::vector<double> NodeDesign::binary_labels(std::uint32_t child_branch) const {
  std::vector<double> y(rows());
  for (std::size_t r = 0; r < rows(); ++r) y[r] = branch_[r] == child_branch ? 1.0 : -1.0;
  return y;
}

// ---------------------------------------------------------------------------
// Objective

namespace {

// log(1 + exp(-u))
inline double softplus_neg(double u) {
  return u > 0.0 ? std::log1p(std::exp(-u)) : -u + std::log1p(std::exp(u));
}

// 1 / (1 + exp(u))
inline double sigmoid_neg(double u) {
  if (u >= 0.0) {
    const double e = std::exp(-u);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(u));
}

double loss_sum(std::span<const double> y, std::span<const double> margins) {
  double s = 0.0;
  for (std::size_t r = 0; r < y.size(); ++r) s += softplus_neg(y[r] * margins[r]);
  return s;
}

double regularizer(std::span<const double> w, Regularizer reg) {
  const auto& kt = kernels::active();
  return reg == Regularizer::L1 ? kt.l1_norm(w.data(), w.size()) : kt.sq_norm(w.data(), w.size());
}

// dL/dmargin scaled by lambda.
void margin_gradient(std::span<const double> y, std::span<const double> margins, double lambda,
                     std::span<double> out) {
  for (std::size_t r = 0; r < y.size(); ++r) out[r] = -lambda * y[r] * sigmoid_neg(y[r] * margins[r]);
}

// Largest eigenvalue of X^T X by power iteration from the all-ones vector.
double spectral_sq_norm(const NodeDesign& d) {
  if (d.cols() == 0 || d.rows() == 0) return 0.0;
  const auto& kt = kernels::active();
  std::vector<double> v(d.cols(), 1.0 / std::sqrt(static_cast<double>(d.cols())));
  std::vector<double> xv(d.rows());
  std::vector<double> next(d.cols());
  double estimate = 0.0;
  for (int it = 0; it < 30; ++it) {
    d.multiply(v, xv);
    d.multiply_transpose(xv, next);
    const double norm = std::sqrt(kt.sq_norm(next.data(), next.size()));
    if (norm == 0.0) return estimate;
    const double prev = estimate;
    estimate = norm;
    for (std::size_t j = 0; j < next.size(); ++j) v[j] = next[j] / norm;
    if (it > 3 && std::fabs(estimate - prev) <= 1e-3 * estimate) break;
  }
  return estimate;
}

}  // namespace

double objective(const NodeDesign& d, std::span<const double> y, std::span<const double> w,
                 double lambda, Regularizer reg) {
  std::vector<double> margins(d.rows());
  d.multiply(w, margins);
  return lambda * loss_sum(y, margins) + regularizer(w, reg);
}

std::vector<double> smooth_gradient(const NodeDesign& d, std::span<const double> y,
                                    std::span<const double> w, double lambda, Regularizer reg) {
  std::vector<double> margins(d.rows());
  d.multiply(w, margins);
  std::vector<double> gm(d.rows());
  margin_gradient(y, margins, lambda, gm);
  std::vector<double> grad(d.cols());
  d.multiply_transpose(gm, grad);
  if (reg == Regularizer::L2) {
    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += 2.0 * w[j];
  }
  return grad;
}

BinaryFit fit_binary(const NodeDesign& d, std::span<const double> y, double lambda,
                     const TrainingConfig& cfg, bool record_history) {
  if (y.size() != d.rows()) throw Error(ErrorCode::LengthMismatch, "labels vs design rows");
  if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be positive");
  const auto& kt = kernels::active();
  const std::size_t p = d.cols();
  const std::size_t n = d.rows();

  BinaryFit fit;
  std::vector<double> w(p, 0.0);
  std::vector<double> z(p, 0.0);
  std::vector<double> grad(p, 0.0);
  std::vector<double> m(n, 0.0);
  std::vector<double> mz(n, 0.0);
  std::vector<double> gm(n, 0.0);

  double f = lambda * loss_sum(y, m);
  double total = f;
  const double lipschitz = 0.25 * lambda * spectral_sq_norm(d);
  double step = lipschitz > 0.0 ? 1.0 / lipschitz : 1.0;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs && p > 0; ++epoch) {
    margin_gradient(y, m, lambda, gm);
    d.multiply_transpose(gm, grad);

    bool backtracked = false;
    double fz = 0.0;
    double gd = 0.0;
    double sd = 0.0;
    for (int attempt = 0; attempt < 60; ++attempt) {
      if (cfg.regularizer == Regularizer::L1) {
        kt.prox_l1_step(z.data(), w.data(), grad.data(), step, step, p);
      } else {
        kt.prox_l2_step(z.data(), w.data(), grad.data(), step, 1.0 / (1.0 + 2.0 * step), p);
      }
      kt.diff_stats(z.data(), w.data(), grad.data(), p, &gd, &sd);
      if (sd == 0.0) break;
      d.multiply(z, mz);
      fz = lambda * loss_sum(y, mz);
      const double slack = 1e-12 * std::max(1.0, std::fabs(f));
      if (fz <= f + gd + sd / (2.0 * step) + slack) break;
      step *= 0.5;
      backtracked = true;
    }
    ++fit.epochs;
    if (sd == 0.0) {
      // w is a fixed point of the proximal map.
      fit.converged = true;
      if (record_history) fit.history.push_back(total);
      break;
    }
    const double total_z = fz + regularizer(z, cfg.regularizer);
    if (total_z > total) {
      // Rounding can defeat the sufficient-decrease test near the optimum;
      // keep the better point and stop.
      fit.converged = true;
      if (record_history) fit.history.push_back(total);
      break;
    }
    const double decrease = (total - total_z) / std::max(std::fabs(total), 1e-300);
    w.swap(z);
    m.swap(mz);
    f = fz;
    total = total_z;
    if (record_history) fit.history.push_back(total);
    if (decrease < cfg.tolerance) {
      fit.converged = true;
      break;
    }
    if (!backtracked) step *= 2.0;
  }
  fit.objective = total;
  fit.weights = std::move(w);
  return fit;
}

// ---------------------------------------------------------------------------
// Node models

NodeModel train_node(const NodeTrainingView& view, const Dataset& data,
                     const FeatureSubset& subset, const Hierarchy& h, double lambda,
                     const TrainingConfig& cfg) {
  if (view.count() == 0) {
    throw Error(ErrorCode::NoInstances, "node has no training instances", h.external_id(view.node));
  }
  const auto design = NodeDesign::build(view, data, subset.features, h.children(view.node).size());
  return train_node(design, view.node, subset.features, lambda, cfg);
}

NodeModel train_node(const NodeDesign& design, NodeIndex node, std::span<const FeatureId> subset,
                     double lambda, const TrainingConfig& cfg) {
  NodeModel model;
  model.node = node;
  model.subset.assign(subset.begin(), subset.end());
  model.num_children = design.num_children();
  model.lambda = lambda;
  model.weights.assign(model.num_children * subset.size(), 0.0f);
  model.fits.resize(model.num_children);

  if (design.rows() == 0 || model.num_children < 2) {
    model.trivial = true;
    return model;
  }

  for (std::size_t c = 0; c < model.num_children; ++c) {
    const auto y = design.binary_labels(static_cast<std::uint32_t>(c));
    const BinaryFit fit = fit_binary(design, y, lambda, cfg);
    std::size_t zeros = 0;
    for (std::size_t j = 0; j < fit.weights.size(); ++j) {
      model.weights[c * subset.size() + j] = static_cast<float>(fit.weights[j]);
      zeros += fit.weights[j] == 0.0;
    }
    model.fits[c] = {fit.epochs, fit.objective,
                     fit.weights.empty() ? 1.0 : static_cast<double>(zeros) / fit.weights.size(),
                     fit.converged};
  }
  return model;
}

double routing_accuracy(const NodeModel& model, const NodeDesign& validation) {
  if (validation.rows() == 0) return 0.0;
  std::vector<double> w(model.subset.size());
  std::vector<double> scores(validation.rows() * model.num_children);
  std::vector<double> margins(validation.rows());
  for (std::size_t c = 0; c < model.num_children; ++c) {
    const auto cw = model.child_weights(c);
    for (std::size_t j = 0; j < w.size(); ++j) w[j] = cw[j];
    validation.multiply(w, margins);
    for (std::size_t r = 0; r < validation.rows(); ++r) scores[r * model.num_children + c] = margins[r];
  }
  std::size_t correct = 0;
  for (std::size_t r = 0; r < validation.rows(); ++r) {
    std::uint32_t best = 0;
    for (std::uint32_t c = 1; c < model.num_children; ++c) {
      if (scores[r * model.num_children + c] > scores[r * model.num_children + best]) best = c;
    }
    correct += best == validation.branch(r);
  }
  return static_cast<double>(correct) / static_cast<double>(validation.rows());
}

LambdaTuning tune_lambda(const NodeDesign& train, const NodeDesign& validation, NodeIndex node,
                         std::span<const FeatureId> subset, const TrainingConfig& cfg) {
  if (cfg.lambda_grid.empty()) throw Error(ErrorCode::EmptyGrid, "lambda grid is empty");
  LambdaTuning out;
  double best = -1.0;
  for (double lambda : cfg.lambda_grid) {
    NodeModel model = train_node(train, node, subset, lambda, cfg);
    const double acc = routing_accuracy(model, validation);
    out.grid_scores.push_back(acc);
    if (acc > best) {
      best = acc;
      out.lambda = lambda;
      out.model = std::move(model);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hierarchy

std::size_t parameter_count(const Hierarchy& h,
                            const std::function<std::size_t(NodeIndex)>& subset_size) {
  std::size_t total = 0;
  for (NodeIndex n : h.internal_nodes()) total += h.children(n).size() * subset_size(n);
  return total;
}

std::size_t TrainedModel::parameter_count() const {
  return hfsel::parameter_count(hierarchy, [&](NodeIndex n) {
    return nodes.size() > n && nodes[n] ? nodes[n]->subset.size() : std::size_t{0};
  });
}

void TrainedModel::check_complete() const {
  for (NodeIndex n : hierarchy.internal_nodes()) {
    if (nodes.size() <= n || !nodes[n]) {
      throw Error(ErrorCode::ModelIncomplete, "internal node has no model", hierarchy.external_id(n));
    }
  }
}

TrainedModel train_hierarchy(const Hierarchy& h, const Dataset& data, const SubsetMap& subsets,
                             const std::map<NodeIndex, double>& lambdas,
                             const TrainingConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto views = build_node_views(h, data.labels());
  const auto& internal = h.internal_nodes();
  for (NodeIndex n : internal) {
    if (!subsets.count(n)) {
      throw Error(ErrorCode::InvalidArgument, "no feature subset for node", h.external_id(n));
    }
  }

  TrainedModel model;
  model.hierarchy = h;
  model.num_features = data.num_features();
  model.config = cfg;
  model.nodes.resize(h.size());
  std::vector<double> seconds(internal.size(), 0.0);

  parallel_for(internal.size(), [&](std::size_t i) {
    const NodeIndex n = internal[i];
    const auto t0 = std::chrono::steady_clock::now();
    const auto lit = lambdas.find(n);
    const double lambda = lit == lambdas.end() ? cfg.default_lambda : lit->second;
    try {
      const auto& subset = subsets.at(n).features;
      const auto design = NodeDesign::build(views[n], data, subset, h.children(n).size());
      model.nodes[n] = train_node(design, n, subset, lambda, cfg);
    } catch (const Error& e) {
      throw Error(e.code(), std::string("while training node: ") + e.what(), h.external_id(n));
    }
    seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });

  for (std::size_t i = 0; i < internal.size(); ++i) {
    model.manifest.node_seconds.emplace_back(internal[i], seconds[i]);
  }
  model.manifest.config = cfg;
  model.manifest.parameter_count = model.parameter_count();
  model.manifest.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return model;
}

}  // namespace hfsel
