#include "hfsel/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "hfsel/error.hpp"
#include "hfsel/parallel.hpp"
#include "hfsel/predictor.hpp"

namespace hfsel {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Nodes that cannot be scored (one populated child, no rows) rank every
// feature by id; whatever they keep only affects the parameter count.
FeatureScoreTable unscored_table(NodeIndex node, std::size_t num_features, ScoreMethod method) {
  FeatureScoreTable t;
  t.node = node;
  t.method = method;
  t.score.assign(num_features, 0.0);
  t.rank_order.resize(num_features);
  std::iota(t.rank_order.begin(), t.rank_order.end(), FeatureId{0});
  t.lower_is_better = method == ScoreMethod::Gini;
  return t;
}

std::string grid_string(const std::vector<double>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

double f1_of(const Hierarchy& h, const std::vector<NodeIndex>& truth, const std::vector<NodeIndex>& pred,
             GlobalMetric metric) {
  const auto stats = ConfusionStats::build(h, truth, pred);
  return metric == GlobalMetric::Micro ? micro_f1(stats).value : macro_f1(stats);
}

// Throwaway models for every (node, grid fraction) pair, trained at the
// default lambda on the training portion.
struct FractionCache {
  std::vector<std::vector<NodeModel>> models;  // [internal position][grid index]
  std::vector<std::vector<double>> accuracy;
};

}  // namespace

std::string_view to_string(FsMode m) { return m == FsMode::Global ? "global" : "adaptive"; }

FsMode parse_fs_mode(std::string_view s) {
  if (s == "global") return FsMode::Global;
  if (s == "adaptive") return FsMode::Adaptive;
  throw Error(ErrorCode::InvalidArgument, "unknown fs mode '" + std::string(s) + "'");
}

PipelineResult run_pipeline(const Hierarchy& taxonomy, const Dataset& data, const PipelineConfig& cfg) {
  cfg.training.validate();
  if (cfg.method) cfg.grid.validate();
  if (data.num_instances() == 0) throw Error(ErrorCode::EmptyInput, "training data is empty");

  const Hierarchy h = cfg.flat ? flatten_to_leaves(taxonomy) : taxonomy;
  resolve_labels(h, data.labels());
  const auto& internal = h.internal_nodes();
  const std::size_t F = data.num_features();
  PipelineResult out;

  auto t0 = Clock::now();
  std::vector<double> idf;
  Dataset work;
  if (cfg.tfidf) {
    idf = fit_idf(data);
    work = apply_idf(data, idf);
  } else if (cfg.l2_normalize) {
    work = l2_normalize(data);
  } else {
    work = data;
  }
  work.set_num_features(F);
  out.timings.preprocess = since(t0);

  SubsetMap subsets;
  std::map<NodeIndex, double> lambdas;
  std::map<NodeIndex, NodeSelectionRecord> records;
  for (NodeIndex n : internal) records[n].node = n;

  const bool need_split = cfg.method.has_value() || cfg.tune_lambda;
  Dataset train, val;
  std::vector<NodeTrainingView> train_views, val_views;
  if (need_split) {
    const auto idx = split_indices(work, cfg.split);
    train = work.subset(idx.train);
    val = work.subset(idx.validation);
    train_views = build_node_views(h, train.labels());
    val_views = build_node_views(h, val.labels());
    out.train_rows = train.num_instances();
    out.validation_rows = val.num_instances();
  } else {
    out.train_rows = work.num_instances();
  }

  if (!cfg.method) {
    for (NodeIndex n : internal) {
      subsets[n] = all_features(n, F);
      records[n].subset_size = F;
    }
  } else {
    const ScoreMethod method = *cfg.method;
    t0 = Clock::now();
    std::vector<FeatureScoreTable> table_list(internal.size());
    parallel_for(internal.size(), [&](std::size_t i) {
      const NodeIndex n = internal[i];
      try {
        table_list[i] = score_node(train_views[n], train, h, method, cfg.scoring);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::SingleChildNode && e.code() != ErrorCode::NoInstances) throw;
        table_list[i] = unscored_table(n, F, method);
      }
    });
    ScoreTables tables;
    for (std::size_t i = 0; i < internal.size(); ++i) tables.emplace(internal[i], std::move(table_list[i]));
    out.timings.scoring = since(t0);

    t0 = Clock::now();
    const auto& fractions = cfg.grid.fractions;
    FractionCache cache;
    cache.models.assign(internal.size(), std::vector<NodeModel>(fractions.size()));
    cache.accuracy.assign(internal.size(), std::vector<double>(fractions.size(), 0.0));
    std::vector<std::size_t> position(h.size(), 0);
    for (std::size_t i = 0; i < internal.size(); ++i) position[internal[i]] = i;

    parallel_for(internal.size() * fractions.size(), [&](std::size_t job) {
      const std::size_t i = job / fractions.size(), g = job % fractions.size();
      const NodeIndex n = internal[i];
      const auto subset = prefix_subset(tables.at(n), fractions[g]).features;
      const std::size_t k = h.children(n).size();
      const auto tr = NodeDesign::build(train_views[n], train, subset, k);
      const auto va = NodeDesign::build(val_views[n], val, subset, k);
      cache.models[i][g] = train_node(tr, n, subset, cfg.training.default_lambda, cfg.training);
      cache.accuracy[i][g] = routing_accuracy(cache.models[i][g], va);
    });

    auto grid_index = [&](double p) {
      const auto it = std::find(fractions.begin(), fractions.end(), p);
      return static_cast<std::size_t>(it - fractions.begin());
    };
    const auto val_truth = resolve_labels(h, val.labels());
    auto global = global_select(tables, cfg.grid, [&](double p) {
      const std::size_t g = grid_index(p);
      TrainedModel tmp;
      tmp.hierarchy = h;
      tmp.num_features = F;
      tmp.nodes.resize(h.size());
      for (std::size_t i = 0; i < internal.size(); ++i) tmp.nodes[internal[i]] = cache.models[i][g];
      const auto pred = predict_batch(tmp, val).leaves;
      return f1_of(h, val_truth, pred, cfg.global_metric);
    });

    if (cfg.mode == FsMode::Global) {
      subsets = global.subsets;
      for (NodeIndex n : internal) {
        auto& r = records[n];
        r.fraction = global.fraction;
        r.subset_size = subsets.at(n).size();
        r.validation_score = cache.accuracy[position[n]][grid_index(global.fraction)];
        r.validation_instances = val_views[n].count();
      }
    } else {
      const auto adaptive = adaptive_select(
          tables, cfg.grid,
          [&](NodeIndex n, double p) {
            return NodeScore{cache.accuracy[position[n]][grid_index(p)], val_views[n].count()};
          },
          global.fraction);
      subsets = adaptive.subsets();
      out.fallback_count = adaptive.fallback_count();
      for (const auto& [n, sel] : adaptive.nodes) {
        auto& r = records[n];
        r.fraction = sel.subset.fraction;
        r.subset_size = sel.subset.size();
        r.validation_score = sel.validation_score;
        r.validation_instances = sel.validation_instances;
        r.fallback = sel.fallback;
      }
    }
    out.global = std::move(global);
    out.timings.selection = since(t0);
  }

  t0 = Clock::now();
  if (cfg.tune_lambda) {
    // Every (node, lambda) pair is fitted once on the training portion. A
    // single lambda is picked end to end, then nodes with enough validation
    // rows override it with their own routing-accuracy winner.
    const auto& grid = cfg.training.lambda_grid;
    std::vector<std::vector<NodeModel>> fits(internal.size(), std::vector<NodeModel>(grid.size()));
    std::vector<std::vector<double>> acc(internal.size(), std::vector<double>(grid.size(), 0.0));
    parallel_for(internal.size() * grid.size(), [&](std::size_t job) {
      const std::size_t i = job / grid.size(), l = job % grid.size();
      const NodeIndex n = internal[i];
      const auto& subset = subsets.at(n).features;
      const std::size_t k = h.children(n).size();
      const auto tr = NodeDesign::build(train_views[n], train, subset, k);
      const auto va = NodeDesign::build(val_views[n], val, subset, k);
      fits[i][l] = train_node(tr, n, subset, grid[l], cfg.training);
      acc[i][l] = routing_accuracy(fits[i][l], va);
    });
    const auto val_truth = resolve_labels(h, val.labels());
    std::size_t best_global = 0;
    double best_score = -1.0;
    for (std::size_t l = 0; l < grid.size(); ++l) {
      TrainedModel tmp;
      tmp.hierarchy = h;
      tmp.num_features = F;
      tmp.nodes.resize(h.size());
      for (std::size_t i = 0; i < internal.size(); ++i) tmp.nodes[internal[i]] = std::move(fits[i][l]);
      const double score = f1_of(h, val_truth, predict_batch(tmp, val).leaves, cfg.global_metric);
      out.lambda_grid_scores.push_back(score);
      if (score > best_score) {
        best_score = score;
        best_global = l;
      }
    }
    out.global_lambda = grid[best_global];
    for (std::size_t i = 0; i < internal.size(); ++i) {
      const NodeIndex n = internal[i];
      auto& r = records[n];
      r.lambda = *out.global_lambda;
      r.lambda_scores = acc[i];
      if (h.children(n).size() < 2 || val_views[n].count() < kMinAdaptiveValidation || train_views[n].count() == 0) {
        r.lambda_fallback = true;
        continue;
      }
      std::size_t best = 0;
      for (std::size_t l = 1; l < grid.size(); ++l) {
        if (acc[i][l] > acc[i][best]) best = l;
      }
      r.lambda = grid[best];
    }
  } else {
    for (NodeIndex n : internal) records[n].lambda = cfg.training.default_lambda;
  }
  for (NodeIndex n : internal) lambdas[n] = records[n].lambda;
  out.timings.lambda = since(t0);

  t0 = Clock::now();
  out.model = train_hierarchy(h, work, subsets, lambdas, cfg.training);
  out.timings.training = since(t0);

  out.model.idf = std::move(idf);
  out.model.l2_normalize_inputs = !cfg.tfidf && cfg.l2_normalize;
  auto& meta = out.model.metadata;
  meta["fs_method"] = cfg.method ? std::string(to_string(*cfg.method)) : "none";
  meta["fs_mode"] = cfg.method ? std::string(to_string(cfg.mode)) : "none";
  meta["fs_grid"] = grid_string(cfg.grid.fractions);
  meta["flat"] = cfg.flat ? "true" : "false";
  meta["input_transform"] = cfg.tfidf ? "tfidf(df from training file)" : cfg.l2_normalize ? "l2" : "none";
  meta["lambda_protocol"] = cfg.tune_lambda
                                ? "fraction search at default lambda; lambda grid on the chosen subsets, "
                                  "per node where validation allows, else the end-to-end winner"
                                : "default lambda";
  meta["final_fit"] = "full training file with frozen subsets";
  meta["split"] = std::to_string(cfg.split.train_fraction) + (cfg.split.stratified ? " stratified" : "") +
                  ", seed " + std::to_string(cfg.split.seed);

  for (auto& [n, r] : records) out.nodes.push_back(std::move(r));
  return out;
}

nlohmann::json selection_manifest(const PipelineResult& r, const PipelineConfig& cfg) {
  const auto& h = r.model.hierarchy;
  nlohmann::json j;
  j["method"] = cfg.method ? std::string(to_string(*cfg.method)) : "none";
  j["mode"] = std::string(to_string(cfg.mode));
  j["grid"] = cfg.grid.fractions;
  j["global_metric"] = cfg.global_metric == GlobalMetric::Micro ? "micro_f1" : "macro_f1";
  if (r.global) {
    j["global_fraction"] = r.global->fraction;
    j["global_validation_score"] = r.global->score;
    j["global_grid_scores"] = r.global->grid_scores;
  }
  j["fallback_count"] = r.fallback_count;
  if (r.global_lambda) {
    j["global_lambda"] = *r.global_lambda;
    j["lambda_grid"] = cfg.training.lambda_grid;
    j["lambda_grid_scores"] = r.lambda_grid_scores;
  }
  j["train_rows"] = r.train_rows;
  j["validation_rows"] = r.validation_rows;
  auto nodes = nlohmann::json::array();
  for (const auto& n : r.nodes) {
    nodes.push_back({{"node", h.external_id(n.node)},
                     {"method", j["method"]},
                     {"fraction", n.fraction},
                     {"subset_size", n.subset_size},
                     {"validation_score", n.validation_score},
                     {"validation_instances", n.validation_instances},
                     {"fallback", n.fallback},
                     {"lambda", n.lambda},
                     {"lambda_fallback", n.lambda_fallback},
                     {"lambda_scores", n.lambda_scores}});
  }
  j["nodes"] = std::move(nodes);
  return j;
}

EvalSummary evaluate_model(const TrainedModel& m, const Dataset& raw) {
  EvalSummary s;
  const Dataset x = prepare_inputs(m, raw);
  s.truth = resolve_labels(m.hierarchy, raw.labels());
  const auto bp = predict_batch(m, x);
  s.predicted = bp.leaves;
  s.predict_seconds = bp.seconds;
  const auto stats = ConfusionStats::build(m.hierarchy, s.truth, s.predicted);
  const auto micro = micro_f1(stats);
  s.micro_f1 = micro.value;
  s.micro_undefined = micro.undefined;
  s.macro_f1 = macro_f1(stats);
  s.per_class_f1 = per_class_f1(stats);
  s.levels = levelwise_errors(m.hierarchy, s.truth, s.predicted);
  return s;
}

std::vector<SweepCell> run_sweep(const Hierarchy& taxonomy, const Dataset& train, const Dataset& test,
                                 const std::vector<std::size_t>& per_class_sizes, std::size_t repetitions,
                                 const std::vector<std::pair<std::string, PipelineConfig>>& configs) {
  std::vector<SweepCell> cells;
  auto mean_std = [](const std::vector<double>& v, double& mean, double& sd) {
    mean = v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  };
  for (std::size_t size : per_class_sizes) {
    std::vector<SweepCell> row(configs.size());
    for (std::size_t c = 0; c < configs.size(); ++c) {
      row[c].per_class = size;
      row[c].config = configs[c].first;
    }
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
      const std::uint64_t seed = configs.empty() ? 42 : configs.front().second.split.seed + rep;
      const auto idx = sample_per_class(train, size, seed);
      const Dataset sample = train.subset(idx);
      for (std::size_t c = 0; c < configs.size(); ++c) {
        PipelineConfig pc = configs[c].second;
        pc.set_seed(seed);
        const auto result = run_pipeline(taxonomy, sample, pc);
        const auto eval = evaluate_model(result.model, test);
        row[c].micro_f1.push_back(eval.micro_f1);
        row[c].macro_f1.push_back(eval.macro_f1);
      }
    }
    for (auto& cell : row) {
      mean_std(cell.micro_f1, cell.micro_mean, cell.micro_std);
      mean_std(cell.macro_f1, cell.macro_mean, cell.macro_std);
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

}  // namespace hfsel
