#pragma once

// End-to-end training: split, score every node, pick subsets, tune lambda,
// retrain on the full training set.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hfsel/corpus.hpp"
#include "hfsel/evaluation.hpp"
#include "hfsel/hierarchy.hpp"
#include "hfsel/scoring.hpp"
#include "hfsel/selection.hpp"
#include "hfsel/trainer.hpp"
#include "json.hpp"

namespace hfsel {

enum class FsMode { Global, Adaptive };
std::string_view to_string(FsMode m);
FsMode parse_fs_mode(std::string_view s);

enum class GlobalMetric { Micro, Macro };

struct PipelineConfig {
  std::optional<ScoreMethod> method = ScoreMethod::Gini;  // nullopt: all features
  FsMode mode = FsMode::Global;
  TuningGrid grid;
  GlobalMetric global_metric = GlobalMetric::Micro;
  ScoringOptions scoring;
  TrainingConfig training;
  SplitSpec split;
  bool tune_lambda = true;
  bool tfidf = false;        // df from the training file only, frozen into the model
  bool l2_normalize = false; // ignored when tfidf is set (tf-idf normalizes already)
  bool flat = false;         // ignore the taxonomy's internal structure

  // Seeds of split and trainer follow one knob.
  void set_seed(std::uint64_t seed) {
    split.seed = seed;
    training.seed = seed;
  }
};

struct NodeSelectionRecord {
  NodeIndex node = 0;
  double fraction = 1.0;
  std::size_t subset_size = 0;
  double validation_score = 0.0;
  std::size_t validation_instances = 0;
  bool fallback = false;
  double lambda = 1.0;
  bool lambda_fallback = false;       // too few validation rows: global lambda
  std::vector<double> lambda_scores;  // routing accuracy per lambda grid value
};

struct StageTimings {
  double preprocess = 0.0;  // idf / normalization
  double scoring = 0.0;     // feature scoring over all nodes
  double selection = 0.0;   // fraction search
  double lambda = 0.0;      // lambda grid search
  double training = 0.0;    // final retrain
};

struct PipelineResult {
  TrainedModel model;
  std::vector<NodeSelectionRecord> nodes;  // ascending node index
  std::optional<GlobalSelection> global;   // set when selection ran
  std::size_t fallback_count = 0;
  std::optional<double> global_lambda;     // end-to-end lambda winner
  std::vector<double> lambda_grid_scores;  // validation score per lambda
  StageTimings timings;
  std::size_t train_rows = 0;
  std::size_t validation_rows = 0;
};

// `data` labels are leaf ids of `taxonomy`.
PipelineResult run_pipeline(const Hierarchy& taxonomy, const Dataset& data, const PipelineConfig& cfg);

// Per-node selection report (method, fraction, |subset|, validation score,
// fallback flag, lambda).
nlohmann::json selection_manifest(const PipelineResult& r, const PipelineConfig& cfg);

struct EvalSummary {
  double micro_f1 = 0.0;
  bool micro_undefined = false;
  double macro_f1 = 0.0;
  std::vector<double> per_class_f1;  // in leaf order
  LevelErrors levels;
  std::vector<NodeIndex> truth;
  std::vector<NodeIndex> predicted;
  double predict_seconds = 0.0;
};

// Applies the model's input transform to raw `data`, predicts and scores.
EvalSummary evaluate_model(const TrainedModel& m, const Dataset& raw);

// Training-size experiment: per size and repetition, sample `size` rows per
// class from `train`, fit each configuration, score on `test`.
struct SweepCell {
  std::size_t per_class = 0;
  std::string config;
  std::vector<double> micro_f1;  // one per repetition
  std::vector<double> macro_f1;
  double micro_mean = 0.0, micro_std = 0.0;
  double macro_mean = 0.0, macro_std = 0.0;
};

std::vector<SweepCell> run_sweep(const Hierarchy& taxonomy, const Dataset& train, const Dataset& test,
                                 const std::vector<std::size_t>& per_class_sizes, std::size_t repetitions,
                                 const std::vector<std::pair<std::string, PipelineConfig>>& configs);

}  // namespace hfsel
