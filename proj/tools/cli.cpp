#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "hfsel/corpus.hpp"
#include "hfsel/error.hpp"
#include "hfsel/evaluation.hpp"
#include "hfsel/hierarchy.hpp"
#include "hfsel/model_io.hpp"
#include "hfsel/parallel.hpp"
#include "hfsel/pipeline.hpp"
#include "hfsel/predictor.hpp"
#include "hfsel/scoring.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace hfsel::cli {

namespace {

enum class Stage { Usage, Taxonomy, Data, Model, Train, Output };

struct Failure {
  int code;
  std::string message;
};

int exit_code_for(Stage stage, ErrorCode code) {
  switch (stage) {
    case Stage::Usage:
      return kUsage;
    case Stage::Taxonomy:
      return code == ErrorCode::Io || code == ErrorCode::MalformedLine ? kData : kHierarchy;
    case Stage::Data:
    case Stage::Model:
      return kData;
    case Stage::Train:
      if (code == ErrorCode::UnknownLabel || code == ErrorCode::DegenerateSplit) return kData;
      if (code == ErrorCode::InvalidArgument || code == ErrorCode::EmptyGrid) return kUsage;
      return kTraining;
    case Stage::Output:
      return kFailure;
  }
  return kFailure;
}

template <class F>
auto guarded(Stage stage, const std::string& what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    // Line-level parse errors read as file:line: so editors can jump to them.
    const bool at_line = e.code() == ErrorCode::MalformedLine && e.subject();
    const std::string where = at_line ? what + ":" + std::to_string(*e.subject()) : what;
    throw Failure{exit_code_for(stage, e.code()), where + ": " + e.what()};
  }
}

using Clock = std::chrono::steady_clock;

class Timings {
 public:
  template <class F>
  auto time(const std::string& name, F&& f) -> decltype(f()) {
    const auto t0 = Clock::now();
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      add(name, t0);
    } else {
      auto r = f();
      add(name, t0);
      return r;
    }
  }
  void set(const std::string& name, double s) { stages_[name] = s; }
  const json& stages() const { return stages_; }

 private:
  void add(const std::string& name, Clock::time_point t0) {
    stages_[name] = std::chrono::duration<double>(Clock::now() - t0).count();
  }
  json stages_ = json::object();
};

std::string fnv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "unreadable";
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  std::ostringstream os;
  os << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string with_commas(std::uint64_t v) {
  std::string s = std::to_string(v);
  for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<std::size_t>(i), ",");
  return s;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Failure{kFailure, "cannot write " + p.string()};
  out << text;
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

void make_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Failure{kFailure, "cannot create output directory " + dir + ": " + ec.message()};
}

std::vector<double> parse_list(const std::string& s, const std::string& what) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Failure{kUsage, "bad value '" + item + "' in " + what};
    }
  }
  if (v.empty()) throw Failure{kUsage, what + " is empty"};
  return v;
}

// Options shared by train, score-features and sweep.
struct DataFlags {
  std::string taxonomy;
  std::string data;
  bool one_based = false;
  bool tfidf = false;
  bool l2 = false;
};

struct PipelineFlags {
  std::string fs_method = "gini";
  std::string fs_mode = "global";
  std::string fs_grid;
  std::string reg = "l1";
  std::string lambdas;
  bool no_lambda_tuning = false;
  double default_lambda = 1.0;
  std::size_t max_epochs = 500;
  double tolerance = 1e-6;
  double train_fraction = 0.9;
  std::string global_metric = "micro";
  std::string discretization = "auto";
  bool kw_smaller_better = false;
  bool flat = false;
};

void add_data_flags(CLI::App* sub, DataFlags& f, bool need_taxonomy = true) {
  if (need_taxonomy) sub->add_option("--taxonomy", f.taxonomy, "parent child edge list")->required();
  sub->add_option("--data", f.data, "sparse training file (libsvm-style, .gz accepted)")->required();
  sub->add_flag("--one-based", f.one_based, "feature ids in the file start at 1");
  sub->add_flag("--tfidf", f.tfidf, "tf-idf weight and L2-normalize inputs (df from this file)");
  sub->add_flag("--l2", f.l2, "L2-normalize inputs");
}

void add_scoring_flags(CLI::App* sub, PipelineFlags& f) {
  sub->add_option("--fs-method", f.fs_method, "gini|mrmr-d|mrmr-q|kw|none");
  sub->add_option("--discretization", f.discretization, "mRMR discretization: auto|presence|quartile");
  sub->add_flag("--kw-smaller-better", f.kw_smaller_better, "rank small Kruskal-Wallis H first");
}

void add_pipeline_flags(CLI::App* sub, PipelineFlags& f) {
  add_scoring_flags(sub, f);
  sub->add_option("--fs-mode", f.fs_mode, "global|adaptive");
  sub->add_option("--fs-grid", f.fs_grid, "comma-separated feature fractions");
  sub->add_option("--reg", f.reg, "l1|l2");
  sub->add_option("--lambda", f.lambdas, "comma-separated lambda grid");
  sub->add_flag("--no-lambda-tuning", f.no_lambda_tuning, "use --default-lambda everywhere");
  sub->add_option("--default-lambda", f.default_lambda, "lambda for fraction search and untuned nodes");
  sub->add_option("--max-epochs", f.max_epochs);
  sub->add_option("--tolerance", f.tolerance, "relative objective decrease for convergence");
  sub->add_option("--train-fraction", f.train_fraction, "train share of the tuning split");
  sub->add_option("--global-metric", f.global_metric, "micro|macro, used for Global FS tuning");
  sub->add_flag("--flat", f.flat, "train a single node over all leaves");
}

ScoringOptions scoring_options(const PipelineFlags& f) {
  ScoringOptions o;
  if (f.discretization == "auto") {
    o.discretization = Discretization::Auto;
  } else if (f.discretization == "presence") {
    o.discretization = Discretization::Presence;
  } else if (f.discretization == "quartile") {
    o.discretization = Discretization::Quartile;
  } else {
    throw Failure{kUsage, "unknown discretization '" + f.discretization + "'"};
  }
  o.kw_smaller_is_better = f.kw_smaller_better;
  return o;
}

std::optional<ScoreMethod> method_of(const std::string& name, bool allow_none) {
  if (allow_none && name == "none") return std::nullopt;
  const auto m = parse_score_method(name);
  if (!m) throw Failure{kUsage, "unknown --fs-method '" + name + "'"};
  return m;
}

PipelineConfig pipeline_config(const DataFlags& d, const PipelineFlags& f, std::uint64_t seed) {
  PipelineConfig c;
  c.method = method_of(f.fs_method, true);
  if (f.fs_mode != "global" && f.fs_mode != "adaptive") throw Failure{kUsage, "unknown --fs-mode '" + f.fs_mode + "'"};
  c.mode = f.fs_mode == "global" ? FsMode::Global : FsMode::Adaptive;
  if (!f.fs_grid.empty()) c.grid.fractions = parse_list(f.fs_grid, "--fs-grid");
  if (f.reg != "l1" && f.reg != "l2") throw Failure{kUsage, "unknown --reg '" + f.reg + "'"};
  c.training.regularizer = f.reg == "l1" ? Regularizer::L1 : Regularizer::L2;
  if (!f.lambdas.empty()) c.training.lambda_grid = parse_list(f.lambdas, "--lambda");
  c.training.default_lambda = f.default_lambda;
  c.training.max_epochs = f.max_epochs;
  c.training.tolerance = f.tolerance;
  c.tune_lambda = !f.no_lambda_tuning;
  c.split.train_fraction = f.train_fraction;
  if (f.global_metric != "micro" && f.global_metric != "macro") {
    throw Failure{kUsage, "unknown --global-metric '" + f.global_metric + "'"};
  }
  c.global_metric = f.global_metric == "micro" ? GlobalMetric::Micro : GlobalMetric::Macro;
  c.scoring = scoring_options(f);
  c.tfidf = d.tfidf;
  c.l2_normalize = d.l2;
  c.flat = f.flat;
  c.set_seed(seed);
  guarded(Stage::Usage, "configuration", [&] {
    c.training.validate();
    if (c.method) c.grid.validate();
    return 0;
  });
  if (!(c.split.train_fraction > 0.0 && c.split.train_fraction < 1.0)) {
    throw Failure{kUsage, "--train-fraction must lie in (0, 1)"};
  }
  return c;
}

Hierarchy read_taxonomy(const std::string& path) {
  return guarded(Stage::Taxonomy, path, [&] { return load_hierarchy(path); });
}

Dataset read_data(const std::string& path, bool one_based, std::size_t min_features = 0) {
  return guarded(Stage::Data, path, [&] {
    LoadOptions o;
    o.one_based = one_based;
    o.min_features = min_features;
    return load_sparse_file(path, o);
  });
}

void check_labels(const Hierarchy& h, const Dataset& d, const std::string& path) {
  guarded(Stage::Data, path, [&] { return resolve_labels(h, d.labels()); });
}

// Flags read from --config become ordinary arguments placed before the user's
// own, so anything given on the command line wins.
std::vector<std::string> expand_config(const std::vector<std::string>& args, CLI::App& app) {
  std::size_t sub_pos = 0;
  CLI::App* sub = nullptr;
  std::string config_path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (!sub) {
      for (auto* s : app.get_subcommands({})) {
        if (s->get_name() == args[i]) {
          sub = s;
          sub_pos = i;
        }
      }
    }
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  if (config_path.empty() || !sub) return args;

  std::ifstream in(config_path);
  if (!in) throw Failure{kData, "cannot read config file " + config_path};
  std::vector<std::string> injected;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r\"");
      const auto e = s.find_last_not_of(" \t\r\"");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Failure{kUsage, config_path + ":" + std::to_string(line_no) + ": expected key = value"};
    }
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    std::replace(key.begin(), key.end(), '_', '-');
    const auto* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config") {
      throw Failure{kUsage, config_path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'"};
    }
    if (opt->get_expected_min() == 0) {
      if (value == "true" || value == "1" || value == "yes") injected.push_back("--" + key);
    } else {
      injected.push_back("--" + key);
      injected.push_back(value);
    }
  }
  std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos + 1));
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos + 1), args.end());
  return out;
}

json effective_config(const CLI::App* sub) {
  json j = json::object();
  for (const auto* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      j[name] = opt->get_expected_min() == 0 ? json(true) : json(r.size() == 1 ? json(r[0]) : json(r));
    } else {
      const auto d = opt->get_default_str();
      j[name] = opt->get_expected_min() == 0 ? json(false) : json(d);
    }
  }
  return j;
}

struct Common {
  std::string out_dir;
  std::string config;
  std::uint64_t seed = 42;
  std::size_t threads = 0;
};

void add_common(CLI::App* sub, Common& c, bool needs_out = true) {
  auto* o = sub->add_option("--out", c.out_dir, "output directory");
  if (needs_out) o->required();
  sub->add_option("--config", c.config, "key = value defaults (flags take precedence)");
  sub->add_option("--seed", c.seed, "seed for splits and sampling");
  sub->add_option("--threads", c.threads, "worker threads (default: HFSEL_THREADS or all cores)");
}

class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& args, const CLI::App* sub, const Common& c)
      : command_(std::move(command)) {
    j_["tool"] = "hfsel";
    j_["version"] = kVersion;
    j_["command"] = command_;
    j_["command_line"] = args;
    j_["config_file"] = c.config.empty() ? json(nullptr) : json(c.config);
    j_["config"] = effective_config(sub);
    j_["seed"] = c.seed;
    j_["threads"] = thread_count();
    j_["inputs"] = json::object();
  }
  void input(const std::string& path) { j_["inputs"][path] = fnv_file(path); }
  json& extra() { return j_; }
  void write(const std::string& dir, const Timings& t, const std::vector<std::string>& outputs) {
    j_["stages"] = t.stages();
    j_["outputs"] = outputs;
    write_json(fs::path(dir) / "manifest.json", j_);
  }

 private:
  std::string command_;
  json j_;
};

// ---------------------------------------------------------------------------

int cmd_train(const std::vector<std::string>& args, const CLI::App* sub, const Common& c, const DataFlags& d,
              const PipelineFlags& f, bool json_model, std::ostream& out) {
  Timings t;
  const auto cfg = pipeline_config(d, f, c.seed);
  const Hierarchy h = t.time("load_taxonomy", [&] { return read_taxonomy(d.taxonomy); });
  const Dataset data = t.time("load_data", [&] { return read_data(d.data, d.one_based); });
  check_labels(h, data, d.data);

  const auto result = guarded(Stage::Train, "training", [&] { return run_pipeline(h, data, cfg); });
  t.set("preprocess", result.timings.preprocess);
  t.set("fs_scoring", result.timings.scoring);
  t.set("fs_selection", result.timings.selection);
  t.set("lambda_tuning", result.timings.lambda);
  t.set("final_training", result.timings.training);

  make_out_dir(c.out_dir);
  const fs::path dir(c.out_dir);
  std::vector<std::string> outputs{"model.bin", "selection.json", "manifest.json"};
  guarded(Stage::Output, "writing model", [&] {
    save_model((dir / "model.bin").string(), result.model);
    return 0;
  });
  if (json_model) {
    write_json(dir / "model.json", model_to_json(result.model));
    outputs.push_back("model.json");
  }
  write_json(dir / "selection.json", selection_manifest(result, cfg));

  Manifest m("train", args, sub, c);
  m.input(d.taxonomy);
  m.input(d.data);
  m.extra()["parameter_count"] = result.model.parameter_count();
  m.extra()["fallback_count"] = result.fallback_count;
  m.extra()["protocol"] = result.model.metadata;
  json node_seconds = json::object();
  for (const auto& [n, s] : result.model.manifest.node_seconds) {
    node_seconds[std::to_string(result.model.hierarchy.external_id(n))] = s;
  }
  m.extra()["node_training_seconds"] = node_seconds;
  m.write(c.out_dir, t, outputs);

  out << "seed: " << c.seed << "\n";
  out << "parameters: " << with_commas(result.model.parameter_count()) << " ("
      << human_size(result.model.parameter_count() * 4ull) << ")\n";
  if (result.global) out << "global fraction: " << result.global->fraction << "\n";
  if (cfg.method && cfg.mode == FsMode::Adaptive) out << "adaptive fallbacks: " << result.fallback_count << "\n";
  out << "model: " << (dir / "model.bin").string() << "\n";
  return kOk;
}

int cmd_predict(const std::vector<std::string>& args, const CLI::App* sub, const Common& c,
                const std::string& model_path, const std::string& data_path, bool one_based, bool trace,
                std::ostream& out) {
  Timings t;
  const TrainedModel model = t.time("load_model", [&] {
    return guarded(Stage::Model, model_path, [&] { return load_model(model_path); });
  });
  const Dataset raw = t.time("load_data", [&] { return read_data(data_path, one_based); });
  const Dataset x = guarded(Stage::Data, data_path, [&] { return prepare_inputs(model, raw); });
  const auto bp = guarded(Stage::Model, "prediction", [&] { return predict_batch(model, x, trace); });
  t.set("predict", bp.seconds);

  const auto& h = model.hierarchy;
  std::ostringstream tsv;
  tsv << "instance\tpredicted\tlabel\n";
  for (std::size_t i = 0; i < raw.num_instances(); ++i) {
    tsv << raw.instance_id(i) << '\t' << h.external_id(bp.leaves[i]) << '\t' << raw.label(i) << '\n';
  }
  make_out_dir(c.out_dir);
  const fs::path dir(c.out_dir);
  std::vector<std::string> outputs{"predictions.tsv", "manifest.json"};
  write_text(dir / "predictions.tsv", tsv.str());
  if (trace) {
    std::ostringstream jl;
    for (const auto& tr : bp.traces) {
      json j;
      j["instance"] = tr.instance;
      j["leaf"] = h.external_id(tr.leaf);
      auto path = json::array();
      for (const auto& step : tr.path) {
        json children = json::array();
        for (NodeIndex ch : h.children(step.node)) children.push_back(h.external_id(ch));
        path.push_back({{"node", h.external_id(step.node)},
                        {"chosen", h.external_id(step.chosen)},
                        {"children", children},
                        {"scores", step.scores}});
      }
      j["path"] = std::move(path);
      jl << j.dump() << '\n';
    }
    write_text(dir / "traces.jsonl", jl.str());
    outputs.push_back("traces.jsonl");
  }
  Manifest m("predict", args, sub, c);
  m.input(model_path);
  m.input(data_path);
  m.extra()["instances"] = raw.num_instances();
  m.extra()["mean_seconds_per_instance"] = bp.mean_seconds;
  m.extra()["dropped_features"] = bp.counters.dropped_features;
  m.write(c.out_dir, t, outputs);
  out << "predicted " << raw.num_instances() << " instances in " << bp.seconds << " s\n";
  return kOk;
}

std::map<std::uint64_t, NodeId> read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Failure{kData, "cannot open predictions " + path};
  std::map<std::uint64_t, NodeId> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.rfind("instance", 0) == 0) continue;
    std::istringstream ls(line);
    std::uint64_t inst = 0;
    NodeId pred = 0;
    if (!(ls >> inst >> pred)) throw Failure{kData, path + ":" + std::to_string(line_no) + ": malformed prediction"};
    out[inst] = pred;
  }
  return out;
}

std::vector<NodeIndex> align_predictions(const Hierarchy& h, const Dataset& truth,
                                         const std::map<std::uint64_t, NodeId>& preds, const std::string& path) {
  std::vector<NodeIndex> out(truth.num_instances());
  for (std::size_t i = 0; i < truth.num_instances(); ++i) {
    const auto it = preds.find(truth.instance_id(i));
    if (it == preds.end()) {
      throw Failure{kData, path + ": no prediction for instance " + std::to_string(truth.instance_id(i))};
    }
    const auto idx = h.index_of(it->second);
    if (!idx || !h.is_leaf(*idx)) {
      throw Failure{kData, path + ": predicted label " + std::to_string(it->second) + " is not a leaf"};
    }
    out[i] = *idx;
  }
  return out;
}

json metrics_json(const Hierarchy& h, const std::vector<NodeIndex>& truth, const std::vector<NodeIndex>& pred) {
  const auto stats = ConfusionStats::build(h, truth, pred);
  const auto micro = micro_f1(stats);
  json j;
  j["instances"] = truth.size();
  j["micro_f1"] = micro.value;
  j["micro_f1_undefined"] = micro.undefined;
  j["macro_f1"] = macro_f1(stats);
  json per_class = json::object();
  const auto f1 = per_class_f1(stats);
  for (std::size_t k = 0; k < stats.leaves.size(); ++k) per_class[std::to_string(h.external_id(stats.leaves[k]))] = f1[k];
  j["per_class_f1"] = per_class;
  const auto lv = levelwise_errors(h, truth, pred);
  j["per_level_error"] = {{"cumulative", lv.cumulative}, {"conditional", lv.conditional}, {"instances", lv.instances}};
  return j;
}

json test_json(const TestResult& r) {
  return {{"p_value", r.p_value},
          {"pairs", r.pairs},
          {"statistic", r.statistic},
          {"exact", r.exact},
          {"degenerate", r.degenerate},
          {"significant_0.05", r.p_value < 0.05},
          {"significant_0.1", r.p_value < 0.1}};
}

int cmd_evaluate(const std::vector<std::string>& args, const CLI::App* sub, const Common& c,
                 const std::string& taxonomy, const std::string& truth_path, bool one_based,
                 const std::string& pred_path, const std::string& compare_path, std::ostream& out) {
  Timings t;
  const Hierarchy h = read_taxonomy(taxonomy);
  const Dataset truth_data = read_data(truth_path, one_based);
  const auto truth = guarded(Stage::Data, truth_path, [&] { return resolve_labels(h, truth_data.labels()); });
  const auto pred = align_predictions(h, truth_data, read_predictions(pred_path), pred_path);
  json report = metrics_json(h, truth, pred);
  if (!compare_path.empty()) {
    const auto other = align_predictions(h, truth_data, read_predictions(compare_path), compare_path);
    std::vector<std::uint8_t> a_ok(truth.size()), b_ok(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
      a_ok[i] = pred[i] == truth[i];
      b_ok[i] = other[i] == truth[i];
    }
    const auto fa = per_class_f1(ConfusionStats::build(h, truth, pred));
    const auto fb = per_class_f1(ConfusionStats::build(h, truth, other));
    json cmp;
    cmp["baseline"] = metrics_json(h, truth, other);
    cmp["sign_test"] = test_json(sign_test(a_ok, b_ok));
    cmp["wilcoxon"] = test_json(wilcoxon_signed_rank(fa, fb));
    report["comparison"] = cmp;
  }
  make_out_dir(c.out_dir);
  write_json(fs::path(c.out_dir) / "evaluation.json", report);
  Manifest m("evaluate", args, sub, c);
  m.input(taxonomy);
  m.input(truth_path);
  m.input(pred_path);
  if (!compare_path.empty()) m.input(compare_path);
  m.write(c.out_dir, t, {"evaluation.json", "manifest.json"});
  out << std::setprecision(6) << "micro_f1: " << report["micro_f1"].get<double>()
      << "\nmacro_f1: " << report["macro_f1"].get<double>() << "\n";
  if (report.contains("comparison")) {
    out << "sign test p: " << report["comparison"]["sign_test"]["p_value"].get<double>()
        << "\nwilcoxon p: " << report["comparison"]["wilcoxon"]["p_value"].get<double>() << "\n";
  }
  return kOk;
}

int cmd_score(const std::vector<std::string>& args, const CLI::App* sub, const Common& c, const DataFlags& d,
              const PipelineFlags& f, std::ostream& out) {
  Timings t;
  const auto method = method_of(f.fs_method, false);
  const auto opts = scoring_options(f);
  const Hierarchy h = read_taxonomy(d.taxonomy);
  Dataset data = read_data(d.data, d.one_based);
  check_labels(h, data, d.data);
  if (d.tfidf) {
    data = tfidf_transform(data);
  } else if (d.l2) {
    data = l2_normalize(data);
  }
  const auto views = build_node_views(h, data.labels());
  const auto& internal = h.internal_nodes();
  std::vector<std::optional<FeatureScoreTable>> tables(internal.size());
  t.time("fs_scoring", [&] {
    parallel_for(internal.size(), [&](std::size_t i) {
      try {
        tables[i] = score_node(views[internal[i]], data, h, *method, opts);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::SingleChildNode && e.code() != ErrorCode::NoInstances) throw;
      }
    });
  });
  make_out_dir(c.out_dir);
  const fs::path dir = fs::path(c.out_dir) / "scores";
  make_out_dir(dir.string());
  std::vector<std::string> outputs{"manifest.json"};
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < internal.size(); ++i) {
    if (!tables[i]) {
      ++skipped;
      continue;
    }
    std::ostringstream os;
    os << std::setprecision(17) << "feature\tscore\trank\n";
    for (std::size_t r = 0; r < tables[i]->rank_order.size(); ++r) {
      const FeatureId fid = tables[i]->rank_order[r];
      os << fid << '\t' << tables[i]->score[fid] << '\t' << r + 1 << '\n';
    }
    const std::string name = "node_" + std::to_string(h.external_id(internal[i])) + ".tsv";
    write_text(dir / name, os.str());
    outputs.push_back("scores/" + name);
  }
  Manifest m("score-features", args, sub, c);
  m.input(d.taxonomy);
  m.input(d.data);
  m.extra()["unscored_nodes"] = skipped;
  m.write(c.out_dir, t, outputs);
  out << "scored " << internal.size() - skipped << " nodes with " << to_string(*method) << "\n";
  return kOk;
}

int cmd_report(const std::vector<std::string>& args, const CLI::App* sub, const Common& c,
               const std::string& model_path, const std::string& manifest_path,
               const std::vector<std::string>& evaluations, std::ostream& out) {
  Timings t;
  const TrainedModel model = guarded(Stage::Model, model_path, [&] { return load_model(model_path); });
  const auto r = model_report(model);
  json j;
  j["parameter_count"] = r.parameter_count;
  j["parameter_count_text"] = with_commas(r.parameter_count);
  j["size_bytes"] = r.size_bytes;
  j["size"] = r.size_human;
  j["internal_nodes"] = r.internal_nodes;
  j["child_edges"] = r.child_edges;
  j["num_features"] = model.num_features;
  j["metadata"] = model.metadata;
  auto subsets = json::array();
  std::ostringstream subsets_csv;
  subsets_csv << "node,subset_size\n";
  for (const auto& [id, k] : r.subset_sizes) {
    subsets.push_back({{"node", id}, {"subset_size", k}});
    subsets_csv << id << ',' << k << '\n';
  }
  j["subset_sizes"] = subsets;
  if (!manifest_path.empty()) {
    std::ifstream in(manifest_path);
    if (!in) throw Failure{kData, "cannot open manifest " + manifest_path};
    try {
      const json mf = json::parse(in);
      j["stages"] = mf.at("stages");
      if (mf.contains("node_training_seconds")) j["node_training_seconds"] = mf["node_training_seconds"];
    } catch (const json::exception& e) {
      throw Failure{kData, manifest_path + ": " + e.what()};
    }
  }

  std::ostringstream metrics_csv, levels_csv;
  metrics_csv << "system,micro_f1,macro_f1\n";
  levels_csv << "system,level,cumulative_error,conditional_error\n";
  auto systems = json::array();
  for (const auto& spec : evaluations) {
    const auto eq = spec.find('=');
    const std::string name = eq == std::string::npos ? fs::path(spec).parent_path().filename().string() : spec.substr(0, eq);
    const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
    std::ifstream in(path);
    if (!in) throw Failure{kData, "cannot open evaluation " + path};
    try {
      const json e = json::parse(in);
      metrics_csv << name << ',' << e.at("micro_f1").get<double>() << ',' << e.at("macro_f1").get<double>() << '\n';
      const auto& cum = e.at("per_level_error").at("cumulative");
      const auto& cond = e.at("per_level_error").at("conditional");
      for (std::size_t d = 0; d < cum.size(); ++d) {
        levels_csv << name << ',' << d + 1 << ',' << cum[d].get<double>() << ',' << cond[d].get<double>() << '\n';
      }
      systems.push_back({{"name", name}, {"micro_f1", e["micro_f1"]}, {"macro_f1", e["macro_f1"]}});
    } catch (const json::exception& e) {
      throw Failure{kData, path + ": " + e.what()};
    }
  }
  if (!systems.empty()) j["systems"] = systems;

  const std::string gp =
      "# gnuplot -e \"dir='.'\" plots.gp\n"
      "if (!exists(\"dir\")) dir = '.'\n"
      "set datafile separator ','\n"
      "set terminal pngcairo size 900,500\n"
      "set style data histograms\n"
      "set style histogram clustered gap 1\n"
      "set style fill solid 0.8 border -1\n"
      "set key outside\n"
      "set output dir.'/f1.png'\n"
      "set ylabel 'F1'\n"
      "plot dir.'/metrics.csv' using 2:xtic(1) title 'micro F1' skip 1, '' using 3 title 'macro F1' skip 1\n"
      "set output dir.'/levels.png'\n"
      "set ylabel 'error rate'\n"
      "set xlabel 'level'\n"
      "plot dir.'/levels.csv' using 3:xtic(stringcolumn(1).'/'.stringcolumn(2)) title 'cumulative' skip 1\n";

  make_out_dir(c.out_dir);
  const fs::path dir(c.out_dir);
  write_json(dir / "report.json", j);
  write_text(dir / "subsets.csv", subsets_csv.str());
  write_text(dir / "metrics.csv", metrics_csv.str());
  write_text(dir / "levels.csv", levels_csv.str());
  write_text(dir / "plots.gp", gp);
  Manifest m("report", args, sub, c);
  m.input(model_path);
  if (!manifest_path.empty()) m.input(manifest_path);
  m.write(c.out_dir, t, {"report.json", "subsets.csv", "metrics.csv", "levels.csv", "plots.gp", "manifest.json"});
  out << "parameters: " << with_commas(r.parameter_count) << "\nsize: " << r.size_human << "\n";
  return kOk;
}

int cmd_sweep(const std::vector<std::string>& args, const CLI::App* sub, const Common& c, const DataFlags& d,
              const PipelineFlags& f, const std::string& test_path, const std::string& sizes,
              std::size_t reps, std::ostream& out) {
  Timings t;
  const auto fs_cfg = pipeline_config(d, f, c.seed);
  PipelineFlags base_flags = f;
  base_flags.fs_method = "none";
  const auto base_cfg = pipeline_config(d, base_flags, c.seed);
  std::vector<std::size_t> per_class;
  for (double v : parse_list(sizes, "--sizes")) {
    if (v < 1 || v != std::floor(v)) throw Failure{kUsage, "--sizes entries must be positive integers"};
    per_class.push_back(static_cast<std::size_t>(v));
  }
  if (reps == 0) throw Failure{kUsage, "--reps must be positive"};

  const Hierarchy h = read_taxonomy(d.taxonomy);
  const Dataset train = read_data(d.data, d.one_based);
  const Dataset test = read_data(test_path, d.one_based);
  check_labels(h, train, d.data);
  check_labels(h, test, test_path);

  std::vector<std::pair<std::string, PipelineConfig>> configs{{"all-features", base_cfg}};
  if (fs_cfg.method) configs.emplace_back(f.fs_method + "-" + f.fs_mode, fs_cfg);
  const auto cells = t.time("sweep", [&] {
    return guarded(Stage::Train, "sweep", [&] { return run_sweep(h, train, test, per_class, reps, configs); });
  });

  std::ostringstream csv;
  csv << "per_class,config,micro_mean,micro_std,macro_mean,macro_std\n";
  auto arr = json::array();
  for (const auto& cell : cells) {
    csv << cell.per_class << ',' << cell.config << ',' << cell.micro_mean << ',' << cell.micro_std << ','
        << cell.macro_mean << ',' << cell.macro_std << '\n';
    arr.push_back({{"per_class", cell.per_class},
                   {"config", cell.config},
                   {"micro_f1", cell.micro_f1},
                   {"macro_f1", cell.macro_f1},
                   {"micro_mean", cell.micro_mean},
                   {"micro_std", cell.micro_std},
                   {"macro_mean", cell.macro_mean},
                   {"macro_std", cell.macro_std}});
  }
  make_out_dir(c.out_dir);
  write_text(fs::path(c.out_dir) / "sweep.csv", csv.str());
  write_json(fs::path(c.out_dir) / "sweep.json", arr);
  Manifest m("sweep", args, sub, c);
  m.input(d.taxonomy);
  m.input(d.data);
  m.input(test_path);
  m.write(c.out_dir, t, {"sweep.csv", "sweep.json", "manifest.json"});
  out << csv.str();
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical classification with per-node feature selection", "hfsel"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  Common common;
  DataFlags data_flags;
  PipelineFlags pipe;
  bool json_model = false;
  std::string model_path, data_path, truth_path, pred_path, compare_path, taxonomy, manifest_path, test_path;
  std::string sizes = "5,10,25,50,100,250";
  std::size_t reps = 5;
  bool one_based = false, trace = false;
  std::vector<std::string> evaluations;

  auto* train = app.add_subcommand("train", "score, select and train a top-down model");
  add_common(train, common);
  add_data_flags(train, data_flags);
  add_pipeline_flags(train, pipe);
  train->add_flag("--json-model", json_model, "also write a JSON mirror of the model");

  auto* predict = app.add_subcommand("predict", "predict leaf labels");
  add_common(predict, common);
  predict->add_option("--model", model_path)->required();
  predict->add_option("--data", data_path)->required();
  predict->add_flag("--one-based", one_based);
  predict->add_flag("--trace", trace, "write per-instance root-to-leaf paths with child scores");

  auto* evaluate = app.add_subcommand("evaluate", "score predictions against true labels");
  add_common(evaluate, common);
  evaluate->add_option("--taxonomy", taxonomy)->required();
  evaluate->add_option("--truth", truth_path, "labelled data file")->required();
  evaluate->add_flag("--one-based", one_based);
  evaluate->add_option("--predictions", pred_path)->required();
  evaluate->add_option("--compare", compare_path, "second predictions file for significance tests");

  auto* score = app.add_subcommand("score-features", "write per-node feature rankings");
  add_common(score, common);
  add_data_flags(score, data_flags);
  add_scoring_flags(score, pipe);

  auto* report = app.add_subcommand("report", "model size and plotting bundle");
  add_common(report, common);
  report->add_option("--model", model_path)->required();
  report->add_option("--manifest", manifest_path, "training manifest with stage timings");
  report->add_option("--evaluation", evaluations, "name=evaluation.json (repeatable)")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);

  auto* sweep = app.add_subcommand("sweep", "training-size experiment");
  add_common(sweep, common);
  add_data_flags(sweep, data_flags);
  add_pipeline_flags(sweep, pipe);
  sweep->add_option("--test", test_path)->required();
  sweep->add_option("--sizes", sizes, "instances per class");
  sweep->add_option("--reps", reps, "repetitions per size");

  try {
    auto args = expand_config(raw_args, app);
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
      const int rc = app.exit(e, out, err);
      return rc == 0 ? kOk : kUsage;
    }
    if (common.threads > 0) set_thread_count(common.threads);

    if (*train) return cmd_train(args, train, common, data_flags, pipe, json_model, out);
    if (*predict) return cmd_predict(args, predict, common, model_path, data_path, one_based, trace, out);
    if (*evaluate) {
      return cmd_evaluate(args, evaluate, common, taxonomy, truth_path, one_based, pred_path, compare_path, out);
    }
    if (*score) return cmd_score(args, score, common, data_flags, pipe, out);
    if (*report) return cmd_report(args, report, common, model_path, manifest_path, evaluations, out);
    if (*sweep) return cmd_sweep(args, sweep, common, data_flags, pipe, test_path, sizes, reps, out);
    return kUsage;
  } catch (const Failure& f) {
    err << "error: " << f.message << "\n";
    return f.code;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace hfsel::cli
