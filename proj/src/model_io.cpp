#include "hfsel/model_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "hfsel/error.hpp"

namespace hfsel {

namespace {

constexpr char kMagic[8] = {'H', 'F', 'S', 'E', 'L', 'M', 'D', 'L'};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void i64(std::int64_t v) { le(static_cast<std::uint64_t>(v), 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v), 4); }
  void varint(std::uint64_t v) {
    while (v >= 0x80) {
      u8(static_cast<std::uint8_t>(v | 0x80));
      v >>= 7;
    }
    u8(static_cast<std::uint8_t>(v));
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

 private:
  void le(std::uint64_t v, int n) {
    unsigned char b[8];
    for (int i = 0; i < n; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, static_cast<std::size_t>(n));
  }
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw Error(ErrorCode::Format, "truncated model file");
  }
  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  std::int64_t i64() { return static_cast<std::int64_t>(le(8)); }
  double f64() { return std::bit_cast<double>(le(8)); }
  float f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(le(4))); }
  std::uint64_t varint() {
    std::uint64_t v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      const std::uint8_t b = u8();
      v |= static_cast<std::uint64_t>(b & 0x7f) << shift;
      if ((b & 0x80) == 0) return v;
    }
    throw Error(ErrorCode::Format, "varint overflow");
  }
  std::string str() {
    std::string s(u32(), '\0');
    bytes(s.data(), s.size());
    return s;
  }

 private:
  std::uint64_t le(int n) {
    unsigned char b[8];
    bytes(b, static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  std::istream& in_;
};

nlohmann::json header_json(const TrainedModel& m) {
  nlohmann::json j;
  j["training"] = config_to_json(m.config);
  j["num_features"] = m.num_features;
  j["l2_normalize_inputs"] = m.l2_normalize_inputs;
  j["metadata"] = m.metadata;
  return j;
}

void apply_header(TrainedModel& m, const nlohmann::json& j) {
  m.config = config_from_json(j.at("training"));
  m.num_features = j.at("num_features").get<std::size_t>();
  m.l2_normalize_inputs = j.at("l2_normalize_inputs").get<bool>();
  m.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
}

void finish(TrainedModel& m) {
  m.manifest.config = m.config;
  m.manifest.parameter_count = m.parameter_count();
  m.check_complete();
}

NodeModel& slot_for(TrainedModel& m, NodeId id) {
  const auto idx = m.hierarchy.index_of(id);
  if (!idx || m.hierarchy.is_leaf(*idx)) throw Error(ErrorCode::Format, "model block for unknown internal node", id);
  if (m.nodes[*idx]) throw Error(ErrorCode::Format, "duplicate model block", id);
  m.nodes[*idx].emplace();
  m.nodes[*idx]->node = *idx;
  return *m.nodes[*idx];
}

void check_node(const TrainedModel& m, const NodeModel& nm, NodeId id) {
  if (nm.num_children != m.hierarchy.children(nm.node).size()) {
    throw Error(ErrorCode::Format, "child count does not match taxonomy", id);
  }
  for (std::size_t k = 0; k < nm.subset.size(); ++k) {
    if (nm.subset[k] >= m.num_features || (k > 0 && nm.subset[k] <= nm.subset[k - 1])) {
      throw Error(ErrorCode::Format, "invalid feature subset", id);
    }
  }
}

}  // namespace

nlohmann::json config_to_json(const TrainingConfig& cfg) {
  nlohmann::json j;
  j["lambda_grid"] = cfg.lambda_grid;
  j["default_lambda"] = cfg.default_lambda;
  j["regularizer"] = std::string(to_string(cfg.regularizer));
  j["max_epochs"] = cfg.max_epochs;
  j["tolerance"] = cfg.tolerance;
  j["seed"] = cfg.seed;
  return j;
}

TrainingConfig config_from_json(const nlohmann::json& j) {
  TrainingConfig cfg;
  cfg.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
  cfg.default_lambda = j.at("default_lambda").get<double>();
  const auto reg = j.at("regularizer").get<std::string>();
  if (reg != "l1" && reg != "l2") throw Error(ErrorCode::Format, "unknown regularizer '" + reg + "'");
  cfg.regularizer = reg == "l1" ? Regularizer::L1 : Regularizer::L2;
  cfg.max_epochs = j.at("max_epochs").get<std::size_t>();
  cfg.tolerance = j.at("tolerance").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

void write_model(std::ostream& out, const TrainedModel& m) {
  m.check_complete();
  const auto& h = m.hierarchy;
  Writer w(out);
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kModelFormatVersion);
  w.u64(h.fingerprint());
  w.str(header_json(m).dump());

  const auto edges = h.edges();
  w.u32(static_cast<std::uint32_t>(edges.size()));
  for (const auto& [p, c] : edges) {
    w.i64(p);
    w.i64(c);
  }
  w.u64(m.idf.size());
  for (double v : m.idf) w.f64(v);

  std::vector<NodeIndex> internal = h.internal_nodes();
  std::sort(internal.begin(), internal.end());
  w.u32(static_cast<std::uint32_t>(internal.size()));
  for (NodeIndex n : internal) {
    const NodeModel& nm = *m.nodes[n];
    w.i64(h.external_id(n));
    w.u8(nm.trivial ? 1 : 0);
    w.f64(nm.lambda);
    w.u32(static_cast<std::uint32_t>(nm.num_children));
    w.varint(nm.subset.size());
    FeatureId prev = 0;
    for (std::size_t k = 0; k < nm.subset.size(); ++k) {
      w.varint(k == 0 ? nm.subset[0] : nm.subset[k] - prev);
      prev = nm.subset[k];
    }
    for (float v : nm.weights) w.f32(v);
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing model");
}

TrainedModel read_model(std::istream& in) {
  Reader r(in);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw Error(ErrorCode::Format, "not a model file");
  const auto version = r.u32();
  if (version != kModelFormatVersion) {
    throw Error(ErrorCode::Format, "unsupported model format version " + std::to_string(version));
  }
  const auto fingerprint = r.u64();
  TrainedModel m;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.str());
    apply_header(m, header);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, std::string("bad model header: ") + e.what());
  }

  std::vector<Edge> edges(r.u32());
  for (auto& e : edges) {
    e.first = r.i64();
    e.second = r.i64();
  }
  m.hierarchy = Hierarchy::from_edges(edges);
  if (m.hierarchy.fingerprint() != fingerprint) throw Error(ErrorCode::Format, "hierarchy fingerprint mismatch");
  const auto idf_count = r.u64();
  if (idf_count > (std::uint64_t{1} << 32)) throw Error(ErrorCode::Format, "implausible idf length");
  m.idf.resize(idf_count);
  for (auto& v : m.idf) v = r.f64();

  m.nodes.assign(m.hierarchy.size(), std::nullopt);
  const auto blocks = r.u32();
  for (std::uint32_t b = 0; b < blocks; ++b) {
    const NodeId id = r.i64();
    NodeModel& nm = slot_for(m, id);
    nm.trivial = r.u8() != 0;
    nm.lambda = r.f64();
    nm.num_children = r.u32();
    const auto k = r.varint();
    if (k > m.num_features) throw Error(ErrorCode::Format, "subset larger than feature space", id);
    nm.subset.resize(k);
    std::uint64_t acc = 0;
    for (std::size_t i = 0; i < k; ++i) {
      acc = i == 0 ? r.varint() : acc + r.varint();
      if (acc > std::numeric_limits<FeatureId>::max()) throw Error(ErrorCode::Format, "feature id overflow", id);
      nm.subset[i] = static_cast<FeatureId>(acc);
    }
    check_node(m, nm, id);
    nm.weights.resize(nm.num_children * k);
    for (auto& v : nm.weights) v = r.f32();
  }
  finish(m);
  return m;
}

void save_model(const std::string& path, const TrainedModel& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
  write_model(out, m);
}

TrainedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open model '" + path + "'");
  return read_model(in);
}

nlohmann::json model_to_json(const TrainedModel& m) {
  m.check_complete();
  const auto& h = m.hierarchy;
  nlohmann::json j;
  j["format_version"] = kModelFormatVersion;
  j["hierarchy_fingerprint"] = h.fingerprint();
  j["header"] = header_json(m);
  auto edges = nlohmann::json::array();
  for (const auto& [p, c] : h.edges()) edges.push_back({p, c});
  j["edges"] = std::move(edges);
  j["idf"] = m.idf;
  j["parameter_count"] = m.parameter_count();
  std::vector<NodeIndex> internal = h.internal_nodes();
  std::sort(internal.begin(), internal.end());
  auto nodes = nlohmann::json::array();
  for (NodeIndex n : internal) {
    const NodeModel& nm = *m.nodes[n];
    nlohmann::json jn;
    jn["node"] = h.external_id(n);
    jn["trivial"] = nm.trivial;
    jn["lambda"] = nm.lambda;
    jn["num_children"] = nm.num_children;
    jn["subset"] = nm.subset;
    auto children = nlohmann::json::array();
    for (std::size_t c = 0; c < nm.num_children; ++c) {
      const auto w = nm.child_weights(c);
      children.push_back({{"child", h.external_id(h.children(n)[c])},
                          {"weights", std::vector<float>(w.begin(), w.end())}});
    }
    jn["children"] = std::move(children);
    nodes.push_back(std::move(jn));
  }
  j["nodes"] = std::move(nodes);
  return j;
}

TrainedModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<std::uint32_t>() != kModelFormatVersion) {
      throw Error(ErrorCode::Format, "unsupported model format version");
    }
    TrainedModel m;
    apply_header(m, j.at("header"));
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) edges.emplace_back(e.at(0).get<NodeId>(), e.at(1).get<NodeId>());
    m.hierarchy = Hierarchy::from_edges(edges);
    if (m.hierarchy.fingerprint() != j.at("hierarchy_fingerprint").get<std::uint64_t>()) {
      throw Error(ErrorCode::Format, "hierarchy fingerprint mismatch");
    }
    m.idf = j.at("idf").get<std::vector<double>>();
    m.nodes.assign(m.hierarchy.size(), std::nullopt);
    for (const auto& jn : j.at("nodes")) {
      const NodeId id = jn.at("node").get<NodeId>();
      NodeModel& nm = slot_for(m, id);
      nm.trivial = jn.at("trivial").get<bool>();
      nm.lambda = jn.at("lambda").get<double>();
      nm.num_children = jn.at("num_children").get<std::size_t>();
      nm.subset = jn.at("subset").get<std::vector<FeatureId>>();
      check_node(m, nm, id);
      const auto& children = jn.at("children");
      if (children.size() != nm.num_children) throw Error(ErrorCode::Format, "child block count mismatch", id);
      for (const auto& jc : children) {
        const auto w = jc.at("weights").get<std::vector<float>>();
        if (w.size() != nm.subset.size()) throw Error(ErrorCode::Format, "weight vector length mismatch", id);
        nm.weights.insert(nm.weights.end(), w.begin(), w.end());
      }
    }
    finish(m);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, std::string("bad JSON model: ") + e.what());
  }
}

}  // namespace hfsel
