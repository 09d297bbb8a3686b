#include "hfsel/corpus.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "hfsel/error.hpp"

namespace hfsel {

void Dataset::add_row(std::span<const FeatureId> indices, std::span<const double> values,
                      NodeId label) {
  add_row(indices, values, label, labels_.size());
}

void Dataset::add_row(std::span<const FeatureId> indices, std::span<const double> values,
                      NodeId label, std::uint64_t instance_id) {
  if (indices.size() != values.size()) {
    throw Error(ErrorCode::LengthMismatch, "indices and values differ in length");
  }
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (k > 0 && indices[k] <= indices[k - 1]) {
      throw Error(ErrorCode::InvalidArgument, "row indices must be strictly increasing");
    }
    if (!std::isfinite(values[k])) throw Error(ErrorCode::NonFiniteValue, "non-finite value");
  }
  indices_.insert(indices_.end(), indices.begin(), indices.end());
  values_.insert(values_.end(), values.begin(), values.end());
  row_ptr_.push_back(indices_.size());
  labels_.push_back(label);
  ids_.push_back(instance_id);
  if (!indices.empty()) {
    num_features_ = std::max<std::size_t>(num_features_, std::size_t{indices.back()} + 1);
  }
}

void Dataset::set_num_features(std::size_t n) { num_features_ = std::max(num_features_, n); }

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  for (std::size_t r : rows) {
    const auto v = row(r);
    out.add_row(v.indices, v.values, labels_[r], ids_[r]);
  }
  out.num_features_ = num_features_;
  return out;
}

namespace {

class LineSource {
 public:
  virtual ~LineSource() = default;
  virtual bool next(std::string& line) = 0;
};

class StreamSource : public LineSource {
 public:
  explicit StreamSource(std::istream& in) : in_(in) {}
  bool next(std::string& line) override { return static_cast<bool>(std::getline(in_, line)); }

 private:
  std::istream& in_;
};

class GzipSource : public LineSource {
 public:
  explicit GzipSource(const std::string& path) : file_(gzopen(path.c_str(), "rb")) {
    if (file_ == nullptr) throw Error(ErrorCode::Io, "cannot open " + path);
  }
  ~GzipSource() override { gzclose(file_); }
  GzipSource(const GzipSource&) = delete;
  GzipSource& operator=(const GzipSource&) = delete;

  bool next(std::string& line) override {
    line.clear();
    char buf[8192];
    while (gzgets(file_, buf, sizeof(buf)) != nullptr) {
      line += buf;
      if (!line.empty() && line.back() == '\n') {
        line.pop_back();
        return true;
      }
    }
    return !line.empty();
  }

 private:
  gzFile file_;
};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

Dataset parse_lines(LineSource& src, const LoadOptions& opts) {
  Dataset d;
  bool one_based = opts.one_based;
  std::string line;
  std::int64_t line_no = 0;
  std::vector<std::pair<FeatureId, double>> entries;
  std::vector<FeatureId> idx;
  std::vector<double> val;

  while (src.next(line)) {
    ++line_no;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p < end && is_space(*p)) ++p;
    if (p == end) continue;
    if (*p == '#') {
      const auto pos = line.find("index-base:");
      if (pos != std::string::npos) {
        const auto digit = line.find_first_of("01", pos);
        if (digit != std::string::npos) one_based = line[digit] == '1';
      }
      continue;
    }

    NodeId label = 0;
    auto [lp, lec] = std::from_chars(p, end, label);
    if (lec != std::errc() || (lp < end && !is_space(*lp))) {
      throw Error(ErrorCode::MalformedLine, "bad label", line_no);
    }
    p = lp;

    entries.clear();
    while (true) {
      while (p < end && is_space(*p)) ++p;
      if (p == end) break;
      std::uint64_t raw = 0;
      auto [ip, iec] = std::from_chars(p, end, raw);
      if (iec != std::errc() || ip == end || *ip != ':') {
        throw Error(ErrorCode::MalformedLine, "expected idx:val", line_no);
      }
      if (one_based && raw == 0) throw Error(ErrorCode::MalformedLine, "index 0 in one-based file", line_no);
      const std::uint64_t fid = one_based ? raw - 1 : raw;
      if (fid > 0x7fffffffu) throw Error(ErrorCode::MalformedLine, "feature index too large", line_no);
      p = ip + 1;
      double value = 0.0;
      auto [vp, vec] = std::from_chars(p, end, value);
      if (vec != std::errc() || (vp < end && !is_space(*vp))) {
        throw Error(ErrorCode::MalformedLine, "bad value", line_no);
      }
      if (!std::isfinite(value)) throw Error(ErrorCode::NonFiniteValue, "non-finite value", line_no);
      p = vp;
      entries.emplace_back(static_cast<FeatureId>(fid), value);
    }
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    idx.clear();
    val.clear();
    for (std::size_t k = 0; k < entries.size(); ++k) {
      if (k > 0 && entries[k].first == entries[k - 1].first) {
        throw Error(ErrorCode::DuplicateFeatureInRow, "feature repeated", line_no);
      }
      idx.push_back(entries[k].first);
      val.push_back(entries[k].second);
    }
    d.add_row(idx, val, label);
  }
  d.set_num_features(opts.min_features);
  return d;
}

}  // namespace

Dataset load_sparse(std::istream& in, const LoadOptions& opts) {
  StreamSource src(in);
  return parse_lines(src, opts);
}

Dataset load_sparse_file(const std::string& path, const LoadOptions& opts) {
  if (path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0) {
    GzipSource src(path);
    return parse_lines(src, opts);
  }
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open data file " + path);
  return load_sparse(in, opts);
}

void write_sparse(std::ostream& out, const Dataset& d) {
  char buf[64];
  for (std::size_t i = 0; i < d.num_instances(); ++i) {
    out << d.label(i);
    const auto r = d.row(i);
    for (std::size_t k = 0; k < r.size(); ++k) {
      auto res = std::to_chars(buf, buf + sizeof(buf), r.values[k]);
      out << ' ' << r.indices[k] << ':' << std::string_view(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

std::vector<double> fit_idf(const Dataset& d) {
  std::vector<std::size_t> df(d.num_features(), 0);
  for (std::size_t i = 0; i < d.num_instances(); ++i) {
    const auto r = d.row(i);
    for (std::size_t k = 0; k < r.size(); ++k) {
      if (r.values[k] != 0.0) ++df[r.indices[k]];
    }
  }
  const double n = static_cast<double>(d.num_instances());
  std::vector<double> idf(d.num_features(), 0.0);
  for (std::size_t f = 0; f < df.size(); ++f) {
    if (df[f] > 0) idf[f] = std::log(n / static_cast<double>(df[f]));
  }
  return idf;
}

namespace {

void normalize_into(std::vector<FeatureId>& idx, std::vector<double>& val) {
  double sq = 0.0;
  for (double v : val) sq += v * v;
  if (sq <= 0.0) {
    idx.clear();
    val.clear();
    return;
  }
  const double inv = 1.0 / std::sqrt(sq);
  for (double& v : val) v *= inv;
}

}  // namespace

Dataset apply_idf(const Dataset& d, std::span<const double> idf) {
  Dataset out;
  std::vector<FeatureId> idx;
  std::vector<double> val;
  for (std::size_t i = 0; i < d.num_instances(); ++i) {
    const auto r = d.row(i);
    idx.clear();
    val.clear();
    for (std::size_t k = 0; k < r.size(); ++k) {
      if (r.indices[k] >= idf.size()) continue;
      const double v = r.values[k] * idf[r.indices[k]];
      if (v == 0.0) continue;
      idx.push_back(r.indices[k]);
      val.push_back(v);
    }
    normalize_into(idx, val);
    out.add_row(idx, val, d.label(i), d.instance_id(i));
  }
  out.set_num_features(std::max(d.num_features(), idf.size()));
  return out;
}

Dataset tfidf_transform(const Dataset& d) { return apply_idf(d, fit_idf(d)); }

Dataset l2_normalize(const Dataset& d) {
  Dataset out;
  std::vector<FeatureId> idx;
  std::vector<double> val;
  for (std::size_t i = 0; i < d.num_instances(); ++i) {
    const auto r = d.row(i);
    idx.assign(r.indices.begin(), r.indices.end());
    val.assign(r.values.begin(), r.values.end());
    normalize_into(idx, val);
    out.add_row(idx, val, d.label(i), d.instance_id(i));
  }
  out.set_num_features(d.num_features());
  return out;
}

void deterministic_shuffle(std::vector<std::size_t>& v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

namespace {

std::map<NodeId, std::vector<std::size_t>> rows_by_label(const Dataset& d) {
  std::map<NodeId, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < d.num_instances(); ++i) groups[d.label(i)].push_back(i);
  return groups;
}

}  // namespace

SplitIndices split_indices(const Dataset& d, const SplitSpec& s) {
  if (!(s.train_fraction > 0.0 && s.train_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "train_fraction must lie in (0,1)");
  }
  const std::size_t n = d.num_instances();
  if (n == 0) throw Error(ErrorCode::DegenerateSplit, "empty dataset");

  SplitIndices out;
  if (!s.stratified) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    deterministic_shuffle(order, s.seed);
    const auto n_train = static_cast<std::size_t>(std::llround(s.train_fraction * n));
    out.train.assign(order.begin(), order.begin() + std::min(n_train, n));
    out.validation.assign(order.begin() + std::min(n_train, n), order.end());
  } else {
    auto groups = rows_by_label(d);
    struct Alloc {
      std::vector<std::size_t>* rows;
      std::size_t take;
      double remainder;
      std::size_t order;
    };
    std::vector<Alloc> allocs;
    std::size_t assigned = 0;
    std::size_t g = 0;
    for (auto& [label, rows] : groups) {
      const double exact = s.train_fraction * static_cast<double>(rows.size());
      std::size_t take = static_cast<std::size_t>(std::floor(exact));
      if (rows.size() >= 2 && take == 0) take = 1;
      allocs.push_back({&rows, take, exact - std::floor(exact), g++});
      assigned += take;
    }
    const auto target = static_cast<std::size_t>(std::llround(s.train_fraction * n));
    if (assigned < target) {
      std::vector<std::size_t> order(allocs.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return allocs[a].remainder > allocs[b].remainder;
      });
      for (std::size_t k = 0; k < order.size() && assigned < target; ++k) {
        Alloc& a = allocs[order[k]];
        if (a.take < a.rows->size() && a.remainder > 0.0) {
          ++a.take;
          ++assigned;
        }
      }
    }
    for (Alloc& a : allocs) {
      std::vector<std::size_t>& rows = *a.rows;
      deterministic_shuffle(rows, s.seed ^ (0x9e3779b97f4a7c15ull * (a.order + 1)));
      out.train.insert(out.train.end(), rows.begin(), rows.begin() + a.take);
      out.validation.insert(out.validation.end(), rows.begin() + a.take, rows.end());
    }
  }
  if (out.train.empty() || out.validation.empty()) {
    throw Error(ErrorCode::DegenerateSplit, "train or validation side would be empty");
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.validation.begin(), out.validation.end());
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& d, const SplitSpec& s) {
  const auto idx = split_indices(d, s);
  return {d.subset(idx.train), d.subset(idx.validation)};
}

std::vector<std::size_t> sample_per_class(const Dataset& d, std::size_t per_class,
                                          std::uint64_t seed) {
  auto groups = rows_by_label(d);
  std::vector<std::size_t> out;
  std::uint64_t g = 0;
  for (auto& [label, rows] : groups) {
    deterministic_shuffle(rows, seed ^ (0x9e3779b97f4a7c15ull * ++g));
    out.insert(out.end(), rows.begin(), rows.begin() + std::min(per_class, rows.size()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace hfsel
