#include "hfsel/hierarchy.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>

#include "hfsel/error.hpp"

namespace hfsel {

Hierarchy Hierarchy::from_edges(std::span<const Edge> edges) {
  if (edges.empty()) throw Error(ErrorCode::EmptyInput, "taxonomy has no edges");

  std::vector<NodeId> ids;
  ids.reserve(edges.size() * 2);
  for (const auto& [p, c] : edges) {
    if (p < 0 || c < 0) {
      throw Error(ErrorCode::InvalidArgument, "node ids must be non-negative", p < 0 ? p : c);
    }
    ids.push_back(p);
    ids.push_back(c);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

  const auto index = [&](NodeId id) {
    return static_cast<NodeIndex>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
  };

  const std::size_t n = ids.size();
  constexpr NodeIndex kNone = static_cast<NodeIndex>(-1);
  std::vector<NodeIndex> parent(n, kNone);
  for (const auto& [p, c] : edges) {
    if (p == c) throw Error(ErrorCode::CycleDetected, "self loop", p);
    const NodeIndex ci = index(c);
    if (parent[ci] != kNone) throw Error(ErrorCode::MultipleParents, "node has two parents", c);
    parent[ci] = index(p);
  }

  std::vector<NodeIndex> roots;
  for (NodeIndex i = 0; i < n; ++i) {
    if (parent[i] == kNone) roots.push_back(i);
  }
  if (roots.empty()) {
    // Every node has a parent, so the smallest id lies on (or hangs off) a cycle.
    throw Error(ErrorCode::CycleDetected, "no root", ids.front());
  }
  if (roots.size() > 1) throw Error(ErrorCode::MultipleRoots, "second root", ids[roots[1]]);

  Hierarchy h;
  h.external_ = ids;
  h.root_ = roots.front();

  // Children in ascending index order via counting sort on parent.
  h.child_begin_.assign(n + 1, 0);
  for (NodeIndex i = 0; i < n; ++i) {
    if (parent[i] != kNone) ++h.child_begin_[parent[i] + 1];
  }
  for (std::size_t i = 0; i < n; ++i) h.child_begin_[i + 1] += h.child_begin_[i];
  h.child_list_.resize(edges.size());
  h.branch_.assign(n, 0);
  {
    std::vector<std::uint32_t> fill(h.child_begin_.begin(), h.child_begin_.end() - 1);
    for (NodeIndex i = 0; i < n; ++i) {
      if (parent[i] == kNone) continue;
      const std::uint32_t slot = fill[parent[i]]++;
      h.child_list_[slot] = i;
      h.branch_[i] = slot - h.child_begin_[parent[i]];
    }
  }

  h.parent_ = parent;
  h.parent_[h.root_] = h.root_;
  h.level_.assign(n, 0);

  std::vector<bool> seen(n, false);
  std::deque<NodeIndex> queue{h.root_};
  seen[h.root_] = true;
  while (!queue.empty()) {
    const NodeIndex cur = queue.front();
    queue.pop_front();
    if (h.is_leaf(cur)) {
      h.leaves_.push_back(cur);
    } else {
      h.internal_.push_back(cur);
    }
    for (NodeIndex c : h.children(cur)) {
      seen[c] = true;
      h.level_[c] = h.level_[cur] + 1;
      h.height_ = std::max(h.height_, h.level_[c]);
      queue.push_back(c);
    }
  }
  for (NodeIndex i = 0; i < n; ++i) {
    if (!seen[i]) throw Error(ErrorCode::CycleDetected, "node unreachable from root", ids[i]);
  }
  std::sort(h.leaves_.begin(), h.leaves_.end());
  return h;
}

std::optional<NodeIndex> Hierarchy::parent(NodeIndex n) const {
  if (n == root_) return std::nullopt;
  return parent_[n];
}

std::optional<NodeIndex> Hierarchy::index_of(NodeId id) const {
  const auto it = std::lower_bound(external_.begin(), external_.end(), id);
  if (it == external_.end() || *it != id) return std::nullopt;
  return static_cast<NodeIndex>(it - external_.begin());
}

NodeIndex Hierarchy::ancestor_at(NodeIndex n, std::uint32_t level) const {
  while (level_[n] > level) n = parent_[n];
  return n;
}

bool Hierarchy::is_ancestor_or_self(NodeIndex ancestor, NodeIndex n) const {
  if (level_[n] < level_[ancestor]) return false;
  return ancestor_at(n, level_[ancestor]) == ancestor;
}

std::vector<Edge> Hierarchy::edges() const {
  std::vector<Edge> out;
  out.reserve(child_list_.size());
  for (NodeIndex p = 0; p < size(); ++p) {
    for (NodeIndex c : children(p)) out.emplace_back(external_[p], external_[c]);
  }
  return out;
}

std::uint64_t Hierarchy::fingerprint() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffu;
      h *= 1099511628211ull;
    }
  };
  for (const auto& [p, c] : edges()) {
    mix(static_cast<std::uint64_t>(p));
    mix(static_cast<std::uint64_t>(c));
  }
  return h;
}

std::vector<Edge> read_edges(std::istream& in) {
  std::vector<Edge> edges;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    NodeId p = 0;
    NodeId c = 0;
    std::string rest;
    if (!(ss >> p >> c) || (ss >> rest) || p < 0 || c < 0) {
      throw Error(ErrorCode::MalformedLine, "expected 'parent child'", line_no);
    }
    edges.emplace_back(p, c);
  }
  return edges;
}

Hierarchy parse_hierarchy(std::istream& in) {
  const auto edges = read_edges(in);
  return Hierarchy::from_edges(edges);
}

Hierarchy load_hierarchy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open taxonomy file " + path);
  return parse_hierarchy(in);
}

Hierarchy flatten_to_leaves(const Hierarchy& h) {
  NodeId max_id = 0;
  for (NodeIndex i = 0; i < h.size(); ++i) max_id = std::max(max_id, h.external_id(i));
  std::vector<Edge> edges;
  edges.reserve(h.leaves().size());
  for (NodeIndex leaf : h.leaves()) edges.emplace_back(max_id + 1, h.external_id(leaf));
  return Hierarchy::from_edges(edges);
}

std::vector<NodeIndex> resolve_labels(const Hierarchy& h, std::span<const NodeId> labels) {
  std::vector<NodeIndex> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto idx = h.index_of(labels[i]);
    if (!idx || !h.is_leaf(*idx)) {
      throw Error(ErrorCode::UnknownLabel,
                  "label " + std::to_string(labels[i]) + " is not a leaf of the taxonomy",
                  static_cast<std::int64_t>(i));
    }
    out[i] = *idx;
  }
  return out;
}

std::vector<NodeTrainingView> build_node_views(const Hierarchy& h,
                                               std::span<const NodeId> labels) {
  const auto leaves = resolve_labels(h, labels);
  return build_node_views(h, std::span<const NodeIndex>(leaves));
}

std::vector<NodeTrainingView> build_node_views(const Hierarchy& h,
                                               std::span<const NodeIndex> leaf_labels) {
  std::vector<NodeTrainingView> views(h.size());
  for (NodeIndex n = 0; n < h.size(); ++n) views[n].node = n;
  std::vector<NodeIndex> path;
  for (std::size_t i = 0; i < leaf_labels.size(); ++i) {
    const NodeIndex leaf = leaf_labels[i];
    if (leaf >= h.size() || !h.is_leaf(leaf)) {
      throw Error(ErrorCode::UnknownLabel, "label is not a leaf", static_cast<std::int64_t>(i));
    }
    for (NodeIndex cur = leaf; cur != h.root();) {
      const NodeIndex par = *h.parent(cur);
      views[par].rows.push_back({static_cast<std::uint32_t>(i), cur, h.branch_of(cur)});
      cur = par;
    }
  }
  return views;
}

}  // namespace hfsel
