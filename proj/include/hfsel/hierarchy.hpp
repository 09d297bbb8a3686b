#pragma once

// Taxonomy tree and per-node routing of training instances.

#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hfsel {

// Dense node index, 0..size()-1, assigned in ascending order of external id.
using NodeIndex = std::uint32_t;
// Node id as it appears in taxonomy and label files.
using NodeId = std::int64_t;

using Edge = std::pair<NodeId, NodeId>;  // (parent, child)

class Hierarchy {
 public:
  Hierarchy() = default;

  // Validates that the edges form a single rooted tree. Throws hfsel::Error
  // with EmptyInput, CycleDetected, MultipleParents or MultipleRoots naming
  // the offending external node id.
  static Hierarchy from_edges(std::span<const Edge> edges);

  std::size_t size() const { return external_.size(); }
  NodeIndex root() const { return root_; }
  std::span<const NodeIndex> children(NodeIndex n) const {
    return {child_list_.data() + child_begin_[n], child_list_.data() + child_begin_[n + 1]};
  }
  std::optional<NodeIndex> parent(NodeIndex n) const;
  bool is_leaf(NodeIndex n) const { return child_begin_[n] == child_begin_[n + 1]; }
  std::uint32_t level(NodeIndex n) const { return level_[n]; }
  std::uint32_t height() const { return height_; }

  NodeId external_id(NodeIndex n) const { return external_[n]; }
  std::optional<NodeIndex> index_of(NodeId id) const;

  // Internal nodes in breadth-first order from the root (children visited
  // in ascending id order).
  const std::vector<NodeIndex>& internal_nodes() const { return internal_; }
  const std::vector<NodeIndex>& leaves() const { return leaves_; }
  std::size_t child_edge_count() const { return child_list_.size(); }

  // Position of `child` in children(parent(child)).
  std::uint32_t branch_of(NodeIndex child) const { return branch_[child]; }
  // Ancestor of `n` at the given level (n itself when level == level(n)).
  NodeIndex ancestor_at(NodeIndex n, std::uint32_t level) const;
  bool is_ancestor_or_self(NodeIndex ancestor, NodeIndex n) const;

  // Edges in canonical order (by parent external id, then child external id).
  std::vector<Edge> edges() const;
  // FNV-1a over the canonical edge list; stored in model files.
  std::uint64_t fingerprint() const;

 private:
  std::vector<NodeId> external_;
  std::vector<std::uint32_t> child_begin_;
  std::vector<NodeIndex> child_list_;
  std::vector<NodeIndex> parent_;  // parent_[root] == root
  std::vector<std::uint32_t> branch_;
  std::vector<std::uint32_t> level_;
  std::vector<NodeIndex> internal_;
  std::vector<NodeIndex> leaves_;
  NodeIndex root_ = 0;
  std::uint32_t height_ = 0;
};

// Reads "parent child" pairs, one per line; blank lines and lines starting
// with '#' are skipped. Malformed lines raise MalformedLine(line number).
std::vector<Edge> read_edges(std::istream& in);
Hierarchy parse_hierarchy(std::istream& in);
Hierarchy load_hierarchy(const std::string& path);

// Star hierarchy root -> every leaf of `h`, used by the flat baseline. The
// new root gets an external id one larger than any id in `h`.
Hierarchy flatten_to_leaves(const Hierarchy& h);

struct RoutedInstance {
  std::uint32_t instance;
  NodeIndex child;
  std::uint32_t branch;  // position of `child` among the node's children
};

// Instances whose label lies under `node`, each tagged with the child on the
// path to its label. Rows are ordered by instance id.
struct NodeTrainingView {
  NodeIndex node = 0;
  std::vector<RoutedInstance> rows;
  std::size_t count() const { return rows.size(); }
};

// Maps external label ids to leaf indices; UnknownLabel(instance) when a label
// is not a leaf of `h`.
std::vector<NodeIndex> resolve_labels(const Hierarchy& h, std::span<const NodeId> labels);

// One view per node index; views of leaves are empty.
std::vector<NodeTrainingView> build_node_views(const Hierarchy& h,
                                               std::span<const NodeId> labels);
std::vector<NodeTrainingView> build_node_views(const Hierarchy& h,
                                               std::span<const NodeIndex> leaf_labels);

}  // namespace hfsel
