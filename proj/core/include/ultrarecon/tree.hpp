#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ultrarecon {

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

struct Node {
  NodeId parent = kNoNode;
  std::array<NodeId, 2> children{kNoNode, kNoNode};
  std::string label;         // leaves only
  double edge_weight = 0.0;  // weight of the edge to the parent; ignored for the root

  bool is_leaf() const noexcept { return children[0] == kNoNode; }
};

/// Rooted, weighted, full binary tree whose leaves carry unique labels.
///
/// Heights h_v (weight of any path from v down to a leaf) are either supplied
/// by the caller or derived from the edge weights. Leaf distances are computed
/// as d(a, b) = 2 * h_lca(a, b). The tree is immutable once constructed.
class Tree {
 public:
  /// Throws InvalidArgument unless `nodes` form a single rooted full binary
  /// tree with unique, non-empty, Newick-safe leaf labels. When `heights` is
  /// empty they are derived bottom-up as max over children of h_c + w_c.
  Tree(std::vector<Node> nodes, NodeId root, std::vector<double> heights = {});

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t leaf_count() const noexcept { return leaves_.size(); }
  NodeId root() const noexcept { return root_; }

  const Node& node(NodeId v) const { return nodes_.at(static_cast<std::size_t>(v)); }
  bool is_leaf(NodeId v) const { return node(v).is_leaf(); }
  NodeId parent(NodeId v) const { return node(v).parent; }
  NodeId child(NodeId v, int i) const { return node(v).children[static_cast<std::size_t>(i)]; }
  const std::string& label(NodeId v) const { return node(v).label; }
  double edge_weight(NodeId v) const { return node(v).edge_weight; }
  double height(NodeId v) const { return heights_.at(static_cast<std::size_t>(v)); }
  int depth(NodeId v) const { return depth_.at(static_cast<std::size_t>(v)); }

  /// NL(v): number of leaves in the subtree rooted at v.
  int leaves_below(NodeId v) const { return leaf_count_.at(static_cast<std::size_t>(v)); }

  /// Leaf of smallest label in the subtree of v.
  NodeId min_leaf(NodeId v) const { return min_leaf_.at(static_cast<std::size_t>(v)); }

  /// Leaves sorted by label. The position of a leaf in this list is its rank.
  std::span<const NodeId> leaves() const noexcept { return leaves_; }
  int leaf_rank(NodeId leaf) const;

  NodeId leaf(std::string_view label) const;
  std::optional<NodeId> find_leaf(std::string_view label) const;

  NodeId lca(NodeId a, NodeId b) const;
  bool is_ancestor(NodeId ancestor, NodeId v) const;

  /// Leaves in the subtree of v, sorted by label.
  std::vector<NodeId> leaf_set(NodeId v) const;
  std::vector<std::string> leaf_labels(NodeId v) const;
  std::vector<NodeId> preorder() const;
  std::vector<NodeId> postorder() const;

  /// Child-order convention NL(right) >= NL(left). Ties put the child holding
  /// the smaller label on the left.
  NodeId right_child(NodeId v) const;
  NodeId left_child(NodeId v) const;

 private:
  std::vector<Node> nodes_;
  NodeId root_;
  std::vector<double> heights_;
  std::vector<int> depth_;
  std::vector<int> leaf_count_;
  std::vector<NodeId> min_leaf_;
  std::vector<NodeId> leaves_;
  std::vector<int> rank_;
  std::unordered_map<std::string, NodeId> by_label_;
};

/// Bottom-up construction of ultrametric trees from node heights.
class TreeBuilder {
 public:
  NodeId add_leaf(std::string label);
  /// New internal node at `height` above the roots `left` and `right`.
  NodeId join(NodeId left, NodeId right, double height);
  double height(NodeId v) const { return heights_.at(static_cast<std::size_t>(v)); }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Edge weights become height differences; heights are kept exactly.
  Tree build(NodeId root) const;

 private:
  std::vector<Node> nodes_;
  std::vector<double> heights_;
};

/// True when `label` is non-empty and free of Newick metacharacters.
bool is_valid_label(std::string_view label) noexcept;

}  // namespace ultrarecon
