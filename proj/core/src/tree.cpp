#include "ultrarecon/tree.hpp"

#include <algorithm>
#include <string>

#include "ultrarecon/error.hpp"

namespace ultrarecon {

bool is_valid_label(std::string_view label) noexcept {
  if (label.empty()) return false;
  for (char ch : label) {
    switch (ch) {
      case '(':
      case ')':
      case ':':
      case ',':
      case ';':
      case ' ':
      case '\t':
      case '\n':
      case '\r':
        return false;
      default:
        break;
    }
  }
  return true;
}

Tree::Tree(std::vector<Node> nodes, NodeId root, std::vector<double> heights)
    : nodes_(std::move(nodes)), root_(root) {
  const auto count = nodes_.size();
  if (count == 0) throw InvalidArgument("tree has no nodes");
  if (root_ < 0 || static_cast<std::size_t>(root_) >= count)
    throw InvalidArgument("root id out of range");
  if (nodes_[static_cast<std::size_t>(root_)].parent != kNoNode)
    throw InvalidArgument("root has a parent");
  if (!heights.empty() && heights.size() != count)
    throw InvalidArgument("height vector does not match node count");

  depth_.assign(count, -1);
  leaf_count_.assign(count, 0);
  min_leaf_.assign(count, kNoNode);

  // Iterative DFS from the root; checks links and reachability.
  std::vector<NodeId> order;
  order.reserve(count);
  std::vector<NodeId> stack{root_};
  depth_[static_cast<std::size_t>(root_)] = 0;
  while (!stack.empty()) {
    NodeId v = stack.back();
    stack.pop_back();
    order.push_back(v);
    const Node& nd = nodes_[static_cast<std::size_t>(v)];
    const bool has0 = nd.children[0] != kNoNode;
    const bool has1 = nd.children[1] != kNoNode;
    if (has0 != has1) throw InvalidArgument("node " + std::to_string(v) + " has exactly one child");
    if (!has0) {
      if (!is_valid_label(nd.label))
        throw InvalidArgument("leaf " + std::to_string(v) + " has invalid label '" + nd.label + "'");
      continue;
    }
    for (NodeId c : nd.children) {
      if (c < 0 || static_cast<std::size_t>(c) >= count) throw InvalidArgument("child id out of range");
      if (nodes_[static_cast<std::size_t>(c)].parent != v)
        throw InvalidArgument("child " + std::to_string(c) + " does not point back to parent");
      if (depth_[static_cast<std::size_t>(c)] != -1) throw InvalidArgument("node reached twice");
      depth_[static_cast<std::size_t>(c)] = depth_[static_cast<std::size_t>(v)] + 1;
      stack.push_back(c);
    }
  }
  if (order.size() != count) throw InvalidArgument("tree has unreachable nodes");

  heights_ = std::move(heights);
  const bool derive_heights = heights_.empty();
  if (derive_heights) heights_.assign(count, 0.0);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const auto v = static_cast<std::size_t>(*it);
    const Node& nd = nodes_[v];
    if (nd.is_leaf()) {
      leaf_count_[v] = 1;
      min_leaf_[v] = *it;
      if (derive_heights) heights_[v] = 0.0;
      continue;
    }
    const auto c0 = static_cast<std::size_t>(nd.children[0]);
    const auto c1 = static_cast<std::size_t>(nd.children[1]);
    leaf_count_[v] = leaf_count_[c0] + leaf_count_[c1];
    const NodeId m0 = min_leaf_[c0];
    const NodeId m1 = min_leaf_[c1];
    min_leaf_[v] = nodes_[static_cast<std::size_t>(m0)].label < nodes_[static_cast<std::size_t>(m1)].label ? m0 : m1;
    if (derive_heights)
      heights_[v] = std::max(heights_[c0] + nodes_[c0].edge_weight, heights_[c1] + nodes_[c1].edge_weight);
  }

  for (NodeId v : order) {
    if (nodes_[static_cast<std::size_t>(v)].is_leaf()) leaves_.push_back(v);
  }
  std::sort(leaves_.begin(), leaves_.end(), [this](NodeId a, NodeId b) {
    return nodes_[static_cast<std::size_t>(a)].label < nodes_[static_cast<std::size_t>(b)].label;
  });
  rank_.assign(count, -1);
  by_label_.reserve(leaves_.size() * 2);
  for (std::size_t i = 0; i < leaves_.size(); ++i) {
    const NodeId v = leaves_[i];
    rank_[static_cast<std::size_t>(v)] = static_cast<int>(i);
    auto [pos, inserted] = by_label_.emplace(nodes_[static_cast<std::size_t>(v)].label, v);
    if (!inserted) throw InvalidArgument("duplicate leaf label '" + pos->first + "'");
  }
}

int Tree::leaf_rank(NodeId leaf) const {
  const int r = rank_.at(static_cast<std::size_t>(leaf));
  if (r < 0) throw InvalidArgument("node " + std::to_string(leaf) + " is not a leaf");
  return r;
}

NodeId Tree::leaf(std::string_view label) const {
  if (auto v = find_leaf(label)) return *v;
  throw InvalidArgument("unknown leaf '" + std::string(label) + "'");
}

std::optional<NodeId> Tree::find_leaf(std::string_view label) const {
  auto it = by_label_.find(std::string(label));
  if (it == by_label_.end()) return std::nullopt;
  return it->second;
}

NodeId Tree::lca(NodeId a, NodeId b) const {
  while (depth(a) > depth(b)) a = parent(a);
  while (depth(b) > depth(a)) b = parent(b);
  while (a != b) {
    a = parent(a);
    b = parent(b);
  }
  return a;
}

bool Tree::is_ancestor(NodeId ancestor, NodeId v) const {
  while (v != kNoNode && depth(v) > depth(ancestor)) v = parent(v);
  return v == ancestor;
}

std::vector<NodeId> Tree::leaf_set(NodeId v) const {
  std::vector<NodeId> out;
  out.reserve(static_cast<std::size_t>(leaves_below(v)));
  std::vector<NodeId> stack{v};
  while (!stack.empty()) {
    NodeId u = stack.back();
    stack.pop_back();
    if (is_leaf(u)) {
      out.push_back(u);
    } else {
      stack.push_back(child(u, 1));
      stack.push_back(child(u, 0));
    }
  }
  std::sort(out.begin(), out.end(), [this](NodeId x, NodeId y) { return label(x) < label(y); });
  return out;
}

std::vector<std::string> Tree::leaf_labels(NodeId v) const {
  std::vector<std::string> out;
  for (NodeId u : leaf_set(v)) out.push_back(label(u));
  return out;
}

std::vector<NodeId> Tree::preorder() const {
  std::vector<NodeId> out;
  out.reserve(nodes_.size());
  std::vector<NodeId> stack{root_};
  while (!stack.empty()) {
    NodeId u = stack.back();
    stack.pop_back();
    out.push_back(u);
    if (!is_leaf(u)) {
      stack.push_back(child(u, 1));
      stack.push_back(child(u, 0));
    }
  }
  return out;
}

std::vector<NodeId> Tree::postorder() const {
  auto out = preorder();
  std::reverse(out.begin(), out.end());
  return out;
}

NodeId Tree::right_child(NodeId v) const {
  const NodeId c0 = child(v, 0);
  const NodeId c1 = child(v, 1);
  if (c0 == kNoNode) return kNoNode;
  const int n0 = leaves_below(c0);
  const int n1 = leaves_below(c1);
  if (n0 != n1) return n0 > n1 ? c0 : c1;
  return label(min_leaf(c0)) < label(min_leaf(c1)) ? c1 : c0;
}

NodeId Tree::left_child(NodeId v) const {
  const NodeId r = right_child(v);
  if (r == kNoNode) return kNoNode;
  return r == child(v, 0) ? child(v, 1) : child(v, 0);
}

NodeId TreeBuilder::add_leaf(std::string label) {
  Node nd;
  nd.label = std::move(label);
  nodes_.push_back(std::move(nd));
  heights_.push_back(0.0);
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId TreeBuilder::join(NodeId left, NodeId right, double height) {
  const auto id = static_cast<NodeId>(nodes_.size());
  for (NodeId c : {left, right}) {
    if (c < 0 || c >= id) throw InvalidArgument("join: unknown node");
    if (nodes_[static_cast<std::size_t>(c)].parent != kNoNode) throw InvalidArgument("join: node already has a parent");
  }
  if (left == right) throw InvalidArgument("join: identical children");
  Node nd;
  nd.children = {left, right};
  nodes_.push_back(std::move(nd));
  heights_.push_back(height);
  for (NodeId c : {left, right}) {
    auto& cn = nodes_[static_cast<std::size_t>(c)];
    cn.parent = id;
    cn.edge_weight = height - heights_[static_cast<std::size_t>(c)];
  }
  return id;
}

Tree TreeBuilder::build(NodeId root) const {
  // Compact to the nodes reachable from `root` so partial builders work.
  std::vector<NodeId> remap(nodes_.size(), kNoNode);
  std::vector<NodeId> order;
  std::vector<NodeId> stack{root};
  while (!stack.empty()) {
    NodeId v = stack.back();
    stack.pop_back();
    remap[static_cast<std::size_t>(v)] = static_cast<NodeId>(order.size());
    order.push_back(v);
    const Node& nd = nodes_[static_cast<std::size_t>(v)];
    if (!nd.is_leaf()) {
      stack.push_back(nd.children[1]);
      stack.push_back(nd.children[0]);
    }
  }
  std::vector<Node> out(order.size());
  std::vector<double> heights(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Node& src = nodes_[static_cast<std::size_t>(order[i])];
    Node& dst = out[i];
    dst.label = src.label;
    dst.edge_weight = src.edge_weight;
    dst.parent = order[i] == root ? kNoNode : remap[static_cast<std::size_t>(src.parent)];
    if (!src.is_leaf()) {
      dst.children = {remap[static_cast<std::size_t>(src.children[0])], remap[static_cast<std::size_t>(src.children[1])]};
    }
    heights[i] = heights_[static_cast<std::size_t>(order[i])];
  }
  out[0].edge_weight = 0.0;
  return Tree(std::move(out), 0, std::move(heights));
}

}  // namespace ultrarecon
