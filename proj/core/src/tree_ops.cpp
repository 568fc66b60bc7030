#include "ultrarecon/tree_ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>

#include "ultrarecon/error.hpp"
#include "ultrarecon/rng.hpp"

namespace ultrarecon {
namespace {

int ceil_log2(long long m) {
  int d = 0;
  while ((1LL << d) < m) ++d;
  return d;
}

struct Shape {
  std::vector<std::array<int, 2>> children;  // -1 for leaves
  std::vector<int> levels;                   // max edge count down to a leaf
};

int grow(Shape& s, SplitMix64& rng, int leaves, int budget) {
  const int id = static_cast<int>(s.children.size());
  s.children.push_back({-1, -1});
  s.levels.push_back(0);
  if (leaves == 1) return id;
  const long long cap = budget - 1 >= 62 ? (1LL << 62) : (1LL << (budget - 1));
  const long long lo = std::max<long long>(1, leaves - cap);
  const long long hi = std::min<long long>(leaves - 1, cap);
  const long long k = lo + static_cast<long long>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
  const int left = grow(s, rng, static_cast<int>(k), budget - 1);
  const int right = grow(s, rng, leaves - static_cast<int>(k), budget - 1);
  s.children[static_cast<std::size_t>(id)] = {left, right};
  s.levels[static_cast<std::size_t>(id)] =
      1 + std::max(s.levels[static_cast<std::size_t>(left)], s.levels[static_cast<std::size_t>(right)]);
  return id;
}

std::string leaf_label(int i, int width) {
  std::string digits = std::to_string(i);
  if (static_cast<int>(digits.size()) < width) digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
  return "L" + digits;
}

void require_leaf(const Tree& tree, NodeId v) {
  if (v < 0 || static_cast<std::size_t>(v) >= tree.node_count() || !tree.is_leaf(v))
    throw InvalidArgument("node " + std::to_string(v) + " is not a leaf");
}

}  // namespace

int max_feasible_depth(double min_edge_weight) {
  if (!(min_edge_weight > 0.0)) throw InvalidArgument("min_edge_weight must be positive");
  return static_cast<int>(std::floor(1.0 / min_edge_weight + 1e-12));
}

Tree generate_random_ultrametric(int n, double min_edge_weight, std::uint64_t seed) {
  if (n < 2) throw InvalidArgument("generate_random_ultrametric: n must be at least 2");
  const int depth_budget = std::min(max_feasible_depth(min_edge_weight), n - 1);
  if (ceil_log2(n) > depth_budget) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "infeasible(min_edge_weight=%.17g, n=%d): every tree needs depth %d", min_edge_weight,
                  n, ceil_log2(n));
    throw InfeasibleError(buf);
  }

  SplitMix64 rng(hash_combine(seed, 0x7472656547656eULL));
  Shape shape;
  shape.children.reserve(static_cast<std::size_t>(2 * n - 1));
  grow(shape, rng, n, depth_budget);

  // Top-down heights: the root sits at 1, each child uniformly between its own
  // minimum (levels * w) and the parent height minus w.
  const auto count = shape.children.size();
  std::vector<double> height(count, 0.0);
  height[0] = 1.0;
  for (std::size_t v = 0; v < count; ++v) {  // parents precede children
    for (int c : shape.children[v]) {
      if (c < 0) continue;
      const auto cu = static_cast<std::size_t>(c);
      if (shape.levels[cu] == 0) {
        height[cu] = 0.0;
        continue;
      }
      const double lo = shape.levels[cu] * min_edge_weight;
      const double hi = height[v] - min_edge_weight;
      height[cu] = hi > lo ? rng.uniform(lo, hi) : lo;
    }
  }

  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  const int width = static_cast<int>(std::to_string(n - 1).size());

  TreeBuilder builder;
  std::vector<NodeId> built(count, kNoNode);
  std::size_t next_leaf = 0;
  for (std::size_t i = count; i-- > 0;) {  // children have larger ids
    const auto& ch = shape.children[i];
    if (ch[0] < 0) {
      built[i] = builder.add_leaf(leaf_label(perm[next_leaf++], width));
    } else {
      built[i] = builder.join(built[static_cast<std::size_t>(ch[0])], built[static_cast<std::size_t>(ch[1])], height[i]);
    }
  }
  return builder.build(built[0]);
}

double leaf_distance(const Tree& tree, NodeId a, NodeId b) {
  require_leaf(tree, a);
  require_leaf(tree, b);
  if (a == b) throw InvalidArgument("leaf_distance: identical leaves");
  return 2.0 * tree.height(tree.lca(a, b));
}

double leaf_distance(const Tree& tree, std::string_view a, std::string_view b) {
  return leaf_distance(tree, tree.leaf(a), tree.leaf(b));
}

std::pair<NodeId, NodeId> closest_pair(const Tree& tree, NodeId a, NodeId b, NodeId c) {
  require_leaf(tree, a);
  require_leaf(tree, b);
  require_leaf(tree, c);
  if (a == b || b == c || a == c) throw InvalidArgument("closest_pair: leaves must be distinct");
  const double ab = tree.height(tree.lca(a, b));
  const double bc = tree.height(tree.lca(b, c));
  const double ac = tree.height(tree.lca(a, c));
  std::pair<NodeId, NodeId> out;
  if (ab < bc && ab < ac) {
    out = {a, b};
  } else if (bc < ab && bc < ac) {
    out = {b, c};
  } else if (ac < ab && ac < bc) {
    out = {a, c};
  } else {
    throw Error("corrupt tree: no unique closest pair among " + tree.label(a) + ", " + tree.label(b) + ", " +
                tree.label(c));
  }
  if (tree.label(out.second) < tree.label(out.first)) std::swap(out.first, out.second);
  return out;
}

BucketPartition bucket_partition(const Tree& tree, NodeId subtree_root) {
  if (subtree_root == tree.root()) throw InvalidArgument("bucket_partition: base cannot be the root");
  BucketPartition out;
  out.base = subtree_root;
  out.bucket_of.assign(tree.node_count(), -1);
  for (NodeId v = subtree_root; v != tree.root(); v = tree.parent(v)) {
    const NodeId p = tree.parent(v);
    const NodeId sib = tree.child(p, 0) == v ? tree.child(p, 1) : tree.child(p, 0);
    auto leaves = tree.leaf_set(sib);
    for (NodeId x : leaves) out.bucket_of[static_cast<std::size_t>(x)] = static_cast<int>(out.buckets.size());
    out.buckets.push_back(std::move(leaves));
  }
  return out;
}

Tree induced_topology(const Tree& tree, std::span<const NodeId> leaves) {
  if (leaves.size() < 2) throw InvalidArgument("induced_topology: need at least two leaves");
  std::vector<char> keep(tree.node_count(), 0);
  for (NodeId v : leaves) {
    require_leaf(tree, v);
    if (keep[static_cast<std::size_t>(v)]) throw InvalidArgument("induced_topology: duplicate leaf");
    keep[static_cast<std::size_t>(v)] = 1;
  }
  TreeBuilder builder;
  std::vector<NodeId> built(tree.node_count(), kNoNode);  // builder node carrying v's kept leaves
  NodeId top = kNoNode;
  for (NodeId v : tree.postorder()) {
    const auto vu = static_cast<std::size_t>(v);
    if (tree.is_leaf(v)) {
      if (keep[vu]) built[vu] = builder.add_leaf(tree.label(v));
    } else {
      const NodeId l = built[static_cast<std::size_t>(tree.child(v, 0))];
      const NodeId r = built[static_cast<std::size_t>(tree.child(v, 1))];
      if (l != kNoNode && r != kNoNode) {
        built[vu] = builder.join(l, r, tree.height(v));
      } else {
        built[vu] = l != kNoNode ? l : r;
      }
    }
    top = built[vu];
  }
  return builder.build(top);
}

Tree induced_topology(const Tree& tree, std::span<const std::string> labels) {
  std::vector<NodeId> ids;
  ids.reserve(labels.size());
  for (const auto& l : labels) ids.push_back(tree.leaf(l));
  return induced_topology(tree, ids);
}

QuotientResult quotient(const Tree& tree, NodeId subtree_root) {
  if (subtree_root == tree.root()) throw InvalidArgument("quotient: cannot collapse the root");
  const NodeId rep = tree.min_leaf(subtree_root);
  std::vector<NodeId> kept;
  kept.reserve(tree.leaf_count());
  for (NodeId x : tree.leaves()) {
    if (x == rep || !tree.is_ancestor(subtree_root, x)) kept.push_back(x);
  }
  return QuotientResult{induced_topology(tree, kept), tree.label(rep), tree.leaf_labels(subtree_root)};
}

std::string canonical_topology(const Tree& tree) {
  std::string out;
  out.reserve(tree.leaf_count() * 8);
  // Explicit stack of (node, phase); phase 0 = open, 1 = between children, 2 = close.
  std::vector<std::pair<NodeId, int>> stack{{tree.root(), 0}};
  auto ordered = [&](NodeId v) {
    NodeId a = tree.child(v, 0);
    NodeId b = tree.child(v, 1);
    if (tree.label(tree.min_leaf(b)) < tree.label(tree.min_leaf(a))) std::swap(a, b);
    return std::pair{a, b};
  };
  while (!stack.empty()) {
    auto [v, phase] = stack.back();
    stack.pop_back();
    if (tree.is_leaf(v)) {
      out += tree.label(v);
      continue;
    }
    const auto [first, second] = ordered(v);
    if (phase == 0) {
      out += '(';
      stack.push_back({v, 1});
      stack.push_back({first, 0});
    } else if (phase == 1) {
      out += ',';
      stack.push_back({v, 2});
      stack.push_back({second, 0});
    } else {
      out += ')';
    }
  }
  return out;
}

bool topology_equal(const Tree& a, const Tree& b) {
  bool same_labels = a.leaf_count() == b.leaf_count();
  for (std::size_t i = 0; same_labels && i < a.leaf_count(); ++i)
    same_labels = a.label(a.leaves()[i]) == b.label(b.leaves()[i]);
  if (!same_labels) throw InvalidArgument("topology_equal: leaf label sets differ");
  return canonical_topology(a) == canonical_topology(b);
}

UltrametricReport validate_ultrametric(const Tree& tree, double tol, double expected_height, int sampled_triples) {
  UltrametricReport rep;
  auto fail = [&](std::string msg) {
    rep.ok = false;
    if (rep.violations.size() < 64) rep.violations.push_back(std::move(msg));
  };
  char buf[256];

  // Path sums by edge accumulation, independent of the stored heights.
  std::vector<double> depth_sum(tree.node_count(), 0.0);
  for (NodeId v : tree.preorder()) {
    if (v == tree.root()) continue;
    const double w = tree.edge_weight(v);
    if (!(w > 0.0)) {
      std::snprintf(buf, sizeof buf, "edge above node %d has non-positive weight %.17g", v, w);
      fail(buf);
    }
    depth_sum[static_cast<std::size_t>(v)] = depth_sum[static_cast<std::size_t>(tree.parent(v))] + w;
    const double expect = tree.height(tree.parent(v)) - tree.height(v);
    if (std::fabs(expect - w) > tol) {
      std::snprintf(buf, sizeof buf, "node %d: edge weight %.17g disagrees with height difference %.17g", v, w, expect);
      fail(buf);
    }
  }
  if (std::fabs(tree.height(tree.root()) - expected_height) > tol) {
    std::snprintf(buf, sizeof buf, "root height %.17g differs from %.17g", tree.height(tree.root()), expected_height);
    fail(buf);
  }
  for (NodeId x : tree.leaves()) {
    const double s = depth_sum[static_cast<std::size_t>(x)];
    if (std::fabs(s - expected_height) > tol) {
      std::snprintf(buf, sizeof buf, "path root->%s sums to %.17g, expected %.17g", tree.label(x).c_str(), s,
                    expected_height);
      fail(buf);
    }
  }

  // Strong triangle inequality from path sums.
  const auto leaves = tree.leaves();
  const auto n = leaves.size();
  auto dist = [&](NodeId a, NodeId b) {
    const NodeId l = tree.lca(a, b);
    return depth_sum[static_cast<std::size_t>(a)] + depth_sum[static_cast<std::size_t>(b)] -
           2.0 * depth_sum[static_cast<std::size_t>(l)];
  };
  auto check = [&](NodeId a, NodeId b, NodeId c) {
    const double ab = dist(a, b), bc = dist(b, c), ac = dist(a, c);
    if (ac > std::max(ab, bc) + tol || ab > std::max(ac, bc) + tol || bc > std::max(ab, ac) + tol) {
      std::snprintf(buf, sizeof buf, "strong triangle inequality fails on (%s,%s,%s)", tree.label(a).c_str(),
                    tree.label(b).c_str(), tree.label(c).c_str());
      fail(buf);
    }
  };
  if (n >= 3) {
    if (n <= 32) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
          for (std::size_t k = j + 1; k < n; ++k) check(leaves[i], leaves[j], leaves[k]);
    } else {
      SplitMix64 rng(0x76616c6964ULL);
      for (int t = 0; t < sampled_triples; ++t) {
        const auto i = rng.below(n), j = rng.below(n), k = rng.below(n);
        if (i == j || j == k || i == k) continue;
        check(leaves[i], leaves[j], leaves[k]);
      }
    }
  }
  return rep;
}

}  // namespace ultrarecon
