#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ultrarecon/tree.hpp"

namespace ultrarecon {

/// Random ultrametric tree of height 1 with n leaves labelled L0..L{n-1}
/// (zero padded) and every edge at least `min_edge_weight`.
/// Throws InfeasibleError when ceil(log2 n) * min_edge_weight > 1.
Tree generate_random_ultrametric(int n, double min_edge_weight, std::uint64_t seed);

/// Largest root-to-leaf edge count any tree with this weight floor can have.
int max_feasible_depth(double min_edge_weight);

/// d(a, b) = 2 * h_lca(a, b). Throws InvalidArgument unless a, b are distinct leaves.
double leaf_distance(const Tree& tree, NodeId a, NodeId b);
double leaf_distance(const Tree& tree, std::string_view a, std::string_view b);

/// Noise-free answer: the pair with strictly smallest distance, ordered by label.
std::pair<NodeId, NodeId> closest_pair(const Tree& tree, NodeId a, NodeId b, NodeId c);

struct BucketPartition {
  NodeId base = kNoNode;
  /// buckets[0] sits next to the base; each bucket is sorted by label.
  std::vector<std::vector<NodeId>> buckets;
  /// Indexed by node id; -1 for base leaves and internal nodes.
  std::vector<int> bucket_of;
};

BucketPartition bucket_partition(const Tree& tree, NodeId subtree_root);

/// Restriction to `leaves`, contracting nodes left with one child. Node heights
/// are kept, so leaf distances are preserved exactly.
Tree induced_topology(const Tree& tree, std::span<const NodeId> leaves);
Tree induced_topology(const Tree& tree, std::span<const std::string> labels);

struct QuotientResult {
  Tree tree;
  std::string representative;
  std::vector<std::string> collapsed;  // sorted labels of the replaced subtree
};

/// Replaces the subtree at `subtree_root` by its smallest-label leaf.
QuotientResult quotient(const Tree& tree, NodeId subtree_root);

/// Label-only serialization with children ordered by smallest label.
std::string canonical_topology(const Tree& tree);

/// Same leaf-labelled rooted topology. Throws InvalidArgument if the label sets differ.
bool topology_equal(const Tree& a, const Tree& b);

struct UltrametricReport {
  bool ok = true;
  std::vector<std::string> violations;
};

/// Checks positive edge weights, root-to-leaf path sums within tol of
/// `expected_height`, stored heights against edge sums, and the strong
/// triangle inequality on all triples (n <= 32) or a seeded sample.
UltrametricReport validate_ultrametric(const Tree& tree, double tol = 1e-9, double expected_height = 1.0,
                                       int sampled_triples = 4096);

}  // namespace ultrarecon
