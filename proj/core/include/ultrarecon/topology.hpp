#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ultrarecon/noise.hpp"
#include "ultrarecon/tree.hpp"

namespace ultrarecon::topology {

struct Config {
  double c_thr = 24.0;                      // threshold multiplier: c_thr * sqrt(samples * ln n)
  double sample_floor_fraction = 1.0 / 16;  // verdicts on fewer than this * n samples are flagged
  double large_fraction = 11.0 / 12;        // parts above this * n cannot be completed from outside
  double small_fraction = 1.0 / 12;         // witness sets need at least this * n leaves
  int n0 = 8;                               // exhaustive search at or below this many leaves

  /// Throws InvalidArgument naming the offending field.
  void validate() const;
};

enum class Outcome { left, right, tie };

struct ScoreVerdict {
  Outcome outcome = Outcome::tie;
  double margin = 0.0;     // X - Y
  double threshold = 0.0;
  bool below_floor = false;
};

/// c_thr * sqrt(samples * ln n), natural log.
double score_threshold(int n, double samples, const Config& cfg);

/// Left iff X - Y > threshold, Right iff Y - X > threshold, else Tie. The
/// threshold uses `samples = n` summed indicators.
ScoreVerdict compare_sums(double x, double y, int n, const Config& cfg);
ScoreVerdict compare_sums(double x, double y, int n, double samples, const Config& cfg);

/// Growable arena of rooted binary trees over LeafIds. Resolved pieces of the
/// unknown tree are node indices into one shared Forest.
class Forest {
 public:
  int add_leaf(LeafId leaf);
  int join(int left, int right);

  bool is_leaf(int v) const { return nodes_.at(static_cast<std::size_t>(v)).leaf >= 0; }
  LeafId leaf(int v) const { return nodes_.at(static_cast<std::size_t>(v)).leaf; }
  int child(int v, int i) const { return i == 0 ? nodes_.at(static_cast<std::size_t>(v)).left : nodes_.at(static_cast<std::size_t>(v)).right; }
  int parent(int v) const { return nodes_.at(static_cast<std::size_t>(v)).parent; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Leaves under v in increasing LeafId order.
  std::vector<LeafId> leaves(int v) const;
  /// Forest node holding `leaf` under `root`, or -1.
  int find_leaf(int root, LeafId leaf) const;

  /// Converts the piece at `root` to a Tree. Heights are levels / max level,
  /// which keeps the result a valid ultrametric of height 1.
  Tree to_tree(int root, const TripleSource& source) const;

 private:
  struct Item {
    int left = -1;
    int right = -1;
    int parent = -1;
    LeafId leaf = -1;
  };
  std::vector<Item> nodes_;
};

/// Pair scores s_ij over the parts of a leaf-disjoint forest. For parts i, j
/// with smallest leaves a, b the score sums the (a, b) answer weight over all
/// witnesses x in `ambient` outside both parts.
struct ScoreMatrix {
  int parts = 0;
  std::vector<double> sum;    // row-major parts x parts
  std::vector<double> count;  // witnesses per pair
  double score(int i, int j) const { return sum[static_cast<std::size_t>(i * parts + j)]; }
  double witnesses(int i, int j) const { return count[static_cast<std::size_t>(i * parts + j)]; }
};

ScoreMatrix sibling_scores(TripleSource& source, const std::vector<std::vector<LeafId>>& parts,
                           std::span<const LeafId> ambient);

/// Grows sibling pieces bottom-up inside S, always merging the pair with the
/// highest mean score, until a piece reaches ceil(sqrt(n)) leaves. Returns
/// that piece; its size lies in [ceil(sqrt n), 2 ceil(sqrt n)].
/// Throws ReconstructionFailure if |S| < ceil(sqrt n).
int build_subtree(TripleSource& source, Forest& forest, std::span<const LeafId> s, int n, const Config& cfg);

struct PartitionResult {
  std::vector<LeafId> lower;  // buckets closer to the base than the pivot
  std::vector<LeafId> same;   // the pivot's bucket
  std::vector<LeafId> upper;  // buckets farther from the base
};

/// Splits `candidates` around the pivot using, for each x, the counts
/// X = #[Q(a,b,x)=(a,x)] and Y = #[Q(a,b,x)=(a,b)] over a in base, b in pivot.
PartitionResult partition(TripleSource& source, std::span<const LeafId> base, std::span<const LeafId> pivot,
                          std::span<const LeafId> candidates, int n, const Config& cfg);

/// Orders the leaves `rest` into buckets relative to the base subtree with
/// leaf set `base` (pairwise tests plus topological sort) and resolves each
/// bucket from triples scored over the base. Returns the bucket pieces,
/// nearest first.
std::vector<int> completion_quotient(TripleSource& source, Forest& forest, std::span<const LeafId> base,
                                     std::span<const LeafId> rest, int n, const Config& cfg);

/// Resolves the induced topology on the subtree leaf set `leaves` from pair
/// scores summed over the `outside` witnesses.
int completion_induced(TripleSource& source, Forest& forest, std::span<const LeafId> leaves,
                       std::span<const LeafId> outside, const Config& cfg);

/// closest(a, b, c) returns 0 for (a,b), 1 for (b,c), 2 for (c,a).
using ClosestFn = std::function<int(LeafId, LeafId, LeafId)>;

/// Builds the unique tree consistent with the triple answers by repeatedly
/// merging a pair that every third leaf agrees on. Throws
/// ReconstructionFailure naming a conflicting triple if no such pair exists.
int assemble_from_triples(Forest& forest, std::span<const LeafId> leaves, const ClosestFn& closest);

/// Tries every rooted binary tree on `leaves` and keeps the one agreeing with
/// the largest total answer weight. Exponential; at most 14 leaves.
int exhaustive_consistency(TripleSource& source, Forest& forest, std::span<const LeafId> leaves);

struct Stats {
  int pivots = 0;
  int base_switches = 0;
  int quotient_completions = 0;
  int induced_completions = 0;
  int exhaustive_searches = 0;
  int min_switched_base = 0;  // smallest base adopted at a switch (0 if none)
  bool accounting_ok = true;  // every switched base had >= ceil(sqrt n) leaves
};

struct TopologyResult {
  std::optional<Tree> tree;
  std::string failure_stage;
  std::string failure_detail;
  std::vector<std::string> trace;
  Stats stats;
  std::uint64_t queries = 0;

  bool ok() const noexcept { return tree.has_value(); }
};

/// Reconstructs the topology over all leaves of `source`. Never throws
/// ReconstructionFailure; failures are reported in the result.
TopologyResult reconstruct_topology(TripleSource& source, const Config& cfg);

}  // namespace ultrarecon::topology
