#include <algorithm>
#include <cmath>
#include <string>

#include "ultrarecon/error.hpp"
#include "ultrarecon/topology.hpp"

namespace ultrarecon::topology {
namespace {

std::vector<LeafId> set_union(std::initializer_list<const std::vector<LeafId>*> parts) {
  std::vector<LeafId> out;
  for (const auto* p : parts) out.insert(out.end(), p->begin(), p->end());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<LeafId> set_minus(const std::vector<LeafId>& a, const std::vector<LeafId>& b) {
  std::vector<LeafId> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

// Recursive driver. Invariant of resolve_interval(D, R, O): D is a resolved
// piece, the leaves of D and R together form a subtree of the tree, R holds
// original leaves only, and O are leaves outside that subtree.
class Reconstructor {
 public:
  Reconstructor(TripleSource& source, const Config& cfg)
      : source_(source), cfg_(cfg), n_(source.leaf_count()),
        root_n_(static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_)) - 1e-12))),
        min_witness_(std::max(1, static_cast<int>(std::ceil(cfg.small_fraction * n_ - 1e-9)))) {}

  int run() {
    std::vector<LeafId> all(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) all[static_cast<std::size_t>(i)] = i;
    if (n_ == 1) return forest_.add_leaf(0);
    if (n_ == 2) return forest_.join(forest_.add_leaf(0), forest_.add_leaf(1));
    if (n_ <= cfg_.n0) {
      ++stats_.exhaustive_searches;
      return exhaustive_consistency(source_, forest_, all);
    }
    int base;
    try {
      base = build_subtree(source_, forest_, all, n_, cfg_);
    } catch (ReconstructionFailure& f) {
      f.push_frame("initial base over " + std::to_string(n_) + " leaves");
      throw;
    }
    const auto rest = set_minus(all, forest_.leaves(base));
    return fold(base, resolve_interval(base, rest, {}));
  }

  const Forest& forest() const { return forest_; }
  const Stats& stats() const { return stats_; }

 private:
  int fold(int base, const std::vector<int>& buckets) {
    int root = base;
    for (int b : buckets) root = forest_.join(root, b);
    return root;
  }

  std::vector<int> resolve_interval(int base, const std::vector<LeafId>& rest, const std::vector<LeafId>& outside) {
    try {
      return resolve_interval_impl(base, rest, outside);
    } catch (ReconstructionFailure& f) {
      f.push_frame("interval: base " + std::to_string(forest_.leaves(base).size()) + " leaves, " +
                   std::to_string(rest.size()) + " to place, " + std::to_string(outside.size()) + " outside");
      throw;
    }
  }

  std::vector<int> resolve_interval_impl(int base, const std::vector<LeafId>& rest,
                                         const std::vector<LeafId>& outside) {
    if (rest.empty()) return {};
    if (rest.size() == 1) return {forest_.add_leaf(rest[0])};
    const auto members = forest_.leaves(base);
    const auto wq = static_cast<int>(members.size());
    const auto wi = static_cast<int>(outside.size());
    const bool quotient_ok = wq >= min_witness_;
    const bool induced_ok =
        wi >= min_witness_ && static_cast<double>(members.size() + rest.size()) <= cfg_.large_fraction * n_;
    // Too few leaves left to carve out a pivot strictly inside `rest`.
    const bool tiny = static_cast<int>(rest.size()) < 4 * root_n_;
    if (quotient_ok || induced_ok || tiny) {
      if (wq >= wi) {
        ++stats_.quotient_completions;
        return completion_quotient(source_, forest_, members, rest, n_, cfg_);
      }
      ++stats_.induced_completions;
      return induced_buckets(members.front(), rest, outside);
    }
    return pivot_step(base, members, rest, outside);
  }

  // Induced topology on {rep} + rest, read as buckets along the path from rep.
  std::vector<int> induced_buckets(LeafId rep, const std::vector<LeafId>& rest, const std::vector<LeafId>& outside) {
    std::vector<LeafId> leaves = rest;
    leaves.push_back(rep);
    std::sort(leaves.begin(), leaves.end());
    const int root = completion_induced(source_, forest_, leaves, outside, cfg_);
    std::vector<int> buckets;
    int v = forest_.find_leaf(root, rep);
    while (v != root) {
      const int p = forest_.parent(v);
      buckets.push_back(forest_.child(p, 0) == v ? forest_.child(p, 1) : forest_.child(p, 0));
      v = p;
    }
    return buckets;
  }

  std::vector<int> pivot_step(int base, const std::vector<LeafId>& members, const std::vector<LeafId>& rest,
                              const std::vector<LeafId>& outside) {
    ++stats_.pivots;
    const int pivot = build_subtree(source_, forest_, rest, n_, cfg_);
    const auto pivot_leaves = forest_.leaves(pivot);
    const auto others = set_minus(rest, pivot_leaves);
    auto parts = partition(source_, members, pivot_leaves, others, n_, cfg_);

    const double big = cfg_.large_fraction * n_;
    const int large_parts = (parts.lower.size() > big) + (parts.same.size() + pivot_leaves.size() > big) +
                            (parts.upper.size() > big);
    if (large_parts >= 2) throw ReconstructionFailure("partition", "more than one part exceeds the large fraction");

    if (!parts.lower.empty() || !parts.same.empty()) {
      // The pivot sits inside one bucket: resolve the nearer buckets, then the
      // pivot's bucket with the pivot as its base, then what lies beyond.
      auto bucket_leaves = set_union({&pivot_leaves, &parts.same});
      auto lower = resolve_interval(base, parts.lower, set_union({&outside, &bucket_leaves, &parts.upper}));
      const int grown = fold(base, lower);

      ++stats_.base_switches;
      const int switched = static_cast<int>(pivot_leaves.size());
      stats_.min_switched_base = stats_.min_switched_base == 0 ? switched : std::min(stats_.min_switched_base, switched);
      if (switched < root_n_) stats_.accounting_ok = false;
      auto same =
          resolve_interval(pivot, parts.same, set_union({&outside, &members, &parts.lower, &parts.upper}));
      const int bucket = fold(pivot, same);

      auto upper = resolve_interval(forest_.join(grown, bucket), parts.upper, outside);
      lower.push_back(bucket);
      lower.insert(lower.end(), upper.begin(), upper.end());
      return lower;
    }

    // The pivot is an initial run of buckets; re-resolve it against the base
    // so its buckets come out ordered, then continue past it.
    auto first = resolve_interval(base, pivot_leaves, set_union({&outside, &parts.upper}));
    auto upper = resolve_interval(fold(base, first), parts.upper, outside);
    first.insert(first.end(), upper.begin(), upper.end());
    return first;
  }

  TripleSource& source_;
  const Config& cfg_;
  int n_;
  int root_n_;
  int min_witness_;
  Forest forest_;
  Stats stats_;
};

}  // namespace

TopologyResult reconstruct_topology(TripleSource& source, const Config& cfg) {
  cfg.validate();
  if (source.leaf_count() < 2) throw InvalidArgument("reconstruct_topology: need at least two leaves");
  TopologyResult out;
  Reconstructor r(source, cfg);
  try {
    const int root = r.run();
    out.tree = r.forest().to_tree(root, source);
  } catch (const ReconstructionFailure& f) {
    out.failure_stage = f.stage();
    out.failure_detail = f.detail();
    out.trace = f.trace();
  }
  out.stats = r.stats();
  out.queries = source.distinct_queries();
  return out;
}

}  // namespace ultrarecon::topology
