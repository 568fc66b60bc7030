#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "brute.hpp"
#include "ultrarecon/error.hpp"
#include "ultrarecon/rng.hpp"
#include "ultrarecon/topology.hpp"
#include "ultrarecon/tree_ops.hpp"

using namespace ultrarecon;
using namespace ultrarecon::topology;

namespace {

Config noiseless_cfg() {
  Config c;
  c.c_thr = 0.25;
  return c;
}

std::vector<LeafId> ids(const Tree& t, NodeId v) {
  std::vector<LeafId> out;
  for (NodeId x : t.leaf_set(v)) out.push_back(t.leaf_rank(x));
  return out;
}

std::vector<std::string> labels(const Tree& t, std::span<const LeafId> xs) {
  std::vector<std::string> out;
  for (LeafId x : xs) out.push_back(t.label(t.leaves()[static_cast<std::size_t>(x)]));
  return out;
}

std::vector<LeafId> complement(int n, std::span<const LeafId> xs) {
  std::vector<char> in(static_cast<std::size_t>(n), 0);
  for (LeafId x : xs) in[static_cast<std::size_t>(x)] = 1;
  std::vector<LeafId> out;
  for (LeafId x = 0; x < n; ++x)
    if (!in[static_cast<std::size_t>(x)]) out.push_back(x);
  return out;
}

// Piece of the forest against the truth restricted to the same leaves.
bool piece_matches(const Forest& f, int root, const TripleSource& src, const Tree& truth) {
  const Tree got = f.to_tree(root, src);
  const auto ls = f.leaves(root);
  if (ls.size() < 3) return true;
  const Tree want = induced_topology(truth, labels(truth, ls));
  return brute::same_topology(got, want) && topology_equal(got, want);
}

}  // namespace

TEST(CompareSums, Verdicts) {
  Config c;
  EXPECT_EQ(compare_sums(100, 100, 100, c).outcome, Outcome::tie);
  const auto v = compare_sums(700, 100, 100, c);
  EXPECT_EQ(v.outcome, Outcome::left);
  EXPECT_NEAR(v.threshold, 24.0 * std::sqrt(100.0 * std::log(100.0)), 1e-9);
  EXPECT_NEAR(v.threshold, 515.03, 0.01);
  EXPECT_EQ(compare_sums(100, 700, 100, c).outcome, Outcome::right);
  EXPECT_THROW(compare_sums(-1, 0, 10, c), InvalidArgument);
}

TEST(CompareSums, OutcomeMatchesMarginAgainstThreshold) {
  Config c;
  c.c_thr = 1.0;
  SplitMix64 rng(5);
  for (int i = 0; i < 2000; ++i) {
    const double x = rng.uniform(0, 200), y = rng.uniform(0, 200);
    const auto v = compare_sums(x, y, 50, c);
    const Outcome want = x - y > v.threshold ? Outcome::left : (y - x > v.threshold ? Outcome::right : Outcome::tie);
    EXPECT_EQ(v.outcome, want);
    const auto w = compare_sums(y, x, 50, c);
    EXPECT_EQ(w.outcome, want == Outcome::left ? Outcome::right : want == Outcome::right ? Outcome::left : Outcome::tie);
  }
}

TEST(ConfigCheck, RejectsBadFractions) {
  Config c;
  c.small_fraction = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  Config d;
  d.large_fraction = 1.5;
  EXPECT_THROW(d.validate(), InvalidArgument);
  EXPECT_NO_THROW(Config{}.validate());
}

TEST(SiblingScores, NoiselessSiblingScoreIsWitnessCount) {
  const Tree t = generate_random_ultrametric(20, 0.02, 3);
  Oracle o(t, NoiseModel::noiseless(), 1);
  // A cherry of the truth as two singleton parts among other singletons.
  NodeId cherry = kNoNode;
  for (NodeId v : t.postorder())
    if (!t.is_leaf(v) && t.is_leaf(t.child(v, 0)) && t.is_leaf(t.child(v, 1))) cherry = v;
  ASSERT_NE(cherry, kNoNode);
  const LeafId a = t.leaf_rank(t.child(cherry, 0)), b = t.leaf_rank(t.child(cherry, 1));
  std::vector<std::vector<LeafId>> parts{{a}, {b}};
  for (LeafId x = 0; x < 20 && parts.size() < 6; ++x)
    if (x != a && x != b) parts.push_back({x});
  std::vector<LeafId> ambient(20);
  std::iota(ambient.begin(), ambient.end(), 0);
  const auto s = sibling_scores(o, parts, ambient);
  EXPECT_EQ(s.score(0, 1), 18.0);
  EXPECT_EQ(s.witnesses(0, 1), 18.0);
  EXPECT_EQ(s.score(0, 1), s.score(1, 0));
}

TEST(SiblingScores, ExpectationEqualsFormulaSum) {
  const Tree t = generate_random_ultrametric(14, 0.02, 8);
  const auto m = brute::distances(t);
  ExpectationOracle e(t, NoiseModel::homogeneous());
  std::vector<std::vector<LeafId>> parts{{0, 1}, {2}, {5, 6, 7}};
  std::vector<LeafId> ambient(14);
  std::iota(ambient.begin(), ambient.end(), 0);
  const auto s = sibling_scores(e, parts, ambient);
  // Representatives are the smallest leaves 0, 2, 5.
  auto expect = [&](std::size_t a, std::size_t b, const std::set<LeafId>& skip) {
    double sum = 0.0;
    for (LeafId x = 0; x < 14; ++x) {
      if (skip.count(x)) continue;
      const auto c = static_cast<std::size_t>(x);
      const double ab = m.d[a][b], bc = m.d[b][c], ca = m.d[c][a];
      sum += (bc + ca) / (2.0 * (ab + bc + ca));
    }
    return sum;
  };
  EXPECT_NEAR(s.score(0, 1), expect(0, 2, {0, 1, 2}), 1e-12);
  EXPECT_NEAR(s.score(0, 2), expect(0, 5, {0, 1, 5, 6, 7}), 1e-12);
  EXPECT_NEAR(s.score(1, 2), expect(2, 5, {2, 5, 6, 7}), 1e-12);
}

TEST(BuildSubtree, NoiselessPieceIsSubtreeOfInducedTopology) {
  for (int n : {16, 40, 100, 128}) {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      const Tree t = generate_random_ultrametric(n, 0.01, seed);
      Oracle o(t, NoiseModel::noiseless(), seed);
      SplitMix64 rng(seed);
      std::vector<LeafId> s;
      for (LeafId x = 0; x < n; ++x)
        if (rng.below(4) != 0 || static_cast<int>(s.size()) < n / 2) s.push_back(x);
      Forest f;
      const int piece = build_subtree(o, f, s, n, noiseless_cfg());
      const auto got = f.leaves(piece);
      const int k = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
      EXPECT_GE(static_cast<int>(got.size()), k);
      EXPECT_LE(static_cast<int>(got.size()), 2 * k);
      const Tree ts = induced_topology(t, labels(t, s));
      const auto lbl = labels(t, got);
      EXPECT_TRUE(brute::is_clade(brute::distances(ts), std::set<std::string>(lbl.begin(), lbl.end())));
      EXPECT_TRUE(piece_matches(f, piece, o, t));
    }
  }
}

TEST(BuildSubtree, SixteenLeavesGivesFourToEight) {
  const Tree t = generate_random_ultrametric(16, 0.02, 1);
  Oracle o(t, NoiseModel::noiseless(), 1);
  std::vector<LeafId> s(16);
  std::iota(s.begin(), s.end(), 0);
  Forest f;
  const auto size = f.leaves(build_subtree(o, f, s, 16, noiseless_cfg())).size();
  EXPECT_GE(size, 4u);
  EXPECT_LE(size, 8u);
}

TEST(BuildSubtree, TooFewLeavesFails) {
  const Tree t = generate_random_ultrametric(100, 0.01, 1);
  Oracle o(t, NoiseModel::noiseless(), 1);
  std::vector<LeafId> s{1, 2, 3};
  Forest f;
  EXPECT_THROW(build_subtree(o, f, s, 100, noiseless_cfg()), ReconstructionFailure);
}

TEST(Partition, NoiselessMatchesBucketOrder) {
  for (int n : {12, 24, 48, 64}) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      const Tree t = generate_random_ultrametric(n, 0.01, seed);
      const auto m = brute::distances(t);
      Oracle o(t, NoiseModel::noiseless(), seed);
      // Base: a smallish subtree; pivot: a subtree outside it.
      for (NodeId bv : t.preorder()) {
        if (t.is_leaf(bv) || bv == t.root() || t.leaves_below(bv) * 3 > n) continue;
        const auto base = ids(t, bv);
        for (NodeId pv : t.preorder()) {
          if (pv == t.root() || t.is_ancestor(pv, bv) || t.is_ancestor(bv, pv)) continue;
          const auto pivot = ids(t, pv);
          std::vector<LeafId> used = base;
          used.insert(used.end(), pivot.begin(), pivot.end());
          const auto cand = complement(n, used);
          const auto r = partition(o, base, pivot, cand, n, noiseless_cfg());
          const std::size_t a = static_cast<std::size_t>(base.front());
          const double dp = m.d[a][static_cast<std::size_t>(pivot.front())];
          std::vector<LeafId> lo, same, hi;
          for (LeafId x : cand) {
            const double dx = m.d[a][static_cast<std::size_t>(x)];
            (dx < dp - 1e-9 ? lo : dx <= dp + 1e-9 ? same : hi).push_back(x);
          }
          EXPECT_EQ(r.lower, lo);
          EXPECT_EQ(r.same, same);
          EXPECT_EQ(r.upper, hi);
          break;
        }
        break;
      }
    }
  }
}

TEST(Partition, ExpectationTiesInsidePivotBucket) {
  const Tree t = generate_random_ultrametric(40, 0.02, 4);
  ExpectationOracle e(t, NoiseModel::homogeneous());
  Config c;
  c.c_thr = 1e-9;  // any nonzero margin would leave the tie
  const NodeId bv = t.left_child(t.root());
  const NodeId rc = t.right_child(t.root());
  const auto base = ids(t, bv);
  const auto pivot = ids(t, t.left_child(rc));
  const auto same = ids(t, t.right_child(rc));
  const auto r = partition(e, base, pivot, same, 40, c);
  EXPECT_EQ(r.same, same);
  EXPECT_TRUE(r.lower.empty());
  EXPECT_TRUE(r.upper.empty());
}

TEST(CompletionQuotient, NoiselessRecoversBucketsAndTheirTopology) {
  for (int n : {10, 24, 48, 64}) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      const Tree t = generate_random_ultrametric(n, 0.01, seed);
      const auto m = brute::distances(t);
      Oracle o(t, NoiseModel::noiseless(), seed);
      NodeId bv = t.root();
      while (t.leaves_below(bv) > std::max(2, n / 4)) bv = t.right_child(bv);
      const auto base = ids(t, bv);
      const auto rest = complement(n, base);
      Forest f;
      const auto pieces = completion_quotient(o, f, base, rest, n, noiseless_cfg());
      const auto lbl = labels(t, base);
      const auto want = brute::buckets(m, std::set<std::string>(lbl.begin(), lbl.end()));
      ASSERT_EQ(pieces.size(), want.size());
      for (std::size_t i = 0; i < pieces.size(); ++i) {
        auto got = labels(t, f.leaves(pieces[i]));
        std::sort(got.begin(), got.end());
        EXPECT_EQ(got, want[i]);
        EXPECT_TRUE(piece_matches(f, pieces[i], o, t));
      }
    }
  }
}

TEST(CompletionInduced, NoiselessExactAndTrivialCherry) {
  for (int n : {8, 20, 32, 64}) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      const Tree t = generate_random_ultrametric(n, 0.01, seed);
      Oracle o(t, NoiseModel::noiseless(), seed);
      for (NodeId v : t.preorder()) {
        if (v == t.root() || t.is_leaf(v)) continue;
        const auto in = ids(t, v);
        Forest f;
        const int root = completion_induced(o, f, in, complement(n, in), noiseless_cfg());
        EXPECT_TRUE(piece_matches(f, root, o, t));
      }
    }
  }
  const Tree t = generate_random_ultrametric(10, 0.02, 2);
  Oracle o(t, NoiseModel::noiseless(), 2);
  Forest f;
  const std::vector<LeafId> two{3, 7};
  const int root = completion_induced(o, f, two, {}, noiseless_cfg());
  EXPECT_EQ(f.leaves(root), two);
  EXPECT_EQ(o.distinct_queries(), 0u);
}

TEST(AssembleFromTriples, GroundTruthAnswers) {
  for (int n : {3, 9, 40, 128}) {
    const Tree t = generate_random_ultrametric(n, 0.005, static_cast<std::uint64_t>(n));
    const auto m = brute::distances(t);
    std::vector<LeafId> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    Forest f;
    const int root = assemble_from_triples(f, all, [&](LeafId a, LeafId b, LeafId c) {
      return brute::closest(m, static_cast<std::size_t>(a), static_cast<std::size_t>(b), static_cast<std::size_t>(c));
    });
    Oracle o(t, NoiseModel::noiseless(), 0);
    EXPECT_TRUE(topology_equal(f.to_tree(root, o), t));
  }
}

TEST(AssembleFromTriples, FlippedTripleIsReported) {
  TreeBuilder b;
  const NodeId ab = b.join(b.add_leaf("a"), b.add_leaf("b"), 0.5);
  const NodeId cd = b.join(b.add_leaf("c"), b.add_leaf("d"), 0.5);
  const Tree t = b.build(b.join(ab, cd, 1.0));
  const auto m = brute::distances(t);
  std::vector<LeafId> all{0, 1, 2, 3};
  int conflicts = 0;
  for (int flip = 0; flip < 4; ++flip) {
    // Triple number `flip` in lexicographic order gets a wrong answer.
    int idx = 0;
    auto closest = [&](LeafId x, LeafId y, LeafId z) {
      std::array<LeafId, 3> s{x, y, z};
      std::sort(s.begin(), s.end());
      const int sorted_index = s[0] == 0 ? (s[1] == 1 ? (s[2] == 2 ? 0 : 1) : 2) : 3;
      const int truth = brute::closest(m, static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                                       static_cast<std::size_t>(z));
      ++idx;
      return sorted_index == flip ? (truth + 1) % 3 : truth;
    };
    Forest f;
    try {
      assemble_from_triples(f, all, closest);
    } catch (const ReconstructionFailure& e) {
      ++conflicts;
      EXPECT_NE(std::string(e.what()).find("contradicted"), std::string::npos);
    }
  }
  EXPECT_EQ(conflicts, 4);
}

TEST(Exhaustive, NoiselessExactForSmallSets) {
  for (int n : {3, 5, 8, 10, 12}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Tree t = generate_random_ultrametric(n, 0.02, seed);
      Oracle o(t, NoiseModel::noiseless(), seed);
      std::vector<LeafId> all(static_cast<std::size_t>(n));
      std::iota(all.begin(), all.end(), 0);
      Forest f;
      EXPECT_TRUE(topology_equal(f.to_tree(exhaustive_consistency(o, f, all), o), t));
    }
  }
}

TEST(Reconstruct, TwoLeavesNeedNoQueries) {
  const Tree t = generate_random_ultrametric(2, 0.1, 0);
  Oracle o(t, NoiseModel::homogeneous(), 0);
  const auto r = reconstruct_topology(o, Config{});
  ASSERT_TRUE(r.ok());
  EXPECT_TRUE(topology_equal(*r.tree, t));
  EXPECT_EQ(r.queries, 0u);
}

TEST(Reconstruct, NoiselessSweepIsExact) {
  for (int n : {3, 8, 13, 32, 64}) {
    for (std::uint64_t seed = 0; seed < 15; ++seed) {
      const Tree t = generate_random_ultrametric(n, 0.01, seed);
      Oracle o(t, NoiseModel::noiseless(), seed);
      const auto r = reconstruct_topology(o, noiseless_cfg());
      ASSERT_TRUE(r.ok()) << r.failure_stage << ": " << r.failure_detail;
      EXPECT_TRUE(topology_equal(*r.tree, t)) << "n=" << n << " seed=" << seed;
      EXPECT_TRUE(r.stats.accounting_ok);
      EXPECT_LE(r.queries, choose3(static_cast<std::uint64_t>(n)));
    }
  }
}

TEST(Reconstruct, PivotPathAtLargerN) {
  const Tree t = generate_random_ultrametric(256, 0.01, 1);
  Oracle o(t, NoiseModel::noiseless(), 1);
  const auto r = reconstruct_topology(o, noiseless_cfg());
  ASSERT_TRUE(r.ok()) << r.failure_detail;
  EXPECT_TRUE(topology_equal(*r.tree, t));
  EXPECT_GE(r.stats.pivots, 1);
  EXPECT_TRUE(r.stats.accounting_ok);
  if (r.stats.base_switches > 0)
    EXPECT_GE(r.stats.min_switched_base, static_cast<int>(std::ceil(std::sqrt(256.0))));
}

TEST(Reconstruct, RerunOnSameOracleIsIdentical) {
  const Tree t = generate_random_ultrametric(64, 0.05, 3);
  Oracle o(t, NoiseModel::homogeneous(), 3);
  Config c;
  c.c_thr = 1.0;
  const auto a = reconstruct_topology(o, c);
  const auto q = o.distinct_queries();
  const auto b = reconstruct_topology(o, c);
  EXPECT_EQ(a.ok(), b.ok());
  if (a.ok()) EXPECT_EQ(canonical_topology(*a.tree), canonical_topology(*b.tree));
  EXPECT_EQ(a.failure_detail, b.failure_detail);
  EXPECT_EQ(o.distinct_queries(), q);  // nothing new was asked
}

TEST(Reconstruct, NoisyFailureIsReportedNotThrown) {
  const Tree t = generate_random_ultrametric(128, 0.02, 2);
  Oracle o(t, NoiseModel::homogeneous(), 2);
  const auto r = reconstruct_topology(o, Config{});
  if (!r.ok()) {
    EXPECT_FALSE(r.failure_stage.empty());
    EXPECT_FALSE(r.trace.empty());
  }
  EXPECT_LE(r.queries, choose3(128));
}
