#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <json.hpp>
#include <numeric>

#include "ultrarecon/error.hpp"
#include "ultrarecon/rng.hpp"
#include "ultrarecon/tree_ops.hpp"
#include "ultrarecon/weights.hpp"

using namespace ultrarecon;
using namespace ultrarecon::weights;

namespace {

std::string leaf_label(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "x%05d", i);
  return buf;
}

// Levels of the halving recursion on m leaves.
int halving_depth(int m) { return m <= 1 ? 0 : std::max(halving_depth(m / 2), halving_depth(m - m / 2)) + 1; }

// Balanced block of m leaves with internal heights top * level / depth.
NodeId balanced_block(TreeBuilder& b, int m, double top, int& next) {
  const int depth = std::max(halving_depth(m), 1);
  std::function<std::pair<NodeId, int>(int)> build = [&](int k) -> std::pair<NodeId, int> {
    if (k == 1) return {b.add_leaf(leaf_label(next++)), 0};
    const auto l = build(k / 2);
    const auto r = build(k - k / 2);
    const int lv = std::max(l.second, r.second) + 1;
    return {b.join(l.first, r.first, top * lv / depth), lv};
  };
  return build(m).first;
}

Tree balanced(int n) {
  TreeBuilder b;
  int next = 0;
  return b.build(balanced_block(b, n, 1.0, next));
}

// Spine of single leaves ending in a balanced block of `tail` leaves whose
// heights stay below `tail_top`.
Tree caterpillar(int n, int tail, double tail_top = 0.3) {
  TreeBuilder b;
  int next = 0;
  NodeId cur = balanced_block(b, tail, tail_top, next);
  const int spine = n - tail;
  for (int i = 1; i <= spine; ++i) cur = b.join(b.add_leaf(leaf_label(next++)), cur, tail_top + (1.0 - tail_top) * i / spine);
  return b.build(cur);
}

// Path of `blocks` balanced left blocks of n/8 leaves, ending in a balanced
// block of the remaining leaves. Every block tops out at `block_top`, so the
// vertices under the path share one height range whichever estimator they get.
Tree comb(int n, int blocks, double block_top) {
  TreeBuilder b;
  int next = 0;
  NodeId cur = balanced_block(b, n - blocks * (n / 8), block_top, next);
  for (int i = 1; i <= blocks; ++i) {
    const NodeId left = balanced_block(b, n / 8, block_top, next);
    cur = b.join(left, cur, block_top + (1.0 - block_top) * i / blocks);
  }
  return b.build(cur);
}

double max_edge_error(const Tree& truth, const HeightEstimates& est) {
  // Topology is the truth itself, so node ids line up.
  double worst = 0.0;
  for (NodeId v = 0; v < static_cast<NodeId>(truth.node_count()); ++v)
    worst = std::max(worst, std::abs(est.vertices[static_cast<std::size_t>(v)].height - truth.height(v)));
  return 2.0 * worst;
}

// Permanent-noise sampler written independently of Oracle; no memo, so it
// scales to n = 10^4.
class KeyedSampler final : public TripleSource {
 public:
  KeyedSampler(const Tree& t, std::uint64_t seed) : tree_(t), lca_(t), seed_(seed) {}
  int leaf_count() const override { return static_cast<int>(tree_.leaf_count()); }
  const std::string& label(LeafId x) const override { return tree_.label(tree_.leaves()[static_cast<std::size_t>(x)]); }
  std::uint64_t distinct_queries() const override { return 0; }
  std::array<double, 3> answer_weights(LeafId a, LeafId b, LeafId c) override {
    std::array<LeafId, 3> s{a, b, c};
    std::sort(s.begin(), s.end());
    const double ab = lca_.distance(s[0], s[1]), bc = lca_.distance(s[1], s[2]), ca = lca_.distance(s[2], s[0]);
    const double tot = 2.0 * (ab + bc + ca);
    const std::uint64_t key = hash_combine(hash_combine(hash_combine(seed_, static_cast<std::uint64_t>(s[0])),
                                                        static_cast<std::uint64_t>(s[1])),
                                           static_cast<std::uint64_t>(s[2]));
    const double u = to_unit(mix64(key));
    // Pair in sorted coordinates.
    std::pair<LeafId, LeafId> hit;
    if (u < (bc + ca) / tot)
      hit = {s[0], s[1]};
    else if (u < (bc + ca + ca + ab) / tot)
      hit = {s[1], s[2]};
    else
      hit = {s[0], s[2]};
    auto is = [&](LeafId x, LeafId y) { return std::minmax(x, y) == std::minmax(hit.first, hit.second); };
    return {is(a, b) ? 1.0 : 0.0, is(b, c) ? 1.0 : 0.0, is(c, a) ? 1.0 : 0.0};
  }

 private:
  const Tree& tree_;
  LcaHeights lca_;
  std::uint64_t seed_;
};

}  // namespace

TEST(HeavyPath, BalancedSixteen) {
  const Tree t = balanced(16);
  const auto hp = classify_heavy(t);
  EXPECT_TRUE(hp.heavy[static_cast<std::size_t>(t.root())]);
  EXPECT_TRUE(hp.heavy[static_cast<std::size_t>(t.child(t.root(), 0))]);
  EXPECT_TRUE(hp.heavy[static_cast<std::size_t>(t.child(t.root(), 1))]);
}

TEST(HeavyPath, CaterpillarLastHeavySpineVertex) {
  for (int n : {12, 30, 61}) {
    const Tree t = caterpillar(n, 2);
    const auto hp = classify_heavy(t);
    int f = 0;
    for (int i = 0; i < static_cast<int>(hp.path.size()); ++i)
      if (t.leaves_below(hp.path[static_cast<std::size_t>(i)]) >= n / 6.0 + 1.0) f = i;
    EXPECT_EQ(hp.f, f);
  }
}

TEST(HeavyPath, TwoLeaves) {
  TreeBuilder b;
  const Tree t = b.build(b.join(b.add_leaf("a"), b.add_leaf("b"), 1.0));
  const auto hp = classify_heavy(t);
  EXPECT_EQ(hp.f, 0);
  ASSERT_EQ(hp.path.size(), 2u);
  EXPECT_EQ(hp.path[0], t.root());
  EXPECT_TRUE(t.is_leaf(hp.path[1]));
}

TEST(HeavyPath, InvariantsOnRandomTrees) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const int n = 8 + static_cast<int>(seed * 7 % 120);
    const Tree t = generate_random_ultrametric(n, 0.005, seed);
    const auto hp = classify_heavy(t);
    const double need = n / 6.0 + 1.0;
    // Path follows the larger child; heavy flags follow the leaf count rule.
    for (std::size_t i = 0; i + 1 < hp.path.size(); ++i) EXPECT_EQ(hp.path[i + 1], t.right_child(hp.path[i]));
    for (NodeId v = 0; v < static_cast<NodeId>(t.node_count()); ++v)
      if (v != t.root()) EXPECT_EQ(static_cast<bool>(hp.heavy[static_cast<std::size_t>(v)]), t.leaves_below(v) >= need);
    EXPECT_GE(t.leaves_below(hp.path[static_cast<std::size_t>(hp.f)]), need - (hp.f == 0 ? n : 0));
    // Anchors are exactly the early path vertices with large left parts.
    std::vector<int> want;
    long total = 0;
    for (int i = 0; i <= hp.f; ++i) {
      const int j = t.leaves_below(t.left_child(hp.path[static_cast<std::size_t>(i)]));
      if (j >= n / (4.0 * (hp.f + 1))) {
        want.push_back(i);
        total += j;
      }
    }
    EXPECT_EQ(hp.anchors, want);
    EXPECT_GT(static_cast<double>(total), n / 4.0);
  }
}

TEST(Inversions, HeightFromProb) {
  EXPECT_NEAR(height_from_prob(1.0 / 3.0), 1.0, 1e-15);
  EXPECT_EQ(height_from_prob(0.5), 0.0);
  EXPECT_NEAR(height_from_prob(0.4), 0.5, 1e-15);
  EXPECT_THROW(height_from_prob(0.0), EstimationFailure);
  EXPECT_THROW(height_from_prob(0.51), EstimationFailure);
}

TEST(Inversions, LeftHeavy) {
  EXPECT_NEAR(reconstruct_left_heavy(1.0 / 3.0, 0.7), 0.7, 1e-15);
  EXPECT_EQ(reconstruct_left_heavy(0.5, 0.7), 0.0);
  EXPECT_THROW(reconstruct_left_heavy(0.2, 0.7), EstimationFailure);
  EXPECT_THROW(reconstruct_left_heavy(0.3, 0.0), EstimationFailure);
}

TEST(Anchoring, ExpectationGivesClosedForm) {
  // v = (a, b) at 0.25 under the anchor at 0.5; five far leaves on the other side.
  TreeBuilder b;
  const NodeId v = b.join(b.add_leaf("a"), b.add_leaf("b"), 0.25);
  NodeId far = b.add_leaf("c0");
  for (int i = 1; i < 5; ++i) far = b.join(far, b.add_leaf("c" + std::to_string(i)), 0.05 * i);
  const NodeId anchor = b.join(v, far, 0.5);
  const Tree t = b.build(b.join(anchor, b.add_leaf("z"), 1.0));
  ExpectationOracle e(t, NoiseModel::homogeneous());
  const std::vector<LeafId> cs{2, 3, 4, 5, 6};
  const auto est = anchor_estimate(e, 0, 1, cs);
  EXPECT_NEAR(est.p_hat, 0.4, 1e-15);
  EXPECT_EQ(est.k, 5);
  EXPECT_TRUE(est.small_k);
  EXPECT_NEAR(reconstruct_left_heavy(est.p_hat, 0.5), 0.25, 1e-15);
}

TEST(Anchoring, SampledMeanIsUnbiased) {
  TreeBuilder b;
  const NodeId v = b.join(b.add_leaf("a"), b.add_leaf("b"), 0.25);
  NodeId far = b.add_leaf("c0");
  for (int i = 1; i < 8; ++i) far = b.join(far, b.add_leaf("c" + std::to_string(i)), 0.05 * i);
  const Tree t = b.build(b.join(b.join(v, far, 0.5), b.add_leaf("z"), 1.0));
  std::vector<LeafId> cs(8);
  std::iota(cs.begin(), cs.end(), 2);
  const int trials = 10000;
  double sum = 0.0;
  for (int s = 0; s < trials; ++s) {
    Oracle o(t, NoiseModel::homogeneous(), static_cast<std::uint64_t>(s) * 7919u);
    sum += anchor_estimate(o, 0, 1, cs).p_hat;
  }
  const double p = 0.4;
  const double sigma = std::sqrt(p * (1 - p) / (8.0 * trials));
  EXPECT_NEAR(sum / trials, p, 3.0 * sigma);
}

TEST(Aggregation, WeightedMean) {
  const std::vector<double> one{0.37};
  const std::vector<int> w1{5};
  EXPECT_EQ(aggregate_anchor_probs(one, w1), 0.37);
  const std::vector<double> ps{0.35, 0.40, 0.45};
  const std::vector<int> eq{2, 2, 2};
  EXPECT_NEAR(aggregate_anchor_probs(ps, eq), 0.4, 1e-15);
  const std::vector<int> ws{1, 2, 3};
  EXPECT_NEAR(aggregate_anchor_probs(ps, ws), (0.35 + 0.8 + 1.35) / 6.0, 1e-15);
  EXPECT_THROW(aggregate_anchor_probs({}, {}), InvalidArgument);
  EXPECT_THROW(aggregate_anchor_probs(ps, w1), InvalidArgument);
}

TEST(Inversions, InvertF) {
  const std::vector<double> b{0.5};
  const std::vector<int> j{1};
  EXPECT_NEAR(invert_F(0.4, b, j).height, 0.25, 1e-11);
  for (double h : {0.1, 0.6, 0.9}) {
    const std::vector<double> bb{h};
    EXPECT_NEAR(invert_F(1.0 / 3.0, bb, j).height, h, 1e-11);
  }
  EXPECT_EQ(anchor_mixture(0.0, b, j), 0.5);
  EXPECT_LT(anchor_mixture(0.1, b, j), 0.5);
  const std::vector<double> bad{0.3, 0.0};
  const std::vector<int> jj{1, 1};
  EXPECT_THROW(invert_F(0.4, bad, jj), InvalidArgument);
  // Out of range clamps to the bracket.
  EXPECT_TRUE(invert_F(0.6, b, j).clamped);
  EXPECT_EQ(invert_F(0.6, b, j).height, 0.0);
}

TEST(Inversions, FStrictlyDecreasingAndResidualSmall) {
  SplitMix64 rng(77);
  for (int t = 0; t < 1000; ++t) {
    const int k = 1 + static_cast<int>(rng.below(6));
    std::vector<double> hs;
    std::vector<int> js;
    for (int i = 0; i < k; ++i) {
      hs.push_back(rng.uniform(0.05, 1.0));
      js.push_back(1 + static_cast<int>(rng.below(50)));
    }
    const double a_max = 4.0 * *std::min_element(hs.begin(), hs.end());
    double prev = anchor_mixture(0.0, hs, js);
    for (int s = 1; s <= 20; ++s) {
      const double cur = anchor_mixture(a_max * s / 20.0, hs, js);
      ASSERT_LT(cur, prev);
      prev = cur;
    }
    const double q = anchor_mixture(rng.uniform(0.0, a_max), hs, js);
    const auto inv = invert_F(q, hs, js);
    EXPECT_LE(inv.residual, 1e-12);
    EXPECT_LE(std::abs(anchor_mixture(inv.height, hs, js) - q), 1e-12);
  }
}

TEST(Inversions, FinalCorrection) {
  const std::vector<double> anchors{0.4, 0.6};
  EXPECT_EQ(final_correction(0.3, anchors), 0.3);
  EXPECT_EQ(final_correction(0.5, anchors), 0.4);
}

TEST(Reconstruction, ExpectationExactOnRandomTrees) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int n = 4 + static_cast<int>(seed * 3 % 61);
    const Tree t = generate_random_ultrametric(n, 0.05, seed);
    ExpectationOracle e(t, NoiseModel::homogeneous());
    const auto est = reconstruct_weights(e, t);
    EXPECT_LE(max_edge_error(t, est), 1e-9) << "n=" << n << " seed=" << seed;
    // Leaves zero, heights non-increasing downwards, edges as differences.
    const Tree w = est.to_tree(t);
    for (NodeId v = 0; v < static_cast<NodeId>(t.node_count()); ++v) {
      const auto& ve = est.vertices[static_cast<std::size_t>(v)];
      if (t.is_leaf(v)) EXPECT_EQ(ve.height, 0.0);
      if (v == t.root()) continue;
      const double hp = est.vertices[static_cast<std::size_t>(t.parent(v))].height;
      EXPECT_LE(ve.height, hp);
      EXPECT_NEAR(w.edge_weight(v), hp - ve.height, 1e-15);
    }
  }
}

TEST(Reconstruction, AggregatePathExactOnCaterpillar) {
  // Leaf-only left children: everything under v_{f+1} goes through the
  // aggregated inversion.
  const Tree t = caterpillar(60, 9);
  ExpectationOracle e(t, NoiseModel::homogeneous());
  const auto est = reconstruct_weights(e, t);
  int aggregate = 0;
  for (const auto& v : est.vertices) {
    aggregate += v.method == "aggregate";
    if (v.method == "aggregate") {
      EXPECT_EQ(v.error_class, ErrorClass::coarse);
      EXPECT_LE(v.residual, 1e-12);
    }
  }
  EXPECT_GT(aggregate, 0);
  EXPECT_LE(max_edge_error(t, est), 1e-9);
}

TEST(Reconstruction, BalancedTreeIsAllFine) {
  const Tree t = balanced(64);
  ExpectationOracle e(t, NoiseModel::homogeneous());
  const auto est = reconstruct_weights(e, t);
  for (NodeId v = 0; v < static_cast<NodeId>(t.node_count()); ++v) {
    if (t.is_leaf(v) || v == t.root()) continue;
    EXPECT_EQ(est.vertices[static_cast<std::size_t>(v)].error_class, ErrorClass::fine) << v;
  }
  EXPECT_LE(max_edge_error(t, est), 1e-9);
}

TEST(Reconstruction, StagesExactInExpectation) {
  const Tree t = generate_random_ultrametric(48, 0.05, 12);
  ExpectationOracle e(t, NoiseModel::homogeneous());
  HeightEstimates light;
  light.vertices.resize(t.node_count());
  compute_light_tree(e, t, light);
  for (NodeId v : t.preorder()) {
    if (t.is_leaf(v) || !t.is_ancestor(t.left_child(t.root()), v)) continue;
    EXPECT_NEAR(light.vertices[static_cast<std::size_t>(v)].height, t.height(v), 1e-12);
  }
  const auto hp = classify_heavy(t);
  HeightEstimates path;
  path.vertices.resize(t.node_count());
  reconstruct_right_path(e, t, hp, path);
  for (int i = 1; i <= hp.f + 1 && i < static_cast<int>(hp.path.size()); ++i) {
    const NodeId v = hp.path[static_cast<std::size_t>(i)];
    if (t.is_leaf(v)) continue;
    EXPECT_NEAR(path.vertices[static_cast<std::size_t>(v)].height, t.height(v), 1e-12);
    // Pairs used: min(|left| |right|, 4n), at least alpha n when heavy.
    const int pairs = path.vertices[static_cast<std::size_t>(v)].samples;
    const long cross = static_cast<long>(t.leaves_below(t.left_child(v))) * t.leaves_below(t.right_child(v));
    EXPECT_EQ(pairs, std::min<long>(cross, 4L * 48));
  }
}

// Mean block-vertex error per class over a few oracles.
static std::pair<double, double> class_errors(const Tree& t, double block_top, int seeds) {
  double fine = 0, coarse = 0;
  int nf = 0, nc = 0;
  for (int seed = 1; seed <= seeds; ++seed) {
    Oracle o(t, NoiseModel::homogeneous(), static_cast<std::uint64_t>(seed));
    const auto est = reconstruct_weights(o, t);
    for (NodeId v = 0; v < static_cast<NodeId>(t.node_count()); ++v) {
      if (t.is_leaf(v) || t.height(v) > block_top) continue;
      const auto& ve = est.vertices[static_cast<std::size_t>(v)];
      const double err = std::abs(ve.height - t.height(v));
      if (ve.error_class == ErrorClass::fine) {
        fine += err;
        ++nf;
      } else if (ve.error_class == ErrorClass::coarse) {
        coarse += err;
        ++nc;
      }
    }
  }
  EXPECT_GT(nf, 0);
  EXPECT_GT(nc, 0);
  return {fine / std::max(nf, 1), coarse / std::max(nc, 1)};
}

TEST(Reconstruction, SampledErrorsTrackClassRates) {
  // Six light left blocks: no path vertex has a heavy left child, so the
  // bottom block goes through the aggregate estimator. All blocks share one
  // height range. The aggregate tends to come out ahead here (its low anchors
  // invert more steeply), so only the per-class rates are asserted.
  std::pair<double, double> prev{1.0, 1.0};
  for (int n : {1024, 4096}) {
    const Tree t = comb(n, 6, 0.3);
    ASSERT_EQ(classify_heavy(t).f, 6);
    const auto [fine, coarse] = class_errors(t, 0.3, 3);
    const double ln = std::log(n);
    EXPECT_LT(fine, std::sqrt(ln / n)) << "n=" << n;
    EXPECT_LT(coarse, ln / std::sqrt(n)) << "n=" << n;
    EXPECT_LT(fine, prev.first);
    EXPECT_LT(coarse, prev.second);
    prev = {fine, coarse};
  }
}

TEST(Reconstruction, SampledLightTreeAtTenThousandLeaves) {
  const int n = 10000;
  const Tree t = generate_random_ultrametric(n, 0.001, 2024);
  KeyedSampler s(t, 31);
  HeightEstimates est;
  est.vertices.resize(t.node_count());
  compute_light_tree(s, t, est);
  const double bound = 12.0 * 4.0 * std::sqrt(std::log(n) / (kHeavyFraction * n));
  int covered = 0, within = 0;
  double worst = 0.0;
  for (NodeId v : t.preorder()) {
    if (t.is_leaf(v) || !t.is_ancestor(t.left_child(t.root()), v)) continue;
    const double err = std::abs(est.vertices[static_cast<std::size_t>(v)].height - t.height(v));
    ++covered;
    within += err <= bound;
    worst = std::max(worst, err);
  }
  ASSERT_GT(covered, 0);
  EXPECT_GE(within, 0.99 * covered);
  RecordProperty("max_error", std::to_string(worst));
}

TEST(Reconstruction, RejectsMismatchedLabels) {
  ExpectationOracle e(generate_random_ultrametric(10, 0.05, 1), NoiseModel::homogeneous());
  EXPECT_THROW(reconstruct_weights(e, caterpillar(10, 2)), InvalidArgument);
}

TEST(Sidecar, JsonListsEveryVertex) {
  const Tree t = generate_random_ultrametric(20, 0.05, 3);
  ExpectationOracle e(t, NoiseModel::homogeneous());
  const auto est = reconstruct_weights(e, t);
  const auto j = nlohmann::json::parse(estimates_json(t, est));
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_EQ(j["vertices"].size(), t.node_count());
  for (const auto& v : j["vertices"]) {
    EXPECT_TRUE(v.contains("class"));
    EXPECT_TRUE(v.contains("height"));
    EXPECT_TRUE(v.contains("method"));
  }
}
