#include "ultrarecon/noise.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ultrarecon/error.hpp"
#include "ultrarecon/rng.hpp"

namespace ultrarecon {

double p_correct_homogeneous(double d1, double d2) {
  if (!(d2 > 0.0) || d1 < 0.0 || d1 > d2) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "p_correct_homogeneous: need 0 <= d1 <= d2, d2 > 0 (d1=%.17g, d2=%.17g)", d1, d2);
    throw InvalidArgument(buf);
  }
  return d2 / (d1 + 2.0 * d2);
}

NoiseModel NoiseModel::homogeneous() {
  return NoiseModel(Kind::homogeneous, p_correct_homogeneous, 1.0 / 6.0, "homogeneous");
}

NoiseModel NoiseModel::noiseless() {
  return NoiseModel(
      Kind::noiseless, [](double d1, double d2) { return d1 < d2 ? 1.0 : 1.0 / 3.0; }, 0.0, "noiseless");
}

NoiseModel NoiseModel::custom(Law p_correct, double epsilon, std::string name) {
  if (!p_correct) throw InvalidArgument("custom noise model: empty law");
  if (!(epsilon > 0.0)) throw InvalidArgument("custom noise model: epsilon must be positive");
  constexpr int kGrid = 20;
  constexpr double kMax = 2.0;
  const double step = kMax / (kGrid + 1);
  const double h = step * 1e-3;
  char buf[200];
  for (int i = 1; i <= kGrid; ++i) {
    for (int j = 1; j <= kGrid; ++j) {
      const double d1 = i * step;
      const double d2 = j * step;
      if (!(d1 < d2)) continue;
      const double p = p_correct(d1, d2);
      if (!(p >= 1.0 / 3.0 - 1e-12 && p <= 1.0 + 1e-12)) {
        std::snprintf(buf, sizeof buf, "custom noise model: p_correct(%.6g, %.6g) = %.6g outside [1/3, 1]", d1, d2, p);
        throw InvalidArgument(buf);
      }
      const double lo = std::max(d1 - h, 0.0);
      const double hi = std::min(d1 + h, d2);
      const double slope = (p_correct(hi, d2) - p_correct(lo, d2)) / (hi - lo);
      if (slope > -epsilon * (1.0 - 1e-6)) {
        std::snprintf(buf, sizeof buf, "custom noise model: dp/dd1 = %.6g at (%.6g, %.6g) exceeds -epsilon = %.6g",
                      slope, d1, d2, -epsilon);
        throw InvalidArgument(buf);
      }
    }
  }
  return NoiseModel(Kind::custom, std::move(p_correct), epsilon, std::move(name));
}

double NoiseModel::p_correct(double d1, double d2) const { return law_(d1, d2); }

std::array<double, 3> NoiseModel::distribution(double d_ab, double d_bc, double d_ca) const {
  if (kind_ == Kind::homogeneous) {
    const double total = 2.0 * (d_ab + d_bc + d_ca);
    if (!(total > 0.0)) throw InvalidArgument("distribution: all distances are zero");
    return {(d_bc + d_ca) / total, (d_ab + d_ca) / total, (d_ab + d_bc) / total};
  }
  int closest;
  if (d_ab < d_bc && d_ab < d_ca) {
    closest = 0;
  } else if (d_bc < d_ab && d_bc < d_ca) {
    closest = 1;
  } else if (d_ca < d_ab && d_ca < d_bc) {
    closest = 2;
  } else {
    return {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  }
  const double d1 = std::array{d_ab, d_bc, d_ca}[static_cast<std::size_t>(closest)];
  const double d2 = std::max({d_ab, d_bc, d_ca});
  const double pc = kind_ == Kind::noiseless ? 1.0 : law_(d1, d2);
  const double pi = 0.5 * (1.0 - pc);
  std::array<double, 3> out{pi, pi, pi};
  out[static_cast<std::size_t>(closest)] = pc;
  return out;
}

std::array<double, 3> triple_distribution(const Tree& tree, const NoiseModel& model, NodeId a, NodeId b, NodeId c) {
  for (NodeId v : {a, b, c}) {
    if (v < 0 || static_cast<std::size_t>(v) >= tree.node_count() || !tree.is_leaf(v))
      throw InvalidArgument("triple_distribution: node " + std::to_string(v) + " is not a leaf");
  }
  if (a == b || b == c || a == c) throw InvalidArgument("triple_distribution: leaves must be distinct");
  const double d_ab = 2.0 * tree.height(tree.lca(a, b));
  const double d_bc = 2.0 * tree.height(tree.lca(b, c));
  const double d_ca = 2.0 * tree.height(tree.lca(c, a));
  return model.distribution(d_ab, d_bc, d_ca);
}

std::array<double, 3> expectation_query(const Tree& tree, const NoiseModel& model, NodeId a, NodeId b, NodeId c) {
  return triple_distribution(tree, model, a, b, c);
}

LcaHeights::LcaHeights(const Tree& tree) {
  node_height_.resize(tree.node_count());
  for (std::size_t v = 0; v < tree.node_count(); ++v) node_height_[v] = tree.height(static_cast<NodeId>(v));
  first_.assign(tree.leaf_count(), -1);
  euler_.reserve(2 * tree.node_count());
  // Iterative Euler tour: a node is emitted on entry and after each child.
  std::vector<std::pair<NodeId, int>> stack{{tree.root(), 0}};
  while (!stack.empty()) {
    auto& [v, next] = stack.back();
    const NodeId node = v;
    euler_.push_back(node);
    euler_depth_.push_back(tree.depth(node));
    if (tree.is_leaf(node)) {
      first_[static_cast<std::size_t>(tree.leaf_rank(node))] = static_cast<int>(euler_.size() - 1);
      stack.pop_back();
      continue;
    }
    if (next == 2) {
      stack.pop_back();
      continue;
    }
    const NodeId c = tree.child(node, next);
    ++next;
    stack.push_back({c, 0});
  }
  const std::size_t m = euler_.size();
  log2_.assign(m + 1, 0);
  for (std::size_t i = 2; i <= m; ++i) log2_[i] = log2_[i / 2] + 1;
  table_.push_back(std::vector<int>(m));
  for (std::size_t i = 0; i < m; ++i) table_[0][i] = static_cast<int>(i);
  for (int k = 1; (std::size_t{1} << k) <= m; ++k) {
    const std::size_t len = m - (std::size_t{1} << k) + 1;
    std::vector<int> row(len);
    const auto& prev = table_.back();
    const std::size_t half = std::size_t{1} << (k - 1);
    for (std::size_t i = 0; i < len; ++i) {
      const int x = prev[i];
      const int y = prev[i + half];
      row[i] = euler_depth_[static_cast<std::size_t>(x)] <= euler_depth_[static_cast<std::size_t>(y)] ? x : y;
    }
    table_.push_back(std::move(row));
  }
}

double LcaHeights::operator()(LeafId a, LeafId b) const {
  std::size_t l = static_cast<std::size_t>(first_.at(static_cast<std::size_t>(a)));
  std::size_t r = static_cast<std::size_t>(first_.at(static_cast<std::size_t>(b)));
  if (l > r) std::swap(l, r);
  const int k = log2_[r - l + 1];
  const int x = table_[static_cast<std::size_t>(k)][l];
  const int y = table_[static_cast<std::size_t>(k)][r - (std::size_t{1} << k) + 1];
  const int best = euler_depth_[static_cast<std::size_t>(x)] <= euler_depth_[static_cast<std::size_t>(y)] ? x : y;
  return node_height_[static_cast<std::size_t>(euler_[static_cast<std::size_t>(best)])];
}

namespace {

constexpr std::uint64_t kPackedLimitBits = std::uint64_t{1} << 28;

void check_triple(int n, LeafId a, LeafId b, LeafId c) {
  if (a < 0 || b < 0 || c < 0 || a >= n || b >= n || c >= n) throw InvalidArgument("query: leaf id out of range");
  if (a == b || b == c || a == c) throw InvalidArgument("query: leaves must be distinct");
}

}  // namespace

QueryMemo::QueryMemo(int n) {
  const std::uint64_t total = choose3(static_cast<std::uint64_t>(std::max(n, 0)));
  packed_ = total <= kPackedLimitBits;
  if (packed_) bits_.assign(static_cast<std::size_t>((total + 7) / 8), 0);
}

bool QueryMemo::record(LeafId a, LeafId b, LeafId c) {
  std::array<LeafId, 3> s{a, b, c};
  std::sort(s.begin(), s.end());
  const std::uint64_t idx =
      triple_index(static_cast<std::uint64_t>(s[0]), static_cast<std::uint64_t>(s[1]), static_cast<std::uint64_t>(s[2]));
  bool fresh;
  if (packed_) {
    std::uint8_t& byte = bits_[static_cast<std::size_t>(idx >> 3)];
    const auto bit = static_cast<std::uint8_t>(1u << (idx & 7));
    fresh = !(byte & bit);
    byte |= bit;
  } else {
    fresh = set_.insert(idx).second;
  }
  distinct_ += fresh;
  return fresh;
}

Oracle::Oracle(Tree tree, NoiseModel model, std::uint64_t seed)
    : tree_(std::move(tree)), model_(std::move(model)), seed_(seed), lca_(tree_),
      memo_(static_cast<int>(tree_.leaf_count())) {}

const std::string& Oracle::label(LeafId x) const { return tree_.label(tree_.leaves()[static_cast<std::size_t>(x)]); }

TripleAnswer Oracle::query(LeafId a, LeafId b, LeafId c) {
  check_triple(leaf_count(), a, b, c);
  std::array<LeafId, 3> s{a, b, c};
  std::sort(s.begin(), s.end());
  const auto i = static_cast<std::uint64_t>(s[0]);
  const auto j = static_cast<std::uint64_t>(s[1]);
  const auto k = static_cast<std::uint64_t>(s[2]);
  memo_.record(a, b, c);

  const auto p = model_.distribution(lca_.distance(s[0], s[1]), lca_.distance(s[1], s[2]), lca_.distance(s[2], s[0]));
  const double u = to_unit(mix64(hash_combine(hash_combine(hash_combine(seed_, i), j), k)));
  LeafId x, y;  // the returned pair
  if (u < p[0]) {
    x = s[0], y = s[1];
  } else if (u < p[0] + p[1]) {
    x = s[1], y = s[2];
  } else {
    x = s[2], y = s[0];
  }
  auto is = [&](LeafId p1, LeafId p2) { return (x == p1 && y == p2) || (x == p2 && y == p1); };
  if (is(a, b)) return TripleAnswer::ab;
  if (is(b, c)) return TripleAnswer::bc;
  return TripleAnswer::ca;
}

TripleAnswer Oracle::query(const std::string& a, const std::string& b, const std::string& c) {
  return query(tree_.leaf_rank(tree_.leaf(a)), tree_.leaf_rank(tree_.leaf(b)), tree_.leaf_rank(tree_.leaf(c)));
}

std::array<double, 3> Oracle::answer_weights(LeafId a, LeafId b, LeafId c) {
  std::array<double, 3> w{0.0, 0.0, 0.0};
  w[static_cast<std::size_t>(query(a, b, c))] = 1.0;
  return w;
}

ExpectationOracle::ExpectationOracle(Tree tree, NoiseModel model)
    : tree_(std::move(tree)), model_(std::move(model)), lca_(tree_), memo_(static_cast<int>(tree_.leaf_count())) {}

const std::string& ExpectationOracle::label(LeafId x) const {
  return tree_.label(tree_.leaves()[static_cast<std::size_t>(x)]);
}

std::array<double, 3> ExpectationOracle::answer_weights(LeafId a, LeafId b, LeafId c) {
  check_triple(leaf_count(), a, b, c);
  memo_.record(a, b, c);
  return model_.distribution(lca_.distance(a, b), lca_.distance(b, c), lca_.distance(c, a));
}

}  // namespace ultrarecon
