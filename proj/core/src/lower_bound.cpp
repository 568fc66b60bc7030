#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include <json.hpp>

#include "ultrarecon/error.hpp"
#include "ultrarecon/rng.hpp"
#include "ultrarecon/statistics.hpp"
#include "ultrarecon/tree_ops.hpp"

namespace ultrarecon::stats {
namespace {

constexpr double kCherryEdge = 1.0 / 3.0;
constexpr double kArithmeticTol = 1e-12;

std::string base_label(int i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "x%0*d", width, i);
  return buf;
}

struct Base {
  TreeBuilder tb;
  NodeId root = kNoNode;
  double min_edge = 1.0;  // smallest edge inside B or from the root to B
};

Base build_base(int m, BaseShape shape, std::uint64_t seed, double min_edge) {
  Base out;
  const int width = std::max(1, static_cast<int>(std::to_string(m - 1).size()));
  if (m == 1) {
    out.root = out.tb.add_leaf(base_label(0, width));
    return out;
  }
  if (shape == BaseShape::random) {
    // B sits at height 2/3, so its generated edges are scaled by 2/3.
    const double w = std::max(1.5 * min_edge, 1.0 / (4.0 * m));
    const Tree gen = generate_random_ultrametric(m, w, seed);
    TreeBuilder& tb = out.tb;
    std::function<NodeId(NodeId)> copy = [&](NodeId v) -> NodeId {
      if (gen.is_leaf(v)) return tb.add_leaf(base_label(gen.leaf_rank(v), width));
      const NodeId l = copy(gen.child(v, 0));
      const NodeId r = copy(gen.child(v, 1));
      return tb.join(l, r, gen.height(v) * (2.0 / 3.0));
    };
    out.root = copy(gen.root());
    out.min_edge = std::min(w * 2.0 / 3.0, 1.0 / 3.0);
    return out;
  }
  // Balanced: internal heights are level / (L + 1) with L the level of B's root.
  std::vector<NodeId> leaves;
  for (int i = 0; i < m; ++i) leaves.push_back(out.tb.add_leaf(base_label(i, width)));
  std::function<int(int, int)> depth = [&](int lo, int hi) -> int {
    if (hi - lo == 1) return 0;
    const int mid = lo + (hi - lo + 1) / 2;
    return std::max(depth(lo, mid), depth(mid, hi)) + 1;
  };
  const int top = depth(0, m);
  const double unit = 1.0 / (top + 1);
  std::function<std::pair<NodeId, int>(int, int)> build = [&](int lo, int hi) -> std::pair<NodeId, int> {
    if (hi - lo == 1) return {leaves[static_cast<std::size_t>(lo)], 0};
    const int mid = lo + (hi - lo + 1) / 2;
    const auto l = build(lo, mid);
    const auto r = build(mid, hi);
    const int level = std::max(l.second, r.second) + 1;
    return {out.tb.join(l.first, r.first, level * unit), level};
  };
  out.root = build(0, m).first;
  out.min_edge = unit;
  return out;
}

}  // namespace

LowerBoundPair build_lower_bound_pair(int n, double rho, BaseShape shape, std::uint64_t seed, bool allow_zero_rho) {
  if (n < 4) throw InvalidArgument("build_lower_bound_pair: need n >= 4");
  if (rho < 0.0 || rho > 0.01 + 1e-15 || (rho == 0.0 && !allow_zero_rho)) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "build_lower_bound_pair: rho = %.6g outside (0, 1/100]%s", rho,
                  rho == 0.0 ? " (pass the zero-weight override to allow rho = 0)" : "");
    throw InfeasibleError(buf);
  }
  const double inner = rho / std::sqrt(static_cast<double>(n));
  const double h_q = kCherryEdge + inner;
  if (!(1.0 - h_q >= inner)) throw InfeasibleError("build_lower_bound_pair: right subtree does not fit under height 1");

  const std::string la = "a", lb = "b", lc = "c";
  auto make = [&](bool first) {
    Base base = build_base(n - 3, shape, seed, inner);
    if (base.min_edge < inner) throw InfeasibleError("build_lower_bound_pair: shared subtree has an edge below rho/sqrt(n)");
    TreeBuilder& tb = base.tb;
    const NodeId a = tb.add_leaf(la);
    const NodeId b = tb.add_leaf(lb);
    const NodeId c = tb.add_leaf(lc);
    const NodeId cherry = first ? tb.join(a, b, kCherryEdge) : tb.join(a, c, kCherryEdge);
    const NodeId side = first ? tb.join(cherry, c, h_q) : tb.join(cherry, b, h_q);
    return tb.build(tb.join(base.root, side, 1.0));
  };
  LowerBoundPair pair{make(true), make(false), la, lb, lc, rho, n, 2.0 * kCherryEdge, 2.0 * h_q};
  return pair;
}

namespace {

std::uint64_t choose(std::uint64_t m, int k) {
  if (k == 2) return m < 2 ? 0 : m * (m - 1) / 2;
  return choose3(m);
}

}  // namespace

DistinguishabilityReport distinguishability_report(const LowerBoundPair& pair, const NoiseModel& model) {
  DistinguishabilityReport rep;
  rep.n = pair.n;
  rep.rho = pair.rho;
  const auto m = static_cast<std::uint64_t>(pair.n - 3);
  const double n = pair.n;
  const double rho2 = pair.rho * pair.rho;

  std::vector<std::string> base;
  for (NodeId v : pair.t1.leaves()) {
    const auto& l = pair.t1.label(v);
    if (l != pair.a && l != pair.b && l != pair.c) base.push_back(l);
  }

  auto h2 = [&](const std::string& x, const std::string& y, const std::string& z) {
    const auto p = triple_distribution(pair.t1, model, pair.t1.leaf(x), pair.t1.leaf(y), pair.t1.leaf(z));
    const auto q = triple_distribution(pair.t2, model, pair.t2.leaf(x), pair.t2.leaf(y), pair.t2.leaf(z));
    return hellinger_squared(p, q);
  };

  // A1 is not distribution-homogeneous; evaluate every shape on the first
  // leaves of B and on a seeded sample.
  double a1 = 0.0;
  SplitMix64 rng(0x5eedULL);
  auto pick = [&]() { return base[static_cast<std::size_t>(rng.below(base.size()))]; };
  if (base.size() >= 2) {
    for (int s = 0; s < 33; ++s) {
      std::string x = base[0], y = base[1], z = base.size() >= 3 ? base[2] : base[0];
      if (s > 0) {
        do {
          x = pick();
          y = pick();
          z = pick();
        } while (x == y || (base.size() >= 3 && (y == z || x == z)));
      }
      if (base.size() >= 3) a1 = std::max(a1, h2(x, y, z));
      for (const auto* o : {&pair.a, &pair.b, &pair.c}) a1 = std::max(a1, h2(x, y, *o));
    }
  }
  const std::string& r = base.front();
  const double a2 = h2(r, pair.b, pair.c);
  const double a3 = h2(pair.a, pair.b, pair.c);
  const double a4 = h2(pair.a, pair.b, r);
  const double a5 = h2(pair.a, pair.c, r);

  auto add = [&](const char* name, std::uint64_t count, double value, double bound) {
    TripleClass c{name, count, value, bound, value <= bound + kArithmeticTol};
    rep.classes.push_back(c);
    if (!c.within_bound) rep.classes_certified = false;
  };
  add("A1", choose(m, 3) + 3 * choose(m, 2), a1, 0.0);
  add("A2", m, a2, 0.0);
  add("A3", 1, a3, 4.0 * rho2 / n);
  add("A4", m, a4, rho2 / (4.0 * n));
  add("A5", m, a5, rho2 / (4.0 * n));

  double log_keep = 0.0;
  for (const auto& c : rep.classes) {
    const double cnt = static_cast<double>(c.count);
    rep.h2_sum += cnt * c.h2_max;
    log_keep += cnt * std::log1p(-std::min(c.h2_max, 1.0 - 1e-300));
  }
  rep.product_h2 = -std::expm1(log_keep);
  rep.hellinger_bound = std::sqrt(rep.h2_sum);
  rep.tvd_bound = std::sqrt(2.0) * rep.hellinger_bound;
  rep.tvd_certified = rep.tvd_bound <= 0.01 + kArithmeticTol;
  return rep;
}

std::string DistinguishabilityReport::to_json() const {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["n"] = n;
  j["rho"] = rho;
  auto& cls = j["classes"] = nlohmann::json::array();
  for (const auto& c : classes) {
    cls.push_back({{"name", c.name},
                   {"count", c.count},
                   {"h2_max", c.h2_max},
                   {"h2_bound", c.h2_bound},
                   {"within_bound", c.within_bound}});
  }
  j["h2_sum"] = h2_sum;
  j["product_h2"] = product_h2;
  j["hellinger_bound"] = hellinger_bound;
  j["tvd_bound"] = tvd_bound;
  j["classes_certified"] = classes_certified;
  j["tvd_certified"] = tvd_certified;
  return j.dump(2);
}

}  // namespace ultrarecon::stats
