#include "ultrarecon/weights.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "ultrarecon/error.hpp"

namespace ultrarecon::weights {
namespace {

constexpr int kMinAnchorLeaves = 100;

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::vector<LeafId> leaf_ids(const Tree& t, NodeId v) {
  std::vector<LeafId> out;
  for (NodeId x : t.leaf_set(v)) out.push_back(t.leaf_rank(x));
  return out;
}

std::vector<NodeId> internal_below(const Tree& t, NodeId v) {
  std::vector<NodeId> out, stack{v};
  while (!stack.empty()) {
    const NodeId x = stack.back();
    stack.pop_back();
    if (t.is_leaf(x)) continue;
    out.push_back(x);
    stack.push_back(t.child(x, 1));
    stack.push_back(t.child(x, 0));
  }
  return out;
}

struct Context {
  TripleSource& source;
  const Tree& topology;
  const WeightConfig& cfg;
  HeightEstimates& out;
  int small_anchors = 0;

  // Keeps a sampled mean inside the range the inversions accept.
  double clamp_mean(double a, double lo, NodeId v) {
    if (a < lo) {
      out.warnings.push_back("vertex " + std::to_string(v) + fmt(": mean %.6g raised to %.6g", a, lo));
      out.vertices[static_cast<std::size_t>(v)].clamped = true;
      return lo;
    }
    if (a > 0.5) {
      out.warnings.push_back("vertex " + std::to_string(v) + fmt(": mean %.6g lowered to 0.5", a));
      out.vertices[static_cast<std::size_t>(v)].clamped = true;
      return 0.5;
    }
    return a;
  }

  AnchorEstimate anchored(NodeId v, std::span<const LeafId> far) {
    const LeafId a = topology.leaf_rank(topology.min_leaf(topology.left_child(v)));
    const LeafId b = topology.leaf_rank(topology.min_leaf(topology.right_child(v)));
    auto est = anchor_estimate(source, a, b, far);
    if (est.small_k) ++small_anchors;
    return est;
  }

  double anchor_height(NodeId anchor) {
    const double h = out.vertices[static_cast<std::size_t>(anchor)].height;
    if (h > 0.0) return h;
    out.warnings.push_back("vertex " + std::to_string(anchor) + ": non-positive anchor height raised to 1e-6");
    return 1e-6;
  }

  void set(NodeId v, double h, ErrorClass c, const char* method, int samples, double residual = 0.0) {
    auto& e = out.vertices[static_cast<std::size_t>(v)];
    e.height = h;
    e.error_class = c;
    e.method = method;
    e.samples = samples;
    e.residual = residual;
  }
};

}  // namespace

const char* to_string(ErrorClass c) noexcept {
  switch (c) {
    case ErrorClass::exact:
      return "exact";
    case ErrorClass::fine:
      return "fine";
    case ErrorClass::coarse:
      return "coarse";
  }
  return "unknown";
}

HeavyPath classify_heavy(const Tree& topology, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("classify_heavy: alpha must lie in (0, 1)");
  const double n = static_cast<double>(topology.leaf_count());
  HeavyPath hp;
  hp.heavy.assign(topology.node_count(), 0);
  for (std::size_t v = 0; v < topology.node_count(); ++v)
    hp.heavy[v] = topology.leaves_below(static_cast<NodeId>(v)) >= alpha * n + 1.0 - 1e-9;
  hp.heavy[static_cast<std::size_t>(topology.root())] = 1;
  for (NodeId v = topology.root();; v = topology.right_child(v)) {
    hp.path.push_back(v);
    if (hp.heavy[static_cast<std::size_t>(v)]) hp.f = static_cast<int>(hp.path.size()) - 1;
    if (topology.is_leaf(v)) break;
  }
  const double min_size = n / (4.0 * (hp.f + 1));
  for (int i = 0; i <= hp.f; ++i) {
    const NodeId v = hp.path[static_cast<std::size_t>(i)];
    if (topology.is_leaf(v)) break;
    const int size = topology.leaves_below(topology.left_child(v));
    if (size >= min_size) {
      hp.anchors.push_back(i);
      hp.anchor_sizes.push_back(size);
    }
  }
  return hp;
}

double height_from_prob(double a) {
  if (!(a > 0.0) || a > 0.5 + 1e-9) throw EstimationFailure(fmt("height_from_prob: mean %.17g outside (0, 1/2]", a));
  return std::max(0.0, 1.0 / a - 2.0);
}

double reconstruct_left_heavy(double p_hat, double anchor_height) {
  if (!(p_hat >= 0.25)) throw EstimationFailure(fmt("reconstruct_left_heavy: p = %.17g below 1/4", p_hat));
  if (!(anchor_height > 0.0))
    throw EstimationFailure(fmt("reconstruct_left_heavy: anchor height %.17g not positive", anchor_height));
  return anchor_height * (1.0 - 2.0 * p_hat) / p_hat;
}

AnchorEstimate anchor_estimate(TripleSource& source, LeafId a, LeafId b, std::span<const LeafId> far) {
  if (far.empty()) throw InvalidArgument("anchor_estimate: no far-side leaves");
  double sum = 0.0;
  for (LeafId c : far) sum += source.pair_weight(a, b, c);
  AnchorEstimate est;
  est.k = static_cast<int>(far.size());
  est.p_hat = sum / est.k;
  est.small_k = est.k < kMinAnchorLeaves;
  return est;
}

double aggregate_anchor_probs(std::span<const double> p_hat, std::span<const int> sizes) {
  if (p_hat.empty()) throw InvalidArgument("aggregate_anchor_probs: no anchors");
  if (p_hat.size() != sizes.size()) throw InvalidArgument("aggregate_anchor_probs: size mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < p_hat.size(); ++i) {
    if (sizes[i] <= 0) throw InvalidArgument("aggregate_anchor_probs: anchor sizes must be positive");
    num += sizes[i] * p_hat[i];
    den += sizes[i];
  }
  return num / den;
}

double anchor_mixture(double a, std::span<const double> anchor_heights, std::span<const int> sizes) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < anchor_heights.size(); ++i) {
    num += sizes[i] * anchor_heights[i] / (2.0 * anchor_heights[i] + a);
    den += sizes[i];
  }
  return num / den;
}

Inversion invert_F(double q, std::span<const double> anchor_heights, std::span<const int> sizes, double tol,
                   int max_iterations) {
  if (anchor_heights.empty() || anchor_heights.size() != sizes.size())
    throw InvalidArgument("invert_F: need matching non-empty anchor heights and sizes");
  for (double h : anchor_heights)
    if (!(h > 0.0)) throw InvalidArgument(fmt("invert_F: anchor height %.17g not positive", h));
  for (int s : sizes)
    if (s <= 0) throw InvalidArgument("invert_F: anchor sizes must be positive");

  const auto F = [&](double a) { return anchor_mixture(a, anchor_heights, sizes); };
  double lo = 0.0;
  double hi = 4.0 * *std::min_element(anchor_heights.begin(), anchor_heights.end());
  Inversion r;
  if (q >= F(lo)) {
    r.height = lo;
    r.clamped = q > F(lo);
  } else if (q <= F(hi)) {
    r.height = hi;
    r.clamped = q < F(hi);
  } else {
    // F is strictly decreasing on [lo, hi].
    double mid = 0.5 * (lo + hi);
    for (r.iterations = 1; r.iterations <= max_iterations; ++r.iterations) {
      mid = 0.5 * (lo + hi);
      const double fm = F(mid);
      if (std::abs(fm - q) <= tol) break;
      if (fm > q) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    r.iterations = std::min(r.iterations, max_iterations);
    r.height = mid;
  }
  r.residual = std::abs(F(r.height) - q);
  if (r.clamped) r.residual = 0.0;
  return r;
}

double final_correction(double h, std::span<const double> anchor_heights) {
  for (double t : anchor_heights) h = std::min(h, t);
  return h;
}

void compute_light_tree(TripleSource& source, const Tree& topology, HeightEstimates& out) {
  WeightConfig cfg;
  Context ctx{source, topology, cfg, out};
  const NodeId root = topology.root();
  if (topology.is_leaf(root)) return;
  const auto far = leaf_ids(topology, topology.right_child(root));
  for (NodeId v : internal_below(topology, topology.left_child(root))) {
    const auto est = ctx.anchored(v, far);
    const double a = ctx.clamp_mean(est.p_hat, cfg.min_probability, v);
    ctx.set(v, height_from_prob(a), ErrorClass::fine, "light_tree", est.k);
  }
  if (ctx.small_anchors > 0)
    out.warnings.push_back(std::to_string(ctx.small_anchors) + " light-tree estimates used fewer than " +
                           std::to_string(kMinAnchorLeaves) + " leaves");
}

void reconstruct_right_path(TripleSource& source, const Tree& topology, const HeavyPath& hp, HeightEstimates& out,
                            int pair_cap) {
  WeightConfig cfg;
  Context ctx{source, topology, cfg, out};
  const int n = static_cast<int>(topology.leaf_count());
  if (pair_cap <= 0) pair_cap = 4 * n;
  const NodeId root = topology.root();
  if (topology.is_leaf(root)) return;
  const LeafId c = topology.leaf_rank(topology.min_leaf(topology.left_child(root)));
  const int last = std::min(hp.f + 1, static_cast<int>(hp.path.size()) - 1);
  for (int l = 1; l <= last; ++l) {
    const NodeId v = hp.path[static_cast<std::size_t>(l)];
    if (topology.is_leaf(v)) continue;
    const auto left = leaf_ids(topology, topology.left_child(v));
    const auto right = leaf_ids(topology, topology.right_child(v));
    double sum = 0.0;
    int pairs = 0;
    for (std::size_t i = 0; i < left.size() && pairs < pair_cap; ++i) {
      for (std::size_t j = 0; j < right.size() && pairs < pair_cap; ++j, ++pairs)
        sum += source.pair_weight(left[i], right[j], c);
    }
    const double a = ctx.clamp_mean(sum / pairs, cfg.min_probability, v);
    const bool fine = pairs >= kHeavyFraction * n;
    ctx.set(v, height_from_prob(a), fine ? ErrorClass::fine : ErrorClass::coarse, "right_path", pairs);
  }
}

HeightEstimates reconstruct_weights(TripleSource& source, const Tree& topology, const WeightConfig& cfg) {
  const int n = static_cast<int>(topology.leaf_count());
  if (n != source.leaf_count()) throw InvalidArgument("reconstruct_weights: leaf count differs from the source");
  for (int i = 0; i < n; ++i) {
    if (topology.label(topology.leaves()[static_cast<std::size_t>(i)]) != source.label(i))
      throw InvalidArgument("reconstruct_weights: topology labels differ from the source");
  }
  HeightEstimates out;
  out.vertices.assign(topology.node_count(), VertexEstimate{});
  for (NodeId v : topology.leaves()) out.vertices[static_cast<std::size_t>(v)].method = "leaf";
  const NodeId root = topology.root();
  out.vertices[static_cast<std::size_t>(root)].method = "normalization";
  out.vertices[static_cast<std::size_t>(root)].height = 1.0;
  if (n < 3) return out;

  const HeavyPath hp = classify_heavy(topology, cfg.alpha);
  out.f = hp.f;
  Context ctx{source, topology, cfg, out};

  compute_light_tree(source, topology, out);
  reconstruct_right_path(source, topology, hp, out, cfg.pair_cap);

  // Left subtrees of the heavy path vertices, anchored to that vertex.
  for (int l = 1; l <= hp.f; ++l) {
    const NodeId anchor = hp.path[static_cast<std::size_t>(l)];
    const auto far = leaf_ids(topology, topology.right_child(anchor));
    const double h_anchor = ctx.anchor_height(anchor);
    for (NodeId v : internal_below(topology, topology.left_child(anchor))) {
      const auto est = ctx.anchored(v, far);
      double p = ctx.clamp_mean(est.p_hat, cfg.min_probability, v);
      if (p < 0.25) {
        out.warnings.push_back("vertex " + std::to_string(v) + fmt(": anchored mean %.6g raised to 1/4", p));
        out.vertices[static_cast<std::size_t>(v)].clamped = true;
        p = 0.25;
      }
      ctx.set(v, reconstruct_left_heavy(p, h_anchor), ErrorClass::fine, "left_heavy", est.k);
    }
  }

  // Everything strictly below v_{f+1}.
  const auto next = static_cast<std::size_t>(hp.f + 1);
  if (next < hp.path.size() && !topology.is_leaf(hp.path[next])) {
    const NodeId top = hp.path[next];
    auto below = internal_below(topology, top);
    below.erase(below.begin());  // `top` itself came from the right path

    // A path vertex with two heavy children anchors the whole subtree finely.
    int twin = -1;
    for (int l = 0; l <= hp.f; ++l) {
      if (hp.heavy[static_cast<std::size_t>(topology.left_child(hp.path[static_cast<std::size_t>(l)]))]) twin = l;
    }
    if (twin >= 0) {
      const NodeId anchor = hp.path[static_cast<std::size_t>(twin)];
      const auto far = leaf_ids(topology, topology.left_child(anchor));
      const double h_anchor = ctx.anchor_height(anchor);
      for (NodeId v : below) {
        const auto est = ctx.anchored(v, far);
        double p = ctx.clamp_mean(est.p_hat, cfg.min_probability, v);
        if (p < 0.25) {
          out.warnings.push_back("vertex " + std::to_string(v) + fmt(": anchored mean %.6g raised to 1/4", p));
          out.vertices[static_cast<std::size_t>(v)].clamped = true;
          p = 0.25;
        }
        ctx.set(v, reconstruct_left_heavy(p, h_anchor), ErrorClass::fine, "two_heavy_children", est.k);
      }
    } else {
      std::vector<std::vector<LeafId>> far;
      std::vector<double> heights;
      for (int t : hp.anchors) {
        const NodeId anchor = hp.path[static_cast<std::size_t>(t)];
        far.push_back(leaf_ids(topology, topology.left_child(anchor)));
        heights.push_back(ctx.anchor_height(anchor));
      }
      for (NodeId v : below) {
        std::vector<double> p(far.size());
        int samples = 0;
        for (std::size_t i = 0; i < far.size(); ++i) {
          const auto est = ctx.anchored(v, far[i]);
          p[i] = est.p_hat;
          samples += est.k;
        }
        const double q = aggregate_anchor_probs(p, hp.anchor_sizes);
        const auto inv = invert_F(q, heights, hp.anchor_sizes, cfg.inversion_tol, cfg.max_iterations);
        if (inv.clamped) {
          out.warnings.push_back("vertex " + std::to_string(v) + fmt(": aggregate %.6g outside the invertible range", q));
          out.vertices[static_cast<std::size_t>(v)].clamped = true;
        }
        const double h = final_correction(inv.height, heights);
        if (h < inv.height) out.vertices[static_cast<std::size_t>(v)].clamped = true;
        ctx.set(v, h, ErrorClass::coarse, "aggregate", samples, inv.residual);
      }
    }
  }

  if (ctx.small_anchors > 0)
    out.warnings.push_back(std::to_string(ctx.small_anchors) + " anchored estimates used fewer than " +
                           std::to_string(kMinAnchorLeaves) + " far-side leaves");

  // Heights never increase going down.
  for (NodeId v : topology.preorder()) {
    if (v == root) continue;
    auto& e = out.vertices[static_cast<std::size_t>(v)];
    const double cap = out.vertices[static_cast<std::size_t>(topology.parent(v))].height;
    if (e.height > cap) {
      out.warnings.push_back("vertex " + std::to_string(v) + fmt(": height %.6g lowered to parent height %.6g",
                                                                  e.height, cap));
      e.height = cap;
      e.clamped = true;
    }
  }
  return out;
}

Tree HeightEstimates::to_tree(const Tree& topology) const {
  if (vertices.size() != topology.node_count()) throw InvalidArgument("to_tree: estimates do not match the topology");
  std::vector<Node> nodes(topology.node_count());
  std::vector<double> heights(topology.node_count());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto v = static_cast<NodeId>(i);
    nodes[i] = topology.node(v);
    heights[i] = vertices[i].height;
    const NodeId p = topology.parent(v);
    nodes[i].edge_weight = p == kNoNode ? 0.0 : vertices[static_cast<std::size_t>(p)].height - vertices[i].height;
  }
  return Tree(std::move(nodes), topology.root(), std::move(heights));
}

std::string estimates_json(const Tree& topology, const HeightEstimates& est) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["f"] = est.f;
  j["warnings"] = est.warnings;
  auto& verts = j["vertices"] = nlohmann::json::array();
  for (NodeId v : topology.preorder()) {
    const auto& e = est.vertices.at(static_cast<std::size_t>(v));
    const NodeId p = topology.parent(v);
    nlohmann::json item{
        {"id", v},
        {"parent", p},
        {"leaves", topology.leaves_below(v)},
        {"min_leaf", topology.label(topology.min_leaf(v))},
        {"height", e.height},
        {"edge_weight", p == kNoNode ? 0.0 : est.vertices.at(static_cast<std::size_t>(p)).height - e.height},
        {"class", to_string(e.error_class)},
        {"method", e.method},
        {"samples", e.samples},
        {"residual", e.residual},
        {"clamped", e.clamped},
    };
    if (topology.is_leaf(v)) item["label"] = topology.label(v);
    verts.push_back(std::move(item));
  }
  return j.dump(2);
}

}  // namespace ultrarecon::weights
