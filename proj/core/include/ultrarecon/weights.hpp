#pragma once

#include <span>
#include <string>
#include <vector>

#include "ultrarecon/noise.hpp"
#include "ultrarecon/tree.hpp"

namespace ultrarecon::weights {

inline constexpr double kHeavyFraction = 1.0 / 6.0;

/// Heavy vertices and the rightmost path of a topology under the
/// NL(right) >= NL(left) child-order convention.
struct HeavyPath {
  std::vector<NodeId> path;        // v_0 = root, ..., the rightmost leaf
  int f = 0;                       // index of the last heavy vertex on `path`
  std::vector<char> heavy;         // by node id
  std::vector<int> anchors;        // path indices t_i with |C_{t_i}| >= n / (4 (f + 1)), increasing
  std::vector<int> anchor_sizes;   // j_i = |C_{t_i}|
};

/// A vertex is heavy when NL(v) >= alpha n + 1.
HeavyPath classify_heavy(const Tree& topology, double alpha = kHeavyFraction);

enum class ErrorClass { exact, fine, coarse };
const char* to_string(ErrorClass c) noexcept;

struct VertexEstimate {
  double height = 0.0;
  ErrorClass error_class = ErrorClass::exact;
  std::string method;       // which estimator produced the value
  int samples = 0;          // queries averaged
  double residual = 0.0;    // bisection residual, aggregate estimates only
  bool clamped = false;     // moved by a range clamp or the monotone correction
};

struct HeightEstimates {
  std::vector<VertexEstimate> vertices;  // by node id of the topology
  std::vector<std::string> warnings;
  int f = 0;

  /// Topology with edge weights ĥ_parent - ĥ_v.
  Tree to_tree(const Tree& topology) const;
};

/// ĥ = 1/A - 2. Throws EstimationFailure unless 0 < A <= 1/2 + 1e-9.
double height_from_prob(double a);

/// ĥ_v = ĥ_anchor (1 - 2 p̂) / p̂. Throws EstimationFailure if p̂ < 1/4 or
/// ĥ_anchor <= 0.
double reconstruct_left_heavy(double p_hat, double anchor_height);

struct AnchorEstimate {
  double p_hat = 0.0;
  int k = 0;
  bool small_k = false;  // fewer than 100 far-side leaves
};

/// Mean over `far` of [Q(a, b, c) = (a, b)], with a, b on different sides of
/// v and every c on the other side of an ancestor.
AnchorEstimate anchor_estimate(TripleSource& source, LeafId a, LeafId b, std::span<const LeafId> far);

/// Q̂ = Σ j_i p̂_i / Σ j_i. Throws InvalidArgument on an empty or mismatched list.
double aggregate_anchor_probs(std::span<const double> p_hat, std::span<const int> sizes);

/// F(a, b) = Σ j_i b_i / (2 b_i + a) / Σ j_i.
double anchor_mixture(double a, std::span<const double> anchor_heights, std::span<const int> sizes);

struct Inversion {
  double height = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool clamped = false;  // Q̂ lay outside [F(a_max), F(0)]
};

/// Solves F(ĥ, anchors) = q by bisection on [0, 4 min ĥ_t]. Out-of-range q
/// clamps to the nearer endpoint. Throws InvalidArgument on non-positive
/// anchor heights.
Inversion invert_F(double q, std::span<const double> anchor_heights, std::span<const int> sizes,
                   double tol = 1e-12, int max_iterations = 200);

/// min(ĥ_v, min_i ĥ_{t_i}).
double final_correction(double h, std::span<const double> anchor_heights);

/// Heights of every internal vertex under the root's left child, each from the
/// leaves under the root's right child.
void compute_light_tree(TripleSource& source, const Tree& topology, HeightEstimates& out);

/// Heights of v_1..v_{f+1} on the rightmost path from cross pairs and a fixed
/// leaf in the root's left subtree. Pairs per vertex are capped at
/// `pair_cap` (default 4n when 0).
void reconstruct_right_path(TripleSource& source, const Tree& topology, const HeavyPath& hp, HeightEstimates& out,
                            int pair_cap = 0);

struct WeightConfig {
  double alpha = kHeavyFraction;
  int pair_cap = 0;
  double inversion_tol = 1e-12;
  int max_iterations = 200;
  double min_probability = 1e-6;  // sampled means are clamped into [this, 1/2]
};

/// Estimates the height of every vertex of `topology`, whose leaf labels must
/// match the source's. Never returns negative edge weights: heights are
/// finally made non-increasing from the root down.
HeightEstimates reconstruct_weights(TripleSource& source, const Tree& topology, const WeightConfig& cfg = {});

/// JSON sidecar: per-vertex height, class, method, samples and residual.
std::string estimates_json(const Tree& topology, const HeightEstimates& est);

}  // namespace ultrarecon::weights
