#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "ultrarecon/tree.hpp"

namespace ultrarecon {

/// Leaf index in label-sorted order (Tree::leaf_rank). Reconstruction code
/// addresses leaves only through these.
using LeafId = std::int32_t;

/// p_correct(d1, d2) = d2 / (d1 + 2 d2) for the closest pair at distance d1.
/// Throws InvalidArgument unless 0 <= d1 <= d2 and d2 > 0.
double p_correct_homogeneous(double d1, double d2);

class NoiseModel {
 public:
  enum class Kind { homogeneous, noiseless, custom };
  using Law = std::function<double(double d1, double d2)>;

  static NoiseModel homogeneous();
  static NoiseModel noiseless();

  /// `p_correct` is checked on a 20x20 grid over (0, 2]^2 with d1 < d2:
  /// values in [1/3, 1] and central-difference slope in d1 at most -epsilon.
  /// Throws InvalidArgument on any violation.
  static NoiseModel custom(Law p_correct, double epsilon, std::string name = "custom");

  Kind kind() const noexcept { return kind_; }
  const std::string& name() const noexcept { return name_; }
  double epsilon() const noexcept { return epsilon_; }

  double p_correct(double d1, double d2) const;
  double p_incorrect(double d1, double d2) const { return 0.5 * (1.0 - p_correct(d1, d2)); }

  /// Probabilities of returning (ab, bc, ca) given the three distances.
  std::array<double, 3> distribution(double d_ab, double d_bc, double d_ca) const;

 private:
  NoiseModel(Kind kind, Law law, double epsilon, std::string name)
      : kind_(kind), law_(std::move(law)), epsilon_(epsilon), name_(std::move(name)) {}

  Kind kind_;
  Law law_;
  double epsilon_;
  std::string name_;
};

std::array<double, 3> triple_distribution(const Tree& tree, const NoiseModel& model, NodeId a, NodeId b, NodeId c);

/// Which pair of the argument triple (a, b, c) an experiment returned.
enum class TripleAnswer : std::uint8_t { ab = 0, bc = 1, ca = 2 };

/// Constant-time lowest-common-ancestor heights over a fixed tree
/// (Euler tour plus sparse table), addressed by LeafId.
class LcaHeights {
 public:
  explicit LcaHeights(const Tree& tree);
  double operator()(LeafId a, LeafId b) const;
  double distance(LeafId a, LeafId b) const { return 2.0 * (*this)(a, b); }

 private:
  std::vector<double> node_height_;
  std::vector<NodeId> euler_;
  std::vector<int> euler_depth_;
  std::vector<int> first_;  // by LeafId
  std::vector<std::vector<int>> table_;
  std::vector<int> log2_;
};

/// Set of distinct sorted triples seen so far: a bitset over the
/// combinatorial index when C(n,3) is small, a hash set otherwise.
class QueryMemo {
 public:
  explicit QueryMemo(int n);
  /// Records the triple; returns true the first time it is seen.
  bool record(LeafId a, LeafId b, LeafId c);
  std::uint64_t distinct() const noexcept { return distinct_; }

 private:
  std::uint64_t distinct_ = 0;
  std::vector<std::uint8_t> bits_;
  std::unordered_set<std::uint64_t> set_;
  bool packed_ = true;
};

/// Anything that answers triple experiments on leaves 0..n-1.
class TripleSource {
 public:
  virtual ~TripleSource() = default;
  virtual int leaf_count() const = 0;
  virtual const std::string& label(LeafId x) const = 0;

  /// (w_ab, w_bc, w_ca): one-hot of the answer for a sampling oracle, the
  /// answer probabilities for an expectation oracle.
  virtual std::array<double, 3> answer_weights(LeafId a, LeafId b, LeafId c) = 0;

  /// Weight of "(a, b) returned" for the triple (a, b, c).
  double pair_weight(LeafId a, LeafId b, LeafId c) { return answer_weights(a, b, c)[0]; }

  /// Distinct triples queried so far.
  virtual std::uint64_t distinct_queries() const = 0;
};

/// Permanent-noise oracle. Answers come from a keyed hash of (seed, sorted
/// triple) so they never change; a memo records which triples were asked.
/// Not safe for concurrent use.
class Oracle final : public TripleSource {
 public:
  Oracle(Tree tree, NoiseModel model, std::uint64_t seed);

  int leaf_count() const override { return static_cast<int>(tree_.leaf_count()); }
  const std::string& label(LeafId x) const override;
  std::array<double, 3> answer_weights(LeafId a, LeafId b, LeafId c) override;
  std::uint64_t distinct_queries() const override { return memo_.distinct(); }

  TripleAnswer query(LeafId a, LeafId b, LeafId c);
  TripleAnswer query(const std::string& a, const std::string& b, const std::string& c);

  const Tree& tree() const noexcept { return tree_; }
  const NoiseModel& model() const noexcept { return model_; }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  Tree tree_;
  NoiseModel model_;
  std::uint64_t seed_;
  LcaHeights lca_;
  QueryMemo memo_;
};

/// Returns exact answer probabilities instead of samples. Every empirical mean
/// the reconstruction computes becomes its expectation.
class ExpectationOracle final : public TripleSource {
 public:
  ExpectationOracle(Tree tree, NoiseModel model);

  int leaf_count() const override { return static_cast<int>(tree_.leaf_count()); }
  const std::string& label(LeafId x) const override;
  std::array<double, 3> answer_weights(LeafId a, LeafId b, LeafId c) override;
  std::uint64_t distinct_queries() const override { return memo_.distinct(); }

  const Tree& tree() const noexcept { return tree_; }

 private:
  Tree tree_;
  NoiseModel model_;
  LcaHeights lca_;
  QueryMemo memo_;
};

std::array<double, 3> expectation_query(const Tree& tree, const NoiseModel& model, NodeId a, NodeId b, NodeId c);

/// Rank of the sorted triple i < j < k in the combinatorial number system.
constexpr std::uint64_t triple_index(std::uint64_t i, std::uint64_t j, std::uint64_t k) noexcept {
  return k * (k - 1) * (k - 2) / 6 + j * (j - 1) / 2 + i;
}

constexpr std::uint64_t choose3(std::uint64_t n) noexcept { return n < 3 ? 0 : n * (n - 1) * (n - 2) / 6; }

}  // namespace ultrarecon
