#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ultrarecon/noise.hpp"
#include "ultrarecon/tree.hpp"

namespace ultrarecon::stats {

/// 4 sqrt(ln n / k): deviation of a mean of k [0,1] variables allowed at
/// confidence 1 - n^-6.
double hoeffding_radius(double k, double n);

/// exp(-2 t^2 / Σ (b_i - a_i)^2): bound on P(|Σ y_i - E Σ y_i| > t) for
/// independent y_i in [a_i, b_i].
double generalized_hoeffding_tail(std::span<const std::pair<double, double>> ranges, double t);

/// Finite distribution over labelled outcomes.
class DiscreteDistribution {
 public:
  /// Throws InvalidArgument on duplicate labels, negative entries, a size
  /// mismatch, or a total further than 1e-12 from 1.
  DiscreteDistribution(std::vector<std::string> labels, std::vector<double> probs);

  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::vector<double>& probs() const noexcept { return probs_; }
  /// Probability of `label`, 0 when it is outside the support list.
  double prob(const std::string& label) const;

 private:
  std::vector<std::string> labels_;
  std::vector<double> probs_;
};

/// Squared Hellinger distance ½ Σ (√p - √q)², computed as ½ Σ (p-q)²/(√p+√q)²
/// to avoid cancellation. Outcomes missing from one side have probability 0.
double hellinger_squared(const DiscreteDistribution& p, const DiscreteDistribution& q);
double hellinger(const DiscreteDistribution& p, const DiscreteDistribution& q);
double tvd(const DiscreteDistribution& p, const DiscreteDistribution& q);

/// Same quantities on aligned probability vectors.
double hellinger_squared(std::span<const double> p, std::span<const double> q);
double tvd(std::span<const double> p, std::span<const double> q);

enum class BaseShape { balanced, random };

/// Two trees that differ only in the topology of three leaves a, b, c below
/// the root's right child; the left subtree B on the other n - 3 leaves is
/// shared. The inner edge on the a-b-c side weighs rho / sqrt(n).
struct LowerBoundPair {
  Tree t1;  // (a, b) cherry, parent p; q = parent(p, c)
  Tree t2;  // (a, c) cherry, parent x; y = parent(x, b)
  std::string a = "a", b = "b", c = "c";
  double rho = 0.0;
  int n = 0;
  double alpha = 0.0;  // d1(a, b) = d2(a, c)
  double beta = 0.0;   // d1(a, c) = d2(a, b)
};

/// Throws InfeasibleError when rho is not in (0, 1/100] (rho = 0 is accepted
/// with `allow_zero_rho`) or the geometry cannot close, and InvalidArgument
/// when n < 4.
LowerBoundPair build_lower_bound_pair(int n, double rho, BaseShape shape = BaseShape::balanced,
                                      std::uint64_t seed = 0, bool allow_zero_rho = false);

struct TripleClass {
  std::string name;
  std::uint64_t count = 0;
  double h2_max = 0.0;  // largest squared Hellinger distance over the class
  double h2_bound = 0.0;
  bool within_bound = true;
};

struct DistinguishabilityReport {
  int n = 0;
  double rho = 0.0;
  std::vector<TripleClass> classes;  // A1..A5
  double h2_sum = 0.0;               // Σ count * h2_max, bounds H² of the product
  double hellinger_bound = 0.0;      // sqrt(h2_sum)
  double tvd_bound = 0.0;            // sqrt(2) * hellinger_bound
  double product_h2 = 0.0;           // 1 - Π (1 - h2)^count
  bool classes_certified = true;     // every class within its bound
  bool tvd_certified = true;         // tvd_bound <= 0.01

  std::string to_json() const;
};

/// Evaluates the triple distributions of both trees on representatives of
/// every class. Classes: A1 triples with at least two leaves of B; A2 (r, b, c);
/// A3 (a, b, c); A4 (a, b, r); A5 (a, c, r), with r in B.
DistinguishabilityReport distinguishability_report(const LowerBoundPair& pair,
                                                   const NoiseModel& model = NoiseModel::homogeneous());

}  // namespace ultrarecon::stats
