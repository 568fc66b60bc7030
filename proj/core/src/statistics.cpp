#include "ultrarecon/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "ultrarecon/error.hpp"

namespace ultrarecon::stats {

double hoeffding_radius(double k, double n) {
  if (!(k > 0.0)) throw InvalidArgument("hoeffding_radius: k must be positive");
  if (!(n >= 1.0)) throw InvalidArgument("hoeffding_radius: n must be at least 1");
  return 4.0 * std::sqrt(std::log(n) / k);
}

double generalized_hoeffding_tail(std::span<const std::pair<double, double>> ranges, double t) {
  if (t < 0.0) throw InvalidArgument("generalized_hoeffding_tail: t must be non-negative");
  double spread = 0.0;
  for (const auto& [a, b] : ranges) {
    if (b < a) throw InvalidArgument("generalized_hoeffding_tail: range with b < a");
    spread += (b - a) * (b - a);
  }
  if (t == 0.0) return 1.0;
  if (spread == 0.0) return 0.0;
  return std::exp(-2.0 * t * t / spread);
}

DiscreteDistribution::DiscreteDistribution(std::vector<std::string> labels, std::vector<double> probs)
    : labels_(std::move(labels)), probs_(std::move(probs)) {
  if (labels_.size() != probs_.size()) throw InvalidArgument("DiscreteDistribution: label and probability counts differ");
  std::unordered_set<std::string> seen;
  double total = 0.0;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (!seen.insert(labels_[i]).second)
      throw InvalidArgument("DiscreteDistribution: duplicate label '" + labels_[i] + "'");
    if (!(probs_[i] >= 0.0)) throw InvalidArgument("DiscreteDistribution: negative probability for '" + labels_[i] + "'");
    total += probs_[i];
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvalidArgument("DiscreteDistribution: probabilities do not sum to 1");
}

double DiscreteDistribution::prob(const std::string& label) const {
  const auto it = std::find(labels_.begin(), labels_.end(), label);
  return it == labels_.end() ? 0.0 : probs_[static_cast<std::size_t>(it - labels_.begin())];
}

namespace {

// Both distributions laid out over the union of their supports.
std::pair<std::vector<double>, std::vector<double>> align(const DiscreteDistribution& p,
                                                          const DiscreteDistribution& q) {
  std::vector<std::string> support = p.labels();
  for (const auto& l : q.labels())
    if (std::find(support.begin(), support.end(), l) == support.end()) support.push_back(l);
  std::vector<double> a, b;
  for (const auto& l : support) {
    a.push_back(p.prob(l));
    b.push_back(q.prob(l));
  }
  return {a, b};
}

}  // namespace

double hellinger_squared(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InvalidArgument("hellinger_squared: supports differ in size");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double s = std::sqrt(p[i]) + std::sqrt(q[i]);
    if (s == 0.0) continue;
    const double d = (p[i] - q[i]) / s;
    sum += d * d;
  }
  return 0.5 * sum;
}

double tvd(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InvalidArgument("tvd: supports differ in size");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += std::abs(p[i] - q[i]);
  return 0.5 * sum;
}

double hellinger_squared(const DiscreteDistribution& p, const DiscreteDistribution& q) {
  const auto [a, b] = align(p, q);
  return std::min(1.0, hellinger_squared(a, b));
}

double hellinger(const DiscreteDistribution& p, const DiscreteDistribution& q) {
  return std::sqrt(hellinger_squared(p, q));
}

double tvd(const DiscreteDistribution& p, const DiscreteDistribution& q) {
  const auto [a, b] = align(p, q);
  return std::min(1.0, tvd(a, b));
}

}  // namespace ultrarecon::stats
