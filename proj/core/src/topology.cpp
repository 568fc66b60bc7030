#include "ultrarecon/topology.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ultrarecon/error.hpp"

namespace ultrarecon::topology {
namespace {

std::string leaf_name(LeafId x) { return "#" + std::to_string(x); }

std::vector<LeafId> sorted_copy(std::span<const LeafId> v) {
  std::vector<LeafId> out(v.begin(), v.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool nearly_equal(double a, double b) { return std::fabs(a - b) <= 1e-9 * std::max({1.0, std::fabs(a), std::fabs(b)}); }

// Pair scores over a fixed witness set for the leaves in `members`.
class PairScores {
 public:
  PairScores(TripleSource& source, std::span<const LeafId> members, std::span<const LeafId> witnesses)
      : m_(members.size()), pos_(static_cast<std::size_t>(source.leaf_count()), -1), sum_(m_ * m_, 0.0) {
    for (std::size_t i = 0; i < m_; ++i) pos_[static_cast<std::size_t>(members[i])] = static_cast<int>(i);
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = i + 1; j < m_; ++j) {
        double s = 0.0;
        for (LeafId x : witnesses) s += source.pair_weight(members[i], members[j], x);
        sum_[i * m_ + j] = s;
        sum_[j * m_ + i] = s;
      }
    }
  }

  double operator()(LeafId a, LeafId b) const {
    return sum_[static_cast<std::size_t>(pos_[static_cast<std::size_t>(a)]) * m_ +
                static_cast<std::size_t>(pos_[static_cast<std::size_t>(b)])];
  }

 private:
  std::size_t m_;
  std::vector<int> pos_;
  std::vector<double> sum_;
};

// Closest pair of (a, b, c) by highest score. Ties are settled by the
// triple's own answer, then by the smallest pair.
int closest_by_scores(TripleSource& source, const PairScores& s, LeafId a, LeafId b, LeafId c) {
  const std::array<double, 3> sc{s(a, b), s(b, c), s(c, a)};
  const double best = std::max({sc[0], sc[1], sc[2]});
  std::array<bool, 3> top{};
  int tied = 0;
  for (int i = 0; i < 3; ++i) {
    top[static_cast<std::size_t>(i)] = nearly_equal(sc[static_cast<std::size_t>(i)], best);
    tied += top[static_cast<std::size_t>(i)] ? 1 : 0;
  }
  if (tied == 1) return static_cast<int>(std::find(top.begin(), top.end(), true) - top.begin());

  const auto w = source.answer_weights(a, b, c);
  int direct = 0;
  for (int i = 1; i < 3; ++i)
    if (w[static_cast<std::size_t>(i)] > w[static_cast<std::size_t>(direct)]) direct = i;
  if (top[static_cast<std::size_t>(direct)]) return direct;

  const std::array<std::pair<LeafId, LeafId>, 3> pairs{std::minmax(a, b), std::minmax(b, c), std::minmax(c, a)};
  int pick = -1;
  for (int i = 0; i < 3; ++i) {
    if (!top[static_cast<std::size_t>(i)]) continue;
    if (pick < 0 || pairs[static_cast<std::size_t>(i)] < pairs[static_cast<std::size_t>(pick)]) pick = i;
  }
  return pick;
}

int resolve_by_scores(TripleSource& source, Forest& forest, std::span<const LeafId> members,
                      std::span<const LeafId> witnesses) {
  if (members.size() == 1) return forest.add_leaf(members[0]);
  if (members.size() == 2) return forest.join(forest.add_leaf(members[0]), forest.add_leaf(members[1]));
  PairScores scores(source, members, witnesses);
  return assemble_from_triples(forest, members, [&](LeafId a, LeafId b, LeafId c) {
    return closest_by_scores(source, scores, a, b, c);
  });
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }
};

}  // namespace

void Config::validate() const {
  if (!(c_thr >= 0.0) || !std::isfinite(c_thr)) throw InvalidArgument("c_thr must be a finite non-negative number");
  auto fraction = [](double f, const char* name) {
    if (!(f > 0.0 && f < 1.0)) throw InvalidArgument(std::string(name) + " must lie in (0, 1)");
  };
  fraction(sample_floor_fraction, "sample_floor_fraction");
  fraction(large_fraction, "large_fraction");
  fraction(small_fraction, "small_fraction");
  if (n0 < 2) throw InvalidArgument("n0 must be at least 2");
  if (n0 > 12) throw InvalidArgument("n0 must be at most 12 (exhaustive search)");
}

double score_threshold(int n, double samples, const Config& cfg) {
  if (n < 2) return 0.0;
  return cfg.c_thr * std::sqrt(samples * std::log(static_cast<double>(n)));
}

ScoreVerdict compare_sums(double x, double y, int n, const Config& cfg) {
  return compare_sums(x, y, n, static_cast<double>(n), cfg);
}

ScoreVerdict compare_sums(double x, double y, int n, double samples, const Config& cfg) {
  if (x < 0.0 || y < 0.0) throw InvalidArgument("compare_sums: sums must be non-negative");
  ScoreVerdict v;
  v.margin = x - y;
  v.threshold = score_threshold(n, samples, cfg);
  v.below_floor = samples < cfg.sample_floor_fraction * n;
  if (v.margin > v.threshold) {
    v.outcome = Outcome::left;
  } else if (-v.margin > v.threshold) {
    v.outcome = Outcome::right;
  } else {
    v.outcome = Outcome::tie;
  }
  return v;
}

int Forest::add_leaf(LeafId leaf) {
  Item it;
  it.leaf = leaf;
  nodes_.push_back(it);
  return static_cast<int>(nodes_.size() - 1);
}

int Forest::join(int left, int right) {
  const int id = static_cast<int>(nodes_.size());
  if (left < 0 || right < 0 || left >= id || right >= id || left == right)
    throw InvalidArgument("Forest::join: bad children");
  Item it;
  it.left = left;
  it.right = right;
  nodes_.push_back(it);
  nodes_[static_cast<std::size_t>(left)].parent = id;
  nodes_[static_cast<std::size_t>(right)].parent = id;
  return id;
}

std::vector<LeafId> Forest::leaves(int v) const {
  std::vector<LeafId> out;
  std::vector<int> stack{v};
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    if (is_leaf(u)) {
      out.push_back(leaf(u));
    } else {
      stack.push_back(child(u, 0));
      stack.push_back(child(u, 1));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

int Forest::find_leaf(int root, LeafId x) const {
  std::vector<int> stack{root};
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    if (is_leaf(u)) {
      if (leaf(u) == x) return u;
    } else {
      stack.push_back(child(u, 0));
      stack.push_back(child(u, 1));
    }
  }
  return -1;
}

Tree Forest::to_tree(int root, const TripleSource& source) const {
  // Post-order over the piece to compute levels, then build bottom-up.
  std::vector<int> order;
  std::vector<int> stack{root};
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    order.push_back(u);
    if (!is_leaf(u)) {
      stack.push_back(child(u, 0));
      stack.push_back(child(u, 1));
    }
  }
  std::vector<int> level(nodes_.size(), 0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (!is_leaf(*it))
      level[static_cast<std::size_t>(*it)] =
          1 + std::max(level[static_cast<std::size_t>(child(*it, 0))], level[static_cast<std::size_t>(child(*it, 1))]);
  }
  const double top = std::max(1, level[static_cast<std::size_t>(root)]);
  TreeBuilder builder;
  std::vector<NodeId> built(nodes_.size(), kNoNode);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const auto u = static_cast<std::size_t>(*it);
    if (is_leaf(*it)) {
      built[u] = builder.add_leaf(source.label(leaf(*it)));
    } else {
      built[u] = builder.join(built[static_cast<std::size_t>(child(*it, 0))],
                              built[static_cast<std::size_t>(child(*it, 1))], level[u] / top);
    }
  }
  return builder.build(built[static_cast<std::size_t>(root)]);
}

ScoreMatrix sibling_scores(TripleSource& source, const std::vector<std::vector<LeafId>>& parts,
                           std::span<const LeafId> ambient) {
  ScoreMatrix out;
  out.parts = static_cast<int>(parts.size());
  const auto l = parts.size();
  out.sum.assign(l * l, 0.0);
  out.count.assign(l * l, 0.0);
  std::vector<int> part_of(static_cast<std::size_t>(source.leaf_count()), -1);
  for (std::size_t i = 0; i < l; ++i) {
    if (parts[i].empty()) throw InvalidArgument("sibling_scores: empty part");
    for (LeafId x : parts[i]) {
      if (part_of[static_cast<std::size_t>(x)] != -1) throw InvalidArgument("sibling_scores: parts overlap");
      part_of[static_cast<std::size_t>(x)] = static_cast<int>(i);
    }
  }
  for (std::size_t i = 0; i < l; ++i) {
    const LeafId a = *std::min_element(parts[i].begin(), parts[i].end());
    for (std::size_t j = i + 1; j < l; ++j) {
      const LeafId b = *std::min_element(parts[j].begin(), parts[j].end());
      double s = 0.0, c = 0.0;
      for (LeafId x : ambient) {
        const int p = part_of[static_cast<std::size_t>(x)];
        if (p == static_cast<int>(i) || p == static_cast<int>(j)) continue;
        s += source.pair_weight(a, b, x);
        c += 1.0;
      }
      out.sum[i * l + j] = out.sum[j * l + i] = s;
      out.count[i * l + j] = out.count[j * l + i] = c;
    }
  }
  return out;
}

int build_subtree(TripleSource& source, Forest& forest, std::span<const LeafId> s_in, int n, const Config& cfg) {
  (void)cfg;
  const auto s = sorted_copy(s_in);
  const int target = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n)) - 1e-12));
  const std::size_t m = s.size();
  if (static_cast<int>(m) < target)
    throw ReconstructionFailure("build_subtree", "ambient set of " + std::to_string(m) + " leaves is below the " +
                                                     std::to_string(target) + "-leaf target");
  if (target <= 1) return forest.add_leaf(s[0]);

  // Part p keeps index p; after a merge the survivor is the lower index, so
  // its representative s[p] stays the smallest leaf of the part.
  std::vector<double> sum(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      for (std::size_t k = j + 1; k < m; ++k) {
        const auto w = source.answer_weights(s[i], s[j], s[k]);
        sum[i * m + j] += w[0];
        sum[j * m + k] += w[1];
        sum[i * m + k] += w[2];
      }

  std::vector<std::vector<LeafId>> members(m);
  std::vector<int> node(m);
  std::vector<char> alive(m, 1);
  for (std::size_t i = 0; i < m; ++i) {
    members[i] = {s[i]};
    node[i] = forest.add_leaf(s[i]);
  }
  const double total = static_cast<double>(m);

  while (true) {
    std::size_t bp = m, bq = m;
    double best = -2.0;
    for (std::size_t p = 0; p < m; ++p) {
      if (!alive[p]) continue;
      for (std::size_t q = p + 1; q < m; ++q) {
        if (!alive[q]) continue;
        const double cnt = total - static_cast<double>(members[p].size() + members[q].size());
        const double mean = cnt > 0.0 ? sum[p * m + q] / cnt : -1.0;
        if (mean > best && !nearly_equal(mean, best)) {
          best = mean;
          bp = p;
          bq = q;
        }
      }
    }
    if (bp == m) throw ReconstructionFailure("build_subtree", "no pair left to merge");

    // Witnesses in part bq stop counting for every pair (bp, r).
    for (std::size_t r = 0; r < m; ++r) {
      if (!alive[r] || r == bp || r == bq) continue;
      const std::size_t lo = std::min(bp, r), hi = std::max(bp, r);
      double drop = 0.0;
      for (LeafId x : members[bq]) drop += source.pair_weight(s[bp], s[r], x);
      sum[lo * m + hi] -= drop;
    }
    members[bp].insert(members[bp].end(), members[bq].begin(), members[bq].end());
    members[bq].clear();
    alive[bq] = 0;
    node[bp] = forest.join(node[bp], node[bq]);
    if (static_cast<int>(members[bp].size()) >= target) return node[bp];
  }
}

PartitionResult partition(TripleSource& source, std::span<const LeafId> base, std::span<const LeafId> pivot,
                          std::span<const LeafId> candidates, int n, const Config& cfg) {
  if (base.empty() || pivot.empty()) throw InvalidArgument("partition: base and pivot must be non-empty");
  PartitionResult out;
  const double samples = static_cast<double>(base.size()) * static_cast<double>(pivot.size());
  for (LeafId x : candidates) {
    double xs = 0.0, ys = 0.0;
    for (LeafId a : base) {
      for (LeafId b : pivot) {
        const auto w = source.answer_weights(a, b, x);
        ys += w[0];  // (a, b)
        xs += w[2];  // (x, a)
      }
    }
    switch (compare_sums(xs, ys, n, samples, cfg).outcome) {
      case Outcome::left:
        out.lower.push_back(x);
        break;
      case Outcome::right:
        out.upper.push_back(x);
        break;
      case Outcome::tie:
        out.same.push_back(x);
        break;
    }
  }
  return out;
}

std::vector<int> completion_quotient(TripleSource& source, Forest& forest, std::span<const LeafId> base_in,
                                     std::span<const LeafId> rest_in, int n, const Config& cfg) {
  const auto base = sorted_copy(base_in);
  const auto rest = sorted_copy(rest_in);
  if (base.empty()) throw InvalidArgument("completion_quotient: empty base");
  const std::size_t r = rest.size();
  if (r == 0) return {};
  const double samples = static_cast<double>(base.size());

  // verdict[i][j] for i < j: left means rest[i] sits in a nearer bucket.
  std::vector<Outcome> verdict(r * r, Outcome::tie);
  UnionFind uf(r);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = i + 1; j < r; ++j) {
      double xs = 0.0, ys = 0.0;
      for (LeafId a : base) {
        const auto w = source.answer_weights(a, rest[i], rest[j]);
        xs += w[0];  // (a, x)
        ys += w[2];  // (y, a)
      }
      const Outcome o = compare_sums(xs, ys, n, samples, cfg).outcome;
      verdict[i * r + j] = o;
      if (o == Outcome::tie) uf.unite(static_cast<int>(i), static_cast<int>(j));
    }
  }

  std::vector<int> group_of(r);
  std::vector<std::vector<std::size_t>> groups;
  {
    std::vector<int> index(r, -1);
    for (std::size_t i = 0; i < r; ++i) {
      const auto root = static_cast<std::size_t>(uf.find(static_cast<int>(i)));
      if (index[root] < 0) {
        index[root] = static_cast<int>(groups.size());
        groups.emplace_back();
      }
      group_of[i] = index[root];
      groups[static_cast<std::size_t>(index[root])].push_back(i);
    }
  }
  const std::size_t g = groups.size();
  // before[a][b]: 1 if group a precedes b, -1 if it follows, 0 unknown.
  std::vector<int> before(g * g, 0);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = i + 1; j < r; ++j) {
      const auto gi = static_cast<std::size_t>(group_of[i]);
      const auto gj = static_cast<std::size_t>(group_of[j]);
      if (gi == gj) continue;
      const Outcome o = verdict[i * r + j];
      const int d = o == Outcome::left ? 1 : -1;
      int& cell = before[gi * g + gj];
      if (cell == 0) {
        cell = d;
        before[gj * g + gi] = -d;
      } else if (cell != d) {
        throw ReconstructionFailure("completion_quotient", "bucket order conflict between " + leaf_name(rest[i]) +
                                                               " and " + leaf_name(rest[j]));
      }
    }
  }
  // Kahn's algorithm over the group tournament.
  std::vector<int> indeg(g, 0);
  for (std::size_t a = 0; a < g; ++a)
    for (std::size_t b = 0; b < g; ++b)
      if (before[a * g + b] == 1) ++indeg[b];
  std::vector<std::size_t> order;
  std::vector<char> used(g, 0);
  for (std::size_t step = 0; step < g; ++step) {
    std::size_t pick = g;
    for (std::size_t a = 0; a < g; ++a) {
      if (!used[a] && indeg[a] == 0) {
        pick = a;
        break;
      }
    }
    if (pick == g) throw ReconstructionFailure("completion_quotient", "bucket order contains a cycle");
    used[pick] = 1;
    order.push_back(pick);
    for (std::size_t b = 0; b < g; ++b)
      if (before[pick * g + b] == 1) --indeg[b];
  }

  std::vector<int> out;
  out.reserve(g);
  for (std::size_t gi : order) {
    std::vector<LeafId> bucket;
    for (std::size_t i : groups[gi]) bucket.push_back(rest[i]);
    out.push_back(resolve_by_scores(source, forest, bucket, base));
  }
  return out;
}

int completion_induced(TripleSource& source, Forest& forest, std::span<const LeafId> leaves_in,
                       std::span<const LeafId> outside, const Config& cfg) {
  (void)cfg;
  const auto leaves = sorted_copy(leaves_in);
  if (leaves.empty()) throw InvalidArgument("completion_induced: no leaves");
  if (leaves.size() > 2 && outside.empty()) throw InvalidArgument("completion_induced: no outside witnesses");
  return resolve_by_scores(source, forest, leaves, outside);
}

int assemble_from_triples(Forest& forest, std::span<const LeafId> leaves_in, const ClosestFn& closest) {
  const auto leaves = sorted_copy(leaves_in);
  const std::size_t m = leaves.size();
  if (m == 0) throw InvalidArgument("assemble_from_triples: no leaves");
  if (m == 1) return forest.add_leaf(leaves[0]);
  std::vector<int> node(m);
  for (std::size_t i = 0; i < m; ++i) node[i] = forest.add_leaf(leaves[i]);
  if (m == 2) return forest.join(node[0], node[1]);

  // support[p][q] (p < q) = number of live third clusters r whose triple
  // answer is (p, q). Cluster p is represented by leaves[p].
  std::vector<int> support(m * m, 0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      for (std::size_t k = j + 1; k < m; ++k) {
        switch (closest(leaves[i], leaves[j], leaves[k])) {
          case 0:
            ++support[i * m + j];
            break;
          case 1:
            ++support[j * m + k];
            break;
          default:
            ++support[i * m + k];
            break;
        }
      }

  auto answer_is_pair = [&](std::size_t x, std::size_t y, std::size_t z) {
    // true if the triple (x, y, z) answers (x, y)
    return closest(leaves[x], leaves[y], leaves[z]) == 0;
  };

  // joined[x*m+y] = merge step that first put x and y in one cluster.
  std::vector<std::vector<std::size_t>> members(m);
  for (std::size_t i = 0; i < m; ++i) members[i] = {i};
  std::vector<int> joined(m * m, 0);
  int step = 0;
  auto record_join = [&](std::size_t p, std::size_t q) {
    ++step;
    for (std::size_t x : members[p])
      for (std::size_t y : members[q]) joined[x * m + y] = joined[y * m + x] = step;
    members[p].insert(members[p].end(), members[q].begin(), members[q].end());
    members[q].clear();
  };

  std::vector<char> alive(m, 1);
  std::size_t live = m;
  while (live > 2) {
    std::size_t bp = m, bq = m;
    int best = -1;
    for (std::size_t p = 0; p < m && bp == m; ++p) {
      if (!alive[p]) continue;
      for (std::size_t q = p + 1; q < m; ++q) {
        if (!alive[q]) continue;
        const int sup = support[p * m + q];
        if (sup == static_cast<int>(live) - 2) {
          bp = p;
          bq = q;
          break;
        }
        if (sup > best) best = sup;
      }
    }
    if (bp == m) {
      // Report a triple that blocks the best-supported pair.
      for (std::size_t p = 0; p < m; ++p) {
        if (!alive[p]) continue;
        for (std::size_t q = p + 1; q < m; ++q) {
          if (!alive[q] || support[p * m + q] != best) continue;
          for (std::size_t r = 0; r < m; ++r) {
            if (!alive[r] || r == p || r == q || answer_is_pair(p, q, r)) continue;
            throw ReconstructionFailure("assemble_from_triples", "no pair is a sibling pair under all triples; (" +
                                                                     leaf_name(leaves[p]) + "," + leaf_name(leaves[q]) +
                                                                     ") is contradicted by " + leaf_name(leaves[r]));
          }
        }
      }
      throw ReconstructionFailure("assemble_from_triples", "no consistent sibling pair");
    }
    for (std::size_t x = 0; x < m; ++x) {
      if (!alive[x] || x == bq) continue;
      for (std::size_t y = x + 1; y < m; ++y) {
        if (!alive[y] || y == bq) continue;
        if (answer_is_pair(x, y, bq)) --support[x * m + y];
      }
    }
    alive[bq] = 0;
    --live;
    node[bp] = forest.join(node[bp], node[bq]);
    record_join(bp, bq);
  }
  std::size_t a = m, b = m;
  for (std::size_t i = 0; i < m; ++i) {
    if (!alive[i]) continue;
    (a == m ? a : b) = i;
  }
  record_join(a, b);

  // Merging only consulted cluster representatives; every other triple must
  // agree with the result too. The closest pair in the tree joined first.
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      for (std::size_t k = j + 1; k < m; ++k) {
        const int ij = joined[i * m + j], jk = joined[j * m + k], ik = joined[i * m + k];
        const int tree_answer = ij < jk && ij < ik ? 0 : (jk < ik ? 1 : 2);
        if (closest(leaves[i], leaves[j], leaves[k]) != tree_answer)
          throw ReconstructionFailure("assemble_from_triples", "triple (" + leaf_name(leaves[i]) + "," +
                                                                   leaf_name(leaves[j]) + "," + leaf_name(leaves[k]) +
                                                                   ") contradicted by the assembled tree");
      }
  return forest.join(node[a], node[b]);
}

int exhaustive_consistency(TripleSource& source, Forest& forest, std::span<const LeafId> leaves_in) {
  const auto leaves = sorted_copy(leaves_in);
  const int m = static_cast<int>(leaves.size());
  if (m == 0) throw InvalidArgument("exhaustive_consistency: no leaves");
  if (m > 14) throw InvalidArgument("exhaustive_consistency: too many leaves");
  if (m == 1) return forest.add_leaf(leaves[0]);

  // A tree agrees with triple ab|c exactly when some node splits {a,b} from c,
  // so its total weight is a sum over nodes of the triples split there. That
  // makes the best tree a subset dynamic program.
  const auto mu = static_cast<std::size_t>(m);
  std::vector<double> w(mu * mu * mu, 0.0);  // w[(a*m+b)*m+c] = weight of ab|c, a < b
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      for (int k = j + 1; k < m; ++k) {
        const auto t = source.answer_weights(leaves[static_cast<std::size_t>(i)], leaves[static_cast<std::size_t>(j)],
                                             leaves[static_cast<std::size_t>(k)]);
        w[(static_cast<std::size_t>(i) * mu + static_cast<std::size_t>(j)) * mu + static_cast<std::size_t>(k)] = t[0];
        w[(static_cast<std::size_t>(j) * mu + static_cast<std::size_t>(k)) * mu + static_cast<std::size_t>(i)] = t[1];
        w[(static_cast<std::size_t>(i) * mu + static_cast<std::size_t>(k)) * mu + static_cast<std::size_t>(j)] = t[2];
      }
  auto split_weight = [&](unsigned a, unsigned b) {
    double s = 0.0;
    for (unsigned side = 0; side < 2; ++side) {
      const unsigned pair_side = side == 0 ? a : b;
      const unsigned third_side = side == 0 ? b : a;
      for (std::size_t x = 0; x < mu; ++x) {
        if (!(pair_side >> x & 1u)) continue;
        for (std::size_t y = x + 1; y < mu; ++y) {
          if (!(pair_side >> y & 1u)) continue;
          for (std::size_t z = 0; z < mu; ++z)
            if (third_side >> z & 1u) s += w[(x * mu + y) * mu + z];
        }
      }
    }
    return s;
  };

  const unsigned full = (1u << m) - 1u;
  std::vector<double> best(full + 1u, 0.0);
  std::vector<unsigned> choice(full + 1u, 0u);
  for (unsigned s = 1; s <= full; ++s) {
    if ((s & (s - 1u)) == 0) continue;  // singletons
    const unsigned low = s & (~s + 1u);
    bool first = true;
    for (unsigned a = (s - 1u) & s; a > 0; a = (a - 1u) & s) {
      if (!(a & low)) continue;  // each split once, with the lowest leaf in a
      const unsigned b = s ^ a;
      const double v = best[a] + best[b] + split_weight(a, b);
      if (first || v > best[s] + 1e-12) {
        best[s] = v;
        choice[s] = a;
        first = false;
      }
    }
  }

  auto build = [&](auto&& self, unsigned s) -> int {
    if ((s & (s - 1u)) == 0) {
      std::size_t i = 0;
      while (!(s >> i & 1u)) ++i;
      return forest.add_leaf(leaves[i]);
    }
    const int l = self(self, choice[s]);
    const int r = self(self, s ^ choice[s]);
    return forest.join(l, r);
  };
  return build(build, full);
}

}  // namespace ultrarecon::topology
