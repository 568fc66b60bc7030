#include "ultrarecon/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <memory>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ultrarecon/error.hpp"
#include "ultrarecon/newick.hpp"
#include "ultrarecon/tree_ops.hpp"
#include "ultrarecon/weights.hpp"

namespace ultrarecon::harness {
namespace {

using nlohmann::json;

std::string read_file(const std::string& path, const char* field) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument(std::string(field) + ": cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Shortest representation that round-trips.
std::string num(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// Node of `truth` with the same clade as `v` in `topo`. Both trees must share
// the same topology.
NodeId matching_node(const Tree& topo, NodeId v, const Tree& truth) {
  if (topo.is_leaf(v)) return truth.leaf(topo.label(v));
  const NodeId a = truth.leaf(topo.label(topo.min_leaf(topo.child(v, 0))));
  const NodeId b = truth.leaf(topo.label(topo.min_leaf(topo.child(v, 1))));
  return truth.lca(a, b);
}

Tree load_or_generate(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (!cfg.tree_in.empty()) return from_newick(read_file(cfg.tree_in, "tree_in"));
  return generate_random_ultrametric(cfg.n, cfg.effective_min_edge_weight(), seed);
}

}  // namespace

Mode parse_mode(const std::string& s) {
  if (s == "topology") return Mode::topology;
  if (s == "weights") return Mode::weights;
  if (s == "lower-bound" || s == "lower_bound") return Mode::lower_bound;
  if (s == "calibrate") return Mode::calibrate;
  throw InvalidArgument("mode: unknown mode '" + s + "'");
}

const char* to_string(Mode m) noexcept {
  switch (m) {
    case Mode::topology:
      return "topology";
    case Mode::weights:
      return "weights";
    case Mode::lower_bound:
      return "lower-bound";
    case Mode::calibrate:
      return "calibrate";
  }
  return "unknown";
}

NoiseModel parse_model(const std::string& text) {
  if (text == "homogeneous") return NoiseModel::homogeneous();
  if (text == "noiseless") return NoiseModel::noiseless();
  const std::string prefix = "custom:";
  if (text.rfind(prefix, 0) != 0) throw InvalidArgument("model: unknown model '" + text + "'");
  std::string body = text.substr(prefix.size());
  if (body.empty()) throw InvalidArgument("model: custom model needs a JSON object or file");
  if (body.front() != '{') body = read_file(body, "model");
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("model: invalid custom JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("family") || !j.contains("rate") || !j.contains("epsilon"))
    throw InvalidArgument("model: custom JSON needs family, rate and epsilon");
  const auto family = j["family"].get<std::string>();
  const double rate = j["rate"].get<double>();
  const double eps = j["epsilon"].get<double>();
  const std::string name = j.value("name", "custom-" + family);
  if (family == "linear")
    return NoiseModel::custom([rate](double d1, double d2) { return 1.0 / 3.0 + rate * (d2 - d1); }, eps, name);
  if (family == "exponential")
    return NoiseModel::custom(
        [rate](double d1, double d2) { return 1.0 - 2.0 / 3.0 * std::exp(-rate * (d2 - d1)); }, eps, name);
  throw InvalidArgument("model: unknown custom family '" + family + "'");
}

double ExperimentConfig::effective_min_edge_weight() const {
  if (!tau) return min_edge_weight;
  const double ln = std::log(static_cast<double>(n));
  if (mode == Mode::weights) return *tau * ln / std::sqrt(static_cast<double>(n));
  return *tau * std::sqrt(ln / n);
}

void ExperimentConfig::validate() const {
  if (n < 2) throw InvalidArgument("n: need at least 2 leaves");
  if (trials < 1) throw InvalidArgument("trials: need at least one trial");
  if (threads < 0) throw InvalidArgument("threads: must be non-negative");
  if (tau && !(*tau > 0.0)) throw InvalidArgument("tau: must be positive");
  const double w = effective_min_edge_weight();
  if (tree_in.empty() && !(w > 0.0 && w < 1.0)) throw InvalidArgument("min_edge_weight: must lie in (0, 1)");
  if (!(tol > 0.0)) throw InvalidArgument("tol: must be positive");
  if (rho < 0.0) throw InvalidArgument("rho: must be non-negative");
  topo.validate();
  const auto m = parse_model(model);
  if (mode == Mode::weights && m.kind() != NoiseModel::Kind::homogeneous)
    throw InvalidArgument("model: weight reconstruction needs the homogeneous model");
}

std::pair<double, double> wilson_interval(int successes, int trials, double z) {
  if (trials <= 0) return {0.0, 1.0};
  const double k = trials;
  const double p = successes / k;
  const double z2 = z * z;
  const double centre = (p + z2 / (2 * k)) / (1 + z2 / k);
  const double half = z / (1 + z2 / k) * std::sqrt(p * (1 - p) / k + z2 / (4 * k * k));
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

TrialResult run_trial(const ExperimentConfig& cfg, int index) {
  const auto start = std::chrono::steady_clock::now();
  TrialResult r;
  r.trial = index;
  r.seed = cfg.seed + static_cast<std::uint64_t>(index);
  const Tree truth = load_or_generate(cfg, r.seed);
  const NoiseModel model = parse_model(cfg.model);
  std::unique_ptr<TripleSource> source;
  if (cfg.expectation) {
    source = std::make_unique<ExpectationOracle>(truth, model);
  } else {
    source = std::make_unique<Oracle>(truth, model, r.seed);
  }

  std::optional<Tree> topo;
  if (cfg.mode == Mode::topology || cfg.weights_topology == TopologySource::reconstruct) {
    auto res = topology::reconstruct_topology(*source, cfg.topo);
    r.stats = res.stats;
    if (res.ok()) {
      r.topology_exact = topology_equal(*res.tree, truth);
      topo = std::move(res.tree);
      if (!r.topology_exact) {
        r.failure_stage = "topology";
        r.failure_detail = "reconstructed topology differs from the true tree";
      }
    } else {
      r.failure_stage = res.failure_stage;
      r.failure_detail = res.failure_detail;
      r.failure_trace = res.trace;
    }
  } else {
    topo = truth;
    r.topology_exact = true;
  }

  if (cfg.mode == Mode::topology) {
    r.success = r.topology_exact;
    if (index == 0 && topo) r.tree_newick = to_newick(*topo);
  } else if (topo && r.topology_exact) {
    weights::WeightConfig wc;
    wc.inversion_tol = cfg.tol;
    try {
      const auto est = weights::reconstruct_weights(*source, *topo, wc);
      double worst = 0.0, total = 0.0;
      int edges = 0;
      for (std::size_t i = 0; i < topo->node_count(); ++i) {
        const auto v = static_cast<NodeId>(i);
        if (v == topo->root()) continue;
        const double w_hat = est.vertices[static_cast<std::size_t>(topo->parent(v))].height - est.vertices[i].height;
        const double err = std::abs(w_hat - truth.edge_weight(matching_node(*topo, v, truth)));
        worst = std::max(worst, err);
        total += err;
        ++edges;
      }
      r.max_weight_error = worst;
      r.mean_weight_error = edges ? total / edges : 0.0;
      r.success = true;
      if (index == 0) {
        r.tree_newick = to_newick(est.to_tree(*topo));
        r.sidecar_json = weights::estimates_json(*topo, est);
      }
    } catch (const EstimationFailure& e) {
      r.failure_stage = "weights";
      r.failure_detail = e.what();
    }
  }
  r.queries = source->distinct_queries();
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.mode != Mode::topology && cfg.mode != Mode::weights)
    throw InvalidArgument("mode: run_experiment handles topology and weights only");
  ExperimentResult out;
  out.trials.resize(static_cast<std::size_t>(cfg.trials));
  std::vector<std::exception_ptr> errors(out.trials.size());
  int threads = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, cfg.trials);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < cfg.trials; i = next++) {
      try {
        out.trials[static_cast<std::size_t>(i)] = run_trial(cfg, i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  auto& s = out.summary;
  s.trials = cfg.trials;
  std::vector<double> errs;
  double queries = 0.0;
  for (const auto& t : out.trials) {
    s.successes += t.success;
    queries += static_cast<double>(t.queries);
    if (t.max_weight_error) errs.push_back(*t.max_weight_error);
  }
  s.success_rate = static_cast<double>(s.successes) / s.trials;
  std::tie(s.ci_low, s.ci_high) = wilson_interval(s.successes, s.trials);
  s.mean_queries = queries / s.trials;
  if (!errs.empty()) {
    std::sort(errs.begin(), errs.end());
    auto rank = [&](double q) {
      const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(errs.size()))) - 1;
      return errs[std::min(idx, errs.size() - 1)];
    };
    s.error_p50 = rank(0.5);
    s.error_p90 = rank(0.9);
    s.error_max = errs.back();
  }
  return out;
}

std::string trial_json(const ExperimentConfig& cfg, const TrialResult& t) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["mode"] = to_string(cfg.mode);
  j["n"] = cfg.n;
  j["trial"] = t.trial;
  j["seed"] = t.seed;
  j["success"] = t.success;
  j["topology_exact"] = t.topology_exact;
  j["queries"] = t.queries;
  if (t.max_weight_error) j["max_weight_error"] = *t.max_weight_error;
  if (t.mean_weight_error) j["mean_weight_error"] = *t.mean_weight_error;
  if (cfg.timing) j["wall_time"] = t.wall_time;
  if (!t.failure_stage.empty()) {
    j["failure"] = {{"stage", t.failure_stage}, {"detail", t.failure_detail}, {"trace", t.failure_trace}};
  }
  if (cfg.mode == Mode::topology || cfg.weights_topology == TopologySource::reconstruct) {
    j["stats"] = {{"pivots", t.stats.pivots},
                  {"base_switches", t.stats.base_switches},
                  {"quotient_completions", t.stats.quotient_completions},
                  {"induced_completions", t.stats.induced_completions},
                  {"exhaustive_searches", t.stats.exhaustive_searches},
                  {"min_switched_base", t.stats.min_switched_base},
                  {"accounting_ok", t.stats.accounting_ok}};
  }
  return j.dump();
}

std::string results_jsonl(const ExperimentConfig& cfg, const ExperimentResult& r) {
  std::string out;
  for (const auto& t : r.trials) out += trial_json(cfg, t) + "\n";
  return out;
}

std::string summary_csv(const ExperimentConfig& cfg, const ExperimentResult& r) {
  const auto& s = r.summary;
  auto opt = [](const std::optional<double>& x) { return x ? num(*x) : std::string(); };
  std::string out =
      "schema_version,mode,n,model,min_edge_weight,c_thr,expectation,trials,successes,success_rate,ci_low,ci_high,"
      "mean_queries,error_p50,error_p90,error_max\n";
  out += std::to_string(kSchemaVersion) + "," + to_string(cfg.mode) + "," + std::to_string(cfg.n) + "," +
         csv_field(parse_model(cfg.model).name()) + "," +
         (cfg.tree_in.empty() ? num(cfg.effective_min_edge_weight()) : std::string()) + "," + num(cfg.topo.c_thr) +
         "," + (cfg.expectation ? "true" : "false") + "," + std::to_string(s.trials) + "," +
         std::to_string(s.successes) + "," + num(s.success_rate) + "," + num(s.ci_low) + "," + num(s.ci_high) + "," +
         num(s.mean_queries) + "," + opt(s.error_p50) + "," + opt(s.error_p90) + "," + opt(s.error_max) + "\n";
  return out;
}

CalibrationResult calibrate(const ExperimentConfig& base, const std::vector<double>& weights,
                            const std::vector<double>& c_thrs, double target) {
  if (weights.empty() || c_thrs.empty()) throw InvalidArgument("calibrate: empty sweep grid");
  if (!(target > 0.0 && target <= 1.0)) throw InvalidArgument("calibrate: target must lie in (0, 1]");
  auto ws = weights;
  auto cs = c_thrs;
  std::sort(ws.begin(), ws.end());
  std::sort(cs.begin(), cs.end());
  CalibrationResult out;
  for (double w : ws) {
    for (double c : cs) {
      ExperimentConfig cfg = base;
      cfg.mode = Mode::topology;
      cfg.min_edge_weight = w;
      cfg.tau.reset();
      cfg.topo.c_thr = c;
      const auto res = run_experiment(cfg);
      CalibrationCell cell{w, c, res.summary.trials, res.summary.successes, res.summary.ci_low, res.summary.ci_high};
      out.cells.push_back(cell);
      if (!out.recommended && res.summary.success_rate >= target) out.recommended = cell;
      // Ties go to the wider spacing, the easier instance family.
      if (!out.best || cell.successes * out.best->trials > out.best->successes * cell.trials ||
          (cell.successes * out.best->trials == out.best->successes * cell.trials &&
           cell.min_edge_weight > out.best->min_edge_weight))
        out.best = cell;
    }
  }
  return out;
}

std::string calibration_csv(const CalibrationResult& r) {
  std::string out = "min_edge_weight,c_thr,trials,successes,success_rate,ci_low,ci_high,ci_half_width\n";
  for (const auto& c : r.cells) {
    out += num(c.min_edge_weight) + "," + num(c.c_thr) + "," + std::to_string(c.trials) + "," +
           std::to_string(c.successes) + "," + num(static_cast<double>(c.successes) / c.trials) + "," +
           num(c.ci_low) + "," + num(c.ci_high) + "," + num(0.5 * (c.ci_high - c.ci_low)) + "\n";
  }
  return out;
}

std::string locked_config_json(const ExperimentConfig& base, const CalibrationResult& r, double target) {
  if (!r.best) return {};
  const auto& c = r.recommended ? *r.recommended : *r.best;
  json j{{"schema_version", kSchemaVersion},
         {"target_met", r.recommended.has_value()},
         {"seed", base.seed},
         {"n", base.n},
         {"model", base.model},
         {"min_edge_weight", c.min_edge_weight},
         {"c_thr", c.c_thr},
         {"n0", base.topo.n0},
         {"target", target},
         {"calibration_trials", c.trials},
         {"calibration_successes", c.successes}};
  return j.dump(2);
}

stats::DistinguishabilityReport lower_bound_report(const ExperimentConfig& cfg) {
  if (cfg.n < 4) throw InvalidArgument("n: the lower-bound construction needs at least 4 leaves");
  const auto pair = stats::build_lower_bound_pair(cfg.n, cfg.rho, stats::BaseShape::balanced, cfg.seed,
                                                  cfg.allow_zero_rho);
  return stats::distinguishability_report(pair, NoiseModel::homogeneous());
}

}  // namespace ultrarecon::harness
