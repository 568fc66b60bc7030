#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ultrarecon/noise.hpp"
#include "ultrarecon/statistics.hpp"
#include "ultrarecon/topology.hpp"

namespace ultrarecon::harness {

inline constexpr int kSchemaVersion = 1;

enum class Mode { topology, weights, lower_bound, calibrate };
Mode parse_mode(const std::string& s);
const char* to_string(Mode m) noexcept;

/// "homogeneous", "noiseless", or "custom:<json or path to json>". A custom
/// model is {"family": "linear" | "exponential", "rate": r, "epsilon": e,
/// "name": optional}; linear is p = 1/3 + r (d2 - d1), exponential is
/// p = 1 - (2/3) exp(-r (d2 - d1)).
NoiseModel parse_model(const std::string& text);

enum class TopologySource { truth, reconstruct };

struct ExperimentConfig {
  Mode mode = Mode::topology;
  int n = 32;
  double min_edge_weight = 0.01;
  std::optional<double> tau;  // overrides min_edge_weight, scaled by the mode's rate
  std::string model = "homogeneous";
  int trials = 1;
  std::uint64_t seed = 0;
  topology::Config topo;
  double tol = 1e-12;  // bisection tolerance in weights mode
  bool expectation = false;
  TopologySource weights_topology = TopologySource::truth;
  int threads = 0;  // 0 = hardware concurrency
  bool timing = false;
  std::string tree_in;   // Newick file used for every trial instead of a generated tree
  std::string tree_out;  // Newick of trial 0's result (plus .json sidecar in weights mode)
  std::string out;       // prefix for <out>.jsonl and <out>.csv
  double rho = 0.01;
  bool allow_zero_rho = false;

  /// τ sqrt(ln n / n) for topology, τ ln n / sqrt n for weights.
  double effective_min_edge_weight() const;
  /// Throws InvalidArgument naming the offending field.
  void validate() const;
};

struct TrialResult {
  int trial = 0;
  std::uint64_t seed = 0;
  bool success = false;
  bool topology_exact = false;
  std::optional<double> max_weight_error;
  std::optional<double> mean_weight_error;
  std::uint64_t queries = 0;
  double wall_time = 0.0;
  std::string failure_stage;
  std::string failure_detail;
  std::vector<std::string> failure_trace;
  topology::Stats stats;
  std::string tree_newick;  // trial result tree, filled for trial 0 only
  std::string sidecar_json;
};

struct Summary {
  int trials = 0;
  int successes = 0;
  double success_rate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double mean_queries = 0.0;
  std::optional<double> error_p50, error_p90, error_max;
};

struct ExperimentResult {
  std::vector<TrialResult> trials;  // ordered by trial index
  Summary summary;
};

/// Wilson score interval at z = 1.96.
std::pair<double, double> wilson_interval(int successes, int trials, double z = 1.96);

/// Runs one trial with seed = cfg.seed + index. Never throws for
/// reconstruction failures; configuration errors propagate.
TrialResult run_trial(const ExperimentConfig& cfg, int index);

/// Trials in parallel, results ordered by index. Deterministic for a fixed
/// config apart from wall times.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

std::string trial_json(const ExperimentConfig& cfg, const TrialResult& t);
std::string results_jsonl(const ExperimentConfig& cfg, const ExperimentResult& r);
std::string summary_csv(const ExperimentConfig& cfg, const ExperimentResult& r);

struct CalibrationCell {
  double min_edge_weight = 0.0;
  double c_thr = 0.0;
  int trials = 0;
  int successes = 0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct CalibrationResult {
  std::vector<CalibrationCell> cells;  // weights ascending, then c_thr ascending
  std::optional<CalibrationCell> recommended;
  std::optional<CalibrationCell> best;  // highest success rate, widest spacing on ties
};

/// Grid sweep over min edge weights and c_thr values with `base.trials` per
/// cell. Recommends the first cell (smallest weight, then smallest c_thr)
/// whose success rate reaches `target`.
CalibrationResult calibrate(const ExperimentConfig& base, const std::vector<double>& weights,
                            const std::vector<double>& c_thrs, double target);

std::string calibration_csv(const CalibrationResult& r);
/// Locked configuration for the recommended cell, falling back to the best
/// cell with "target_met": false. Empty only for an empty sweep.
std::string locked_config_json(const ExperimentConfig& base, const CalibrationResult& r, double target);

/// Builds the lower-bound pair and its report.
stats::DistinguishabilityReport lower_bound_report(const ExperimentConfig& cfg);

}  // namespace ultrarecon::harness
