// Command line front end: topology / weights experiments, calibration sweeps
// and the lower-bound report. Every flag can also be set through an
// ULTRARECON_<FLAG> environment variable (dashes become underscores).

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ultrarecon/error.hpp"
#include "ultrarecon/harness.hpp"

namespace {

using namespace ultrarecon;

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << content;
}

void bind_env(CLI::App& app) {
  for (CLI::Option* opt : app.get_options()) {
    const auto& names = opt->get_lnames();
    if (names.empty() || names.front() == "help") continue;
    std::string env = "ULTRARECON_" + names.front();
    std::transform(env.begin(), env.end(), env.begin(), [](unsigned char c) {
      return c == '-' ? '_' : static_cast<char>(std::toupper(c));
    });
    opt->envname(env);
  }
}

int run_experiments(const harness::ExperimentConfig& cfg) {
  const auto result = harness::run_experiment(cfg);
  const auto csv = harness::summary_csv(cfg, result);
  std::cout << csv;
  if (!cfg.out.empty()) {
    write_file(cfg.out + ".jsonl", harness::results_jsonl(cfg, result));
    write_file(cfg.out + ".csv", csv);
  }
  if (!cfg.tree_out.empty() && !result.trials.empty()) {
    const auto& first = result.trials.front();
    if (first.tree_newick.empty()) {
      std::cerr << "trial 0 produced no tree; " << cfg.tree_out << " not written\n";
    } else {
      write_file(cfg.tree_out, first.tree_newick + "\n");
      if (!first.sidecar_json.empty()) write_file(cfg.tree_out + ".json", first.sidecar_json + "\n");
    }
  }
  return 0;
}

int run_lower_bound(const harness::ExperimentConfig& cfg) {
  const auto rep = harness::lower_bound_report(cfg);
  const auto text = rep.to_json();
  std::cout << text << "\n";
  if (!cfg.out.empty()) write_file(cfg.out + ".json", text + "\n");
  if (!rep.classes_certified || !rep.tvd_certified) {
    std::cerr << "lower-bound report: a class or aggregate bound is violated\n";
    return 2;
  }
  return 0;
}

int run_calibration(const harness::ExperimentConfig& cfg, const std::vector<double>& weights,
                    const std::vector<double>& c_thrs, double target) {
  const auto res = harness::calibrate(cfg, weights, c_thrs, target);
  const auto csv = harness::calibration_csv(res);
  std::cout << csv;
  const auto locked = harness::locked_config_json(cfg, res, target);
  if (!cfg.out.empty()) {
    write_file(cfg.out + ".csv", csv);
    if (!locked.empty()) write_file(cfg.out + ".locked.json", locked + "\n");
  }
  if (!res.recommended) {
    std::cerr << "no cell reached the target success rate " << target << "\n";
    return 3;
  }
  std::cerr << "recommended: min_edge_weight=" << res.recommended->min_edge_weight
            << " c_thr=" << res.recommended->c_thr << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reconstruct ultrametric trees from noisy triple queries"};
  harness::ExperimentConfig cfg;
  std::string mode = "topology";
  std::string topology_source = "truth";
  double tau = 0.0;
  std::vector<double> weight_grid{0.02, 0.04, 0.06, 0.08, 0.1, 0.125};
  std::vector<double> c_thr_grid{0.25, 0.5, 1.0, 2.0};
  double target = 0.9;

  app.add_option("--mode", mode, "topology | weights | lower-bound | calibrate")->capture_default_str();
  app.add_option("--n", cfg.n, "leaf count")->capture_default_str();
  app.add_option("--min-edge-weight", cfg.min_edge_weight, "smallest edge weight of generated trees")
      ->capture_default_str();
  app.add_option("--tau", tau, "edge weight as tau*sqrt(ln n/n) (topology) or tau*ln n/sqrt n (weights)");
  app.add_option("--model", cfg.model, "homogeneous | noiseless | custom:<json or file>")->capture_default_str();
  app.add_option("--trials", cfg.trials, "number of trials")->capture_default_str();
  app.add_option("--seed", cfg.seed, "seed of trial 0; trial i uses seed + i")->capture_default_str();
  app.add_option("--c-thr", cfg.topo.c_thr, "threshold multiplier")->capture_default_str();
  app.add_option("--n0", cfg.topo.n0, "exhaustive search at or below this many leaves")->capture_default_str();
  app.add_option("--small-fraction", cfg.topo.small_fraction, "minimum witness fraction")->capture_default_str();
  app.add_option("--tol", cfg.tol, "bisection tolerance for weight inversion")->capture_default_str();
  app.add_option("--out", cfg.out, "output prefix");
  app.add_option("--tree-in", cfg.tree_in, "Newick file used instead of generated trees");
  app.add_option("--tree-out", cfg.tree_out, "Newick output of trial 0");
  app.add_option("--rho", cfg.rho, "inner edge scale of the lower-bound pair")->capture_default_str();
  app.add_flag("--allow-zero-rho", cfg.allow_zero_rho, "accept rho = 0 (degenerate inner edge)");
  app.add_flag("--expectation", cfg.expectation, "use exact answer probabilities instead of samples");
  app.add_option("--threads", cfg.threads, "worker threads, 0 = all cores")->capture_default_str();
  app.add_option("--topology", topology_source, "weights mode topology: truth | reconstruct")->capture_default_str();
  app.add_flag("--timing", cfg.timing, "record wall time per trial");
  app.add_option("--weight-grid", weight_grid, "calibration edge weights")->delimiter(',');
  app.add_option("--c-thr-grid", c_thr_grid, "calibration thresholds")->delimiter(',');
  app.add_option("--target", target, "calibration target success rate")->capture_default_str();
  bind_env(app);

  CLI11_PARSE(app, argc, argv);

  try {
    cfg.mode = harness::parse_mode(mode);
    if (app.count("--tau") > 0 || std::getenv("ULTRARECON_TAU")) cfg.tau = tau;
    if (topology_source == "truth") {
      cfg.weights_topology = harness::TopologySource::truth;
    } else if (topology_source == "reconstruct") {
      cfg.weights_topology = harness::TopologySource::reconstruct;
    } else {
      throw InvalidArgument("topology: expected truth or reconstruct");
    }
    switch (cfg.mode) {
      case harness::Mode::topology:
      case harness::Mode::weights:
        return run_experiments(cfg);
      case harness::Mode::lower_bound:
        return run_lower_bound(cfg);
      case harness::Mode::calibrate:
        cfg.validate();
        return run_calibration(cfg, weight_grid, c_thr_grid, target);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
