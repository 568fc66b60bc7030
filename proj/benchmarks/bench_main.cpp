#include <benchmark/benchmark.h>

#include "ultrarecon/noise.hpp"
#include "ultrarecon/statistics.hpp"
#include "ultrarecon/topology.hpp"
#include "ultrarecon/tree_ops.hpp"
#include "ultrarecon/weights.hpp"

namespace {

using namespace ultrarecon;

void BM_GenerateTree(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::uint64_t seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(generate_random_ultrametric(n, 0.01, seed++));
}
BENCHMARK(BM_GenerateTree)->Arg(64)->Arg(1024);

void BM_OracleQuery(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Oracle oracle(generate_random_ultrametric(n, 0.01, 7), NoiseModel::homogeneous(), 7);
  LeafId a = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(oracle.answer_weights(a, (a + 1) % n, (a + 2) % n));
    a = (a + 3) % n;
  }
}
BENCHMARK(BM_OracleQuery)->Arg(256)->Arg(4096);

void BM_NoiselessTopology(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  topology::Config cfg;
  cfg.c_thr = 0.25;
  const Tree tree = generate_random_ultrametric(n, 0.01, 3);
  for (auto _ : state) {
    Oracle oracle(tree, NoiseModel::noiseless(), 3);
    auto res = topology::reconstruct_topology(oracle, cfg);
    benchmark::DoNotOptimize(res.ok());
  }
}
BENCHMARK(BM_NoiselessTopology)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_ExpectationWeights(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Tree tree = generate_random_ultrametric(n, 0.05, 5);
  for (auto _ : state) {
    ExpectationOracle source(tree, NoiseModel::homogeneous());
    auto est = weights::reconstruct_weights(source, tree, weights::WeightConfig{});
    benchmark::DoNotOptimize(est.vertices.size());
  }
}
BENCHMARK(BM_ExpectationWeights)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_LowerBoundReport(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto pair = stats::build_lower_bound_pair(n, 0.01);
    benchmark::DoNotOptimize(stats::distinguishability_report(pair).tvd_bound);
  }
}
BENCHMARK(BM_LowerBoundReport)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
