#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "ppdem/privacy_metrics.hpp"

namespace {

using namespace ppdem;

void BM_ksg_mi(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd x(n, 1), y(n, 1);
  for (int i = 0; i < n; ++i) {
    const double u = normal(rng);
    x(i, 0) = u;
    y(i, 0) = 0.6 * u + 0.8 * normal(rng);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(ksg_mi(x, y, 3, 11));
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_ksg_mi)->Arg(2000)->Arg(5000)->Arg(10000)->Unit(benchmark::kMillisecond)
    ->Complexity(benchmark::oNSquared);

void BM_leakage_meter(benchmark::State& state) {
  const Graph g = demo_graph();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        monte_carlo_leakage(ProtocolKind::kSubspace, g, {2, 4}, 1,
                            static_cast<int>(state.range(0)), 1, 7));
  }
}
BENCHMARK(BM_leakage_meter)->Arg(2000)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
