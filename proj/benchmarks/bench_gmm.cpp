#include <benchmark/benchmark.h>

#include <random>

#include "ppdem/gmm.hpp"

namespace {

using namespace ppdem;

Eigen::MatrixXd sample_points(int n, int d) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 2.0);
  Eigen::MatrixXd pts(n, d);
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < d; ++a) pts(i, a) = normal(rng);
  }
  return pts;
}

void BM_e_step(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Eigen::MatrixXd pts = sample_points(n, 2);
  const GmmParams params = init_params(pts, 3, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(e_step(pts, params));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_e_step)->Arg(200)->Arg(2000)->Arg(10000)->Unit(benchmark::kMicrosecond);

void BM_em_iteration(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Eigen::MatrixXd pts = sample_points(n, 2);
  const GmmParams init = init_params(pts, 3, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(centralized_em(pts, 3, 1, init));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_em_iteration)->Arg(200)->Arg(2000)->Unit(benchmark::kMicrosecond);

}  // namespace
