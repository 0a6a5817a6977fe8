#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "ppdem/consensus.hpp"
#include "ppdem/graph.hpp"

namespace {

using namespace ppdem;

ConsensusProblem geometric_problem(int n, double rho) {
  const double radius = std::sqrt(2.0 * std::log(static_cast<double>(n)) / n);
  Graph g;
  for (std::uint64_t seed = 400;; ++seed) {
    g = random_geometric_graph(n, radius, seed);
    if (is_connected(g)) break;
  }
  ConsensusProblem p;
  p.graph = std::move(g);
  p.rho = rho;
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal(0.0, 3.0);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd s(1);
    s[0] = normal(rng);
    p.inputs.push_back(s);
  }
  return p;
}

// Rounds to a 1e-8 residual across step constants; the counter documents the
// default choice (rho = 0.4 converges everywhere; smaller values are faster
// on dense geometric graphs).
void BM_pdmm_rho_sweep(benchmark::State& state) {
  const double rho = static_cast<double>(state.range(0)) / 100.0;
  const ConsensusProblem p = geometric_problem(80, rho);
  ConsensusOptions opts;
  opts.sigma_lambda = 100.0;
  opts.tol = 1e-8;
  opts.transcript = TranscriptPolicy::kOff;
  int rounds = 0;
  for (auto _ : state) {
    const ConsensusResult res = run_consensus(p, opts, 5);
    rounds = res.iterations;
    benchmark::DoNotOptimize(res.averages);
  }
  state.counters["rounds_to_1e-8"] = rounds;
}
BENCHMARK(BM_pdmm_rho_sweep)->Arg(10)->Arg(20)->Arg(40)->Arg(80)->Arg(120)
    ->Unit(benchmark::kMillisecond);

void BM_pdmm_round(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ConsensusProblem p = geometric_problem(n, 0.4);
  ConsensusOptions opts;
  opts.tol = -1.0;  // fixed round count
  opts.max_iters = 50;
  opts.throw_on_max_iters = false;
  opts.transcript = TranscriptPolicy::kOff;
  for (auto _ : state) {
    const ConsensusResult res = run_consensus(p, opts, 5);
    benchmark::DoNotOptimize(res.averages);
  }
  state.SetItemsProcessed(state.iterations() * 50 * n);
}
BENCHMARK(BM_pdmm_round)->Arg(20)->Arg(80)->Arg(160)->Unit(benchmark::kMillisecond);

}  // namespace
