// Acceptance suite: every criterion below runs end to end at its stated
// tolerance and prints one PASS/FAIL line. The exit code is the number of
// failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "commands.hpp"
#include "experiment_config.hpp"
#include "ppdem/adversary.hpp"
#include "ppdem/numeric.hpp"
#include "ppdem/consensus.hpp"
#include "ppdem/data.hpp"
#include "ppdem/errors.hpp"
#include "ppdem/gmm.hpp"
#include "ppdem/graph.hpp"
#include "ppdem/privacy_metrics.hpp"
#include "ppdem/protocols.hpp"
#include "ppdem/rng.hpp"

using namespace ppdem;

namespace {

int failures = 0;

void report(int index, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] %d. %s: %s\n", pass ? "PASS" : "FAIL", index, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double max_abs_dev(const std::vector<double>& a, const std::vector<double>& b) {
  double dev = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dev = std::max(dev, std::abs(a[i] - b[i]));
  return dev;
}

Eigen::VectorXd vec1(double x) {
  Eigen::VectorXd v(1);
  v[0] = x;
  return v;
}

// The 195x22 two-cluster stand-in reduced to its two leading principal
// components; mirrors the voice-measurements pipeline without shipping data.
Eigen::MatrixXd standin_points(std::uint64_t seed) {
  GmmParams truth;
  truth.weights = Eigen::VectorXd::Constant(2, 0.5);
  SeedStreams streams(seed);
  std::mt19937_64 rng = streams.stream("standin-centers");
  std::normal_distribution<double> center(0.0, 4.0);
  for (int j = 0; j < 2; ++j) {
    Eigen::VectorXd mu(22);
    for (int a = 0; a < 22; ++a) mu[a] = center(rng);
    truth.means.push_back(std::move(mu));
    truth.covariances.push_back(Eigen::MatrixXd::Identity(22, 22));
  }
  const Eigen::MatrixXd raw = synthetic_gmm_data(truth, 195, streams.derive("standin")).points;
  return pca(raw, 2).projected;
}

Graph connected_geometric(int n, std::uint64_t seed_base, int* attempts = nullptr) {
  const double radius = std::sqrt(2.0 * std::log(static_cast<double>(n)) / n);
  for (int attempt = 0;; ++attempt) {
    Graph g = random_geometric_graph(n, radius, seed_base + attempt);
    if (is_connected(g)) {
      if (attempts) *attempts = attempt;
      return g;
    }
  }
}

Graph ring_graph(int n) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 1; i < n; ++i) edges.emplace_back(i, i + 1);
  edges.emplace_back(1, n);
  return Graph(n, std::move(edges));
}

struct MeterData {
  // [protocol][repetition][iteration]
  std::vector<std::vector<std::vector<double>>> nmi{3};
  int iters = 10;
  int repetitions = 10;
  double seconds = 0.0;
};

MeterData run_meter(int trials, int repetitions, int iters) {
  const auto start = std::chrono::steady_clock::now();
  MeterData data;
  data.iters = iters;
  data.repetitions = repetitions;
  const Graph g = demo_graph();
  const std::set<int> corrupt{2, 4};
  const ProtocolKind kinds[3] = {ProtocolKind::kFederated, ProtocolKind::kSecureSum,
                                 ProtocolKind::kSubspace};
  SeedStreams streams(20260809);
  for (int p = 0; p < 3; ++p) {
    for (int rep = 0; rep < repetitions; ++rep) {
      const LeakageResult res =
          monte_carlo_leakage(kinds[p], g, corrupt, 1, trials, iters, streams.derive("rep", rep));
      std::vector<double> values;
      for (const MiEstimate& e : res.per_iter) values.push_back(e.normalized);
      data.nmi[p].push_back(std::move(values));
    }
  }
  data.seconds = elapsed_seconds(start);
  return data;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<std::vector<double>>& reps, int iter) {
  MeanSe out;
  for (const auto& rep : reps) out.mean += rep[iter];
  out.mean /= reps.size();
  double var = 0.0;
  for (const auto& rep : reps) var += (rep[iter] - out.mean) * (rep[iter] - out.mean);
  if (reps.size() > 1) out.se = std::sqrt(var / (reps.size() - 1) / reps.size());
  return out;
}

void criterion_output_correctness() {
  const auto start = std::chrono::steady_clock::now();
  const Eigen::MatrixXd points = standin_points(7);
  const int c = 2, iters = 30;
  const Graph geo = connected_geometric(80, 1000);
  const auto node_data = assign_contiguous_blocks(points, 80);
  const GmmParams init = init_params(points, c, 11);
  const EmTrace oracle = centralized_em(points, c, iters, init);

  FederatedOptions fopts;
  fopts.transcript = TranscriptPolicy::kOff;
  const ProtocolRun fed = run_federated_em(node_data, c, iters, init, 21, fopts);
  const double dev_fed = max_abs_dev(fed.loglik, oracle.loglik);

  SecureSumOptions sopts;
  sopts.transcript = TranscriptPolicy::kOff;
  const ProtocolRun ring = run_secure_sum_em(ring_graph(80), node_data, c, iters, init, 22, sopts);
  const double dev_ring = max_abs_dev(ring.loglik, oracle.loglik);

  SubspaceOptions uopts;
  uopts.consensus.tol = 1e-8;
  uopts.transcript = TranscriptPolicy::kOff;
  uopts.consensus.transcript = TranscriptPolicy::kOff;
  const ProtocolRun sub = run_subspace_em(geo, node_data, c, iters, init, 100.0, 23, uopts);
  const double dev_sub = max_abs_dev(sub.loglik, oracle.loglik);

  const double secs = elapsed_seconds(start);
  const bool pass = dev_sub < 1e-5 && dev_fed < 1e-12 && dev_ring < 1e-12 && secs < 120.0;
  char detail[256];
  std::snprintf(detail, sizeof(detail),
                "subspace max|dloglik|=%.2e (<1e-5), federated=%.2e, ring=%.2e (<1e-12), "
                "%.1fs (<120s)",
                dev_sub, dev_fed, dev_ring, secs);
  report(1, "output correctness vs the single-site oracle", pass, detail);
}

void criterion_accuracy_independence() {
  const auto start = std::chrono::steady_clock::now();
  SeedStreams streams(555);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const Graph g = connected_geometric(80, 2000 + 100 * rep);
    ConsensusProblem problem;
    problem.graph = g;
    std::mt19937_64 rng = streams.stream("inputs", rep);
    std::normal_distribution<double> normal(0.0, 3.0);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(1);
    for (int i = 0; i < 80; ++i) {
      problem.inputs.push_back(vec1(normal(rng)));
      mean += problem.inputs.back();
    }
    mean /= 80.0;
    for (double sigma : {0.0, 1.0, 1e2, 1e4}) {
      ConsensusOptions opts;
      opts.sigma_lambda = sigma;
      opts.stop = StopRule::kSelfDifference;
      opts.tol = 1e-9;
      opts.max_iters = 100000;
      opts.transcript = TranscriptPolicy::kOff;
      const ConsensusResult res = run_consensus(problem, opts, streams.derive("run", rep * 7));
      for (const auto& y : res.averages) {
        worst = std::max(worst, (y - mean).cwiseAbs().maxCoeff());
      }
    }
  }
  const double secs = elapsed_seconds(start);
  const bool pass = worst <= 1e-6 && secs < 120.0;
  char detail[256];
  std::snprintf(detail, sizeof(detail),
                "max |y - mean| = %.2e over 20 graphs x sigma in {0,1,1e2,1e4} (<1e-6), "
                "%.1fs (<120s)",
                worst, secs);
  report(2, "no privacy-accuracy trade-off", pass, detail);
}

void criterion_federated_leakage(const MeterData& meter) {
  std::mt19937_64 rng(4242);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd points(5, 2);
  for (int i = 0; i < 5; ++i) {
    for (int a = 0; a < 2; ++a) points(i, a) = normal(rng);
  }
  std::vector<Eigen::MatrixXd> node_data;
  for (int i = 0; i < 5; ++i) node_data.push_back(points.middleRows(i, 1));
  const GmmParams init = init_params(points, 2, 5);
  const ProtocolRun run = run_federated_em(node_data, 2, 5, init, 5);
  const AdversaryView server = passive_view(run, {kServerNode});
  double worst = 0.0;
  for (int t = 0; t < 5; ++t) {
    const FederatedRecovery rec = reconstruct_federated(server, t, 2, 2);
    for (int node = 1; node <= 5; ++node) {
      worst = std::max(worst,
                       (rec.estimates.at(node) - points.row(node - 1).transpose())
                           .cwiseAbs()
                           .maxCoeff());
    }
  }
  double min_nmi = 1.0;
  for (int t = 0; t < meter.iters; ++t) min_nmi = std::min(min_nmi, mean_se(meter.nmi[0], t).mean);
  const bool pass = worst == 0.0 && min_nmi >= 0.9;
  char detail[256];
  std::snprintf(detail, sizeof(detail),
                "reconstruction error = %.1e (exact), min federated NMI over iterations = %.3f "
                "(>=0.9)",
                worst, min_nmi);
  report(3, "federated updates reveal the private data", pass, detail);
}

void criterion_ring_attack() {
  std::mt19937_64 rng(999);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd points(5, 2);
  for (int i = 0; i < 5; ++i) {
    for (int a = 0; a < 2; ++a) points(i, a) = normal(rng);
  }
  std::vector<Eigen::MatrixXd> node_data;
  for (int i = 0; i < 5; ++i) node_data.push_back(points.middleRows(i, 1));
  const GmmParams init = init_params(points, 2, 5);
  const ProtocolRun run = run_secure_sum_em(demo_graph(), node_data, 2, 10, init, 5);
  const AdversaryView view = passive_view(run, {2, 4});
  const SecureSumRecovery rec = reconstruct_secure_sum(view, run.cycle, run.chains, {2, 4});
  double worst = 0.0;
  bool complete = true;
  for (int t = 0; t < 10; ++t) {
    for (std::size_t ci = 0; ci < run.chains.size(); ++ci) {
      const auto& seg = rec.per_iter[t][ci];
      if (!seg.exact.count(3)) {
        complete = false;
        continue;
      }
      const RingChain& chain = run.chains[ci];
      const LocalUpdates& u = run.node_updates[t][2];
      Eigen::VectorXd truth;
      switch (chain.quantity) {
        case 'a': truth = vec1(u.mass[chain.component]); break;
        case 'b': truth = u.weighted_sum[chain.component]; break;
        default: truth = pack_upper(u.scatter[chain.component]); break;
      }
      const double scale = std::max(1.0, truth.cwiseAbs().maxCoeff());
      worst = std::max(worst, (seg.exact.at(3) - truth).cwiseAbs().maxCoeff() / scale);
    }
  }
  const bool pass = complete && worst <= 1e-12;
  char detail[128];
  std::snprintf(detail, sizeof(detail),
                "node 3 recovered at every iteration, max rel error = %.2e (<=1e-12)", worst);
  report(4, "ring-summation attack pins the wedged node", pass, detail);
}

void criterion_privacy_ordering(const MeterData& meter) {
  bool ordered = true;
  double min_gap_se = std::numeric_limits<double>::infinity();
  for (int t = 0; t < meter.iters; ++t) {
    const MeanSe fed = mean_se(meter.nmi[0], t);
    const MeanSe sec = mean_se(meter.nmi[1], t);
    const MeanSe sub = mean_se(meter.nmi[2], t);
    ordered = ordered && sub.mean < sec.mean && sec.mean < fed.mean;
    const double se_fs = std::max(std::hypot(fed.se, sec.se), 1e-300);
    const double se_ss = std::max(std::hypot(sec.se, sub.se), 1e-300);
    min_gap_se = std::min(min_gap_se, (fed.mean - sec.mean) / se_fs);
    min_gap_se = std::min(min_gap_se, (sec.mean - sub.mean) / se_ss);
  }
  const bool pass = ordered && min_gap_se > 3.0 && meter.seconds < 600.0;
  char detail[256];
  std::snprintf(detail, sizeof(detail),
                "subspace < ring < federated at every iteration, min gap = %.1f stderrs (>3), "
                "%.0fs (<600s)",
                min_gap_se, meter.seconds);
  report(5, "privacy ordering across the three protocols", pass, detail);
}

void criterion_estimator_calibration() {
  SeedStreams streams(77077);
  bool pass = true;
  std::ostringstream detail;
  std::uint64_t draw = 0;
  for (double rho : {0.3, 0.6, 0.9}) {
    const double truth = -0.5 * std::log(1.0 - rho * rho);
    double mean = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      std::mt19937_64 rng = streams.stream("calib", draw);
      std::normal_distribution<double> normal(0.0, 1.0);
      Eigen::MatrixXd x(10000, 1), y(10000, 1);
      const double co = std::sqrt(1.0 - rho * rho);
      for (int i = 0; i < 10000; ++i) {
        const double u = normal(rng);
        x(i, 0) = u;
        y(i, 0) = rho * u + co * normal(rng);
      }
      mean += ksg_mi(x, y, 3, streams.derive("calib-jitter", draw));
      ++draw;
    }
    mean /= 20.0;
    const double rel = std::abs(mean - truth) / truth;
    pass = pass && rel < 0.10;
    detail << "rho=" << rho << ": " << std::fixed;
    detail.precision(1);
    detail << 100.0 * rel << "% ";
    detail.unsetf(std::ios_base::floatfield);
  }
  report(6, "k-NN estimator within 10% of closed-form Gaussian MI", pass,
         detail.str() + "(mean of 20 reps at N=10^4)");
}

void criterion_invariants() {
  std::ostringstream why;
  bool pass = true;
  auto expect = [&](bool ok, const char* what) {
    if (!ok) {
      pass = false;
      why << what << "; ";
    }
  };
  std::mt19937_64 rng(31415);
  std::normal_distribution<double> normal(0.0, 2.0);
  std::uniform_real_distribution<double> unit(0.1, 1.0);

  // Responsibilities stay row-stochastic, including far-out means.
  for (int rep = 0; rep < 20; ++rep) {
    const int c = 1 + static_cast<int>(rng() % 3);
    GmmParams params;
    params.weights = Eigen::VectorXd(c);
    double total = 0.0;
    for (int j = 0; j < c; ++j) total += (params.weights[j] = unit(rng));
    params.weights /= total;
    for (int j = 0; j < c; ++j) {
      params.means.push_back(vec1(normal(rng) * (rep % 2 ? 500.0 : 1.0)));
      params.covariances.push_back(Eigen::MatrixXd::Identity(1, 1));
    }
    Eigen::MatrixXd pts(15, 1);
    for (int i = 0; i < 15; ++i) pts(i, 0) = normal(rng) * 100.0;
    const Responsibilities resp = e_step(pts, params);
    for (Eigen::Index p = 0; p < resp.rows(); ++p) {
      expect(std::abs(resp.row(p).sum() - 1.0) <= 1e-10, "row stochasticity");
    }
  }

  // EM monotonicity plus weight/covariance invariants on 100 instances.
  int checked = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 12 + static_cast<int>(rng() % 30);
    const int d = 1 + static_cast<int>(rng() % 2);
    const int c = 1 + static_cast<int>(rng() % 3);
    Eigen::MatrixXd pts(n, d);
    for (int i = 0; i < n; ++i) {
      for (int a = 0; a < d; ++a) pts(i, a) = normal(rng);
    }
    try {
      const EmTrace trace = centralized_em(pts, c, 6, init_params(pts, c, rng()));
      ++checked;
      for (std::size_t t = 1; t < trace.loglik.size(); ++t) {
        expect(trace.loglik[t] >= trace.loglik[t - 1] - 1e-9, "loglik monotonicity");
      }
      const GmmParams& last = trace.params.back();
      expect(std::abs(last.weights.sum() - 1.0) <= 1e-12, "weight normalization");
      for (int j = 0; j < c; ++j) {
        expect((last.covariances[j] - last.covariances[j].transpose()).cwiseAbs().maxCoeff() <=
                   1e-12,
               "covariance symmetry");
        expect(Eigen::LLT<Eigen::MatrixXd>(last.covariances[j]).info() == Eigen::Success,
               "covariance positive definiteness");
      }
    } catch (const EmptyComponent&) {
    }
  }
  expect(checked >= 60, "enough EM instances survived");

  // Distributed aggregation equals the pooled M-step at 1e-12.
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 10 + static_cast<int>(rng() % 40);
    Eigen::MatrixXd pts(n, 2);
    for (int i = 0; i < n; ++i) {
      for (int a = 0; a < 2; ++a) pts(i, a) = normal(rng);
    }
    const GmmParams params = init_params(pts, 2, rng());
    const Responsibilities resp = e_step(pts, params);
    const LocalUpdates pooled = local_updates(pts, resp, params.means);
    std::vector<LocalUpdates> nodes;
    for (Eigen::Index pos = 0; pos < n; pos += 3) {
      const Eigen::Index size = std::min<Eigen::Index>(3, n - pos);
      nodes.push_back(
          local_updates(pts.middleRows(pos, size), resp.middleRows(pos, size), params.means));
    }
    const GmmParams a = global_update(sum_local_updates(nodes), 1e-9);
    const GmmParams b = global_update(sum_local_updates({pooled}), 1e-9);
    for (int j = 0; j < 2; ++j) {
      expect(std::abs(a.weights[j] - b.weights[j]) <=
                 1e-12 * std::max(1.0, std::abs(b.weights[j])),
             "distributed-equals-pooled weights");
      expect((a.means[j] - b.means[j]).cwiseAbs().maxCoeff() <=
                 1e-12 * (1.0 + b.means[j].cwiseAbs().maxCoeff()),
             "distributed-equals-pooled means");
    }
  }

  // Edge signs, the demo Hamiltonian cycle, and the honest-subgraph gate.
  const Graph g = demo_graph();
  for (const auto& e : edge_signs(g).entries) {
    expect(e.sign + edge_sign(e.j, e.i) == 0.0, "edge sign antisymmetry");
  }
  const auto cycle = find_hamiltonian_cycle(g);
  expect(cycle.has_value() && *cycle == std::vector<int>{1, 2, 3, 4, 5}, "demo cycle 1-2-3-4-5");
  if (cycle) {
    for (std::size_t i = 0; i < cycle->size(); ++i) {
      expect(g.has_edge((*cycle)[i], (*cycle)[(i + 1) % 5]), "cycle uses existing edges");
    }
  }
  expect(is_connected(remove_nodes(g, {2, 4})), "honest subgraph {1,3,5} connected");
  bool gate = false;
  try {
    remove_nodes(g, {1, 3, 4});
    gate = !is_connected(remove_nodes(g, {1, 3, 4}));
  } catch (...) {
  }
  expect(gate, "honest subgraph {2,5} disconnected");

  report(7, "invariant suites", pass, pass ? "all invariant groups hold" : why.str());
}

void criterion_determinism() {
  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() / "ppdem_acceptance";
  fs::remove_all(base);
  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  auto rerun_identical = [&](auto&& command, ppdem::cli::ExperimentConfig config,
                             const std::string& tag) {
    config.output_dir = (base / tag).string();
    const auto first = command(config);
    std::vector<std::string> before;
    for (const auto& p : first) before.push_back(slurp(p));
    const auto second = command(config);
    if (first != second) return false;
    for (std::size_t i = 0; i < second.size(); ++i) {
      if (slurp(second[i]) != before[i]) return false;
    }
    return true;
  };

  ppdem::cli::ExperimentConfig graph_config;
  graph_config.graph_type = "geometric";
  graph_config.graph_n = 30;
  graph_config.seed = 99;

  ppdem::cli::ExperimentConfig em_config;
  em_config.graph_type = "fig1";
  em_config.protocol = "subspace";
  em_config.data_type = "synthetic";
  em_config.synthetic_points = 20;
  em_config.synthetic_features = 4;
  em_config.pca_k = 2;
  em_config.components = 2;
  em_config.iters = 2;
  em_config.seed = 99;

  ppdem::cli::ExperimentConfig audit_config;
  audit_config.graph_type = "fig1";
  audit_config.protocols = {"federated", "subspace"};
  audit_config.corrupt = {2, 4};
  audit_config.trials = 1000;
  audit_config.repetitions = 2;
  audit_config.audit_iters = 2;
  audit_config.seed = 99;

  ppdem::cli::ExperimentConfig calib_config;
  calib_config.calib_rho = {0.6};
  calib_config.calib_samples = {800};
  calib_config.calib_repetitions = 2;
  calib_config.seed = 99;

  const bool pass = rerun_identical(ppdem::cli::cmd_graph_gen, graph_config, "graph") &&
                    rerun_identical(ppdem::cli::cmd_em_run, em_config, "em") &&
                    rerun_identical(ppdem::cli::cmd_privacy_audit, audit_config, "audit") &&
                    rerun_identical(ppdem::cli::cmd_calibrate_mi, calib_config, "calib");
  report(8, "byte-identical reruns from embedded configs", pass,
         pass ? "graph-gen, em-run, privacy-audit, calibrate-mi all reproduce byte-for-byte"
              : "at least one command produced different bytes on rerun");
}

}  // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();
  try {
    criterion_output_correctness();
    criterion_accuracy_independence();
    const MeterData meter = run_meter(10000, 10, 10);
    criterion_federated_leakage(meter);
    criterion_ring_attack();
    criterion_privacy_ordering(meter);
    criterion_estimator_calibration();
    criterion_invariants();
    criterion_determinism();
  } catch (const std::exception& e) {
    std::printf("[FAIL] acceptance suite aborted: %s\n", e.what());
    return 99;
  }
  std::printf("acceptance: %d criterion(s) failed, total %.0fs\n", failures,
              elapsed_seconds(start));
  return failures;
}
