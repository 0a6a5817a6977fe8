#include <doctest.h>

#include <cmath>
#include <random>

#include "ppdem/data.hpp"
#include "ppdem/errors.hpp"
#include "ppdem/gmm.hpp"
#include "ppdem/numeric.hpp"
#include "ppdem/protocols.hpp"
#include "test_support.hpp"

using namespace ppdem;

namespace {

struct Fixture {
  Eigen::MatrixXd points;             // pooled, PCA-reduced
  std::vector<Eigen::MatrixXd> node_data;
  GmmParams init;
  EmTrace oracle;
  int c = 2;
  int iters = 10;
};

Fixture make_fixture(int n_nodes, int iters = 10, std::uint64_t seed = 4242) {
  GmmParams truth;
  truth.weights = Eigen::VectorXd::Constant(2, 0.5);
  Eigen::VectorXd m0 = Eigen::VectorXd::Constant(5, -3.0);
  Eigen::VectorXd m1 = Eigen::VectorXd::Constant(5, 3.0);
  truth.means = {m0, m1};
  truth.covariances = {Eigen::MatrixXd::Identity(5, 5), Eigen::MatrixXd::Identity(5, 5)};
  Fixture f;
  f.iters = iters;
  f.points = pca(synthetic_gmm_data(truth, 60, seed).points, 2).projected;
  f.node_data = assign_contiguous_blocks(f.points, n_nodes);
  f.init = init_params(f.points, f.c, seed + 1);
  f.oracle = centralized_em(f.points, f.c, iters, f.init);
  return f;
}

double max_abs_dev(const std::vector<double>& a, const std::vector<double>& b) {
  double dev = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dev = std::max(dev, std::abs(a[i] - b[i]));
  return dev;
}

}  // namespace

TEST_CASE("federated EM equals the single-site oracle to machine precision") {
  const Fixture f = make_fixture(5);
  const ProtocolRun run = run_federated_em(f.node_data, f.c, f.iters, f.init, 1);
  REQUIRE(run.loglik.size() == f.oracle.loglik.size());
  CHECK(max_abs_dev(run.loglik, f.oracle.loglik) < 1e-12);
  for (std::size_t t = 0; t < run.trajectory.size(); ++t) {
    for (int j = 0; j < f.c; ++j) {
      CHECK(std::abs(run.trajectory[t].weights[j] - f.oracle.params[t].weights[j]) < 1e-12);
      CHECK((run.trajectory[t].means[j] - f.oracle.params[t].means[j]).cwiseAbs().maxCoeff() <
            1e-12);
    }
  }
}

TEST_CASE("federated transcript holds n*T uploads and T broadcasts") {
  const Fixture f = make_fixture(5, 4);
  const ProtocolRun run = run_federated_em(f.node_data, f.c, 4, f.init, 1);
  int uploads = 0, broadcasts = 0;
  for (const Message& m : run.transcript.messages()) {
    if (m.kind == MessageKind::kLocalUpdateUpload) {
      ++uploads;
      CHECK(m.to == std::vector<int>{kServerNode});
      CHECK_FALSE(m.encrypted);
    } else {
      CHECK(m.kind == MessageKind::kGlobalBroadcast);
      ++broadcasts;
      CHECK(m.from == kServerNode);
    }
  }
  CHECK(uploads == 5 * 4);
  CHECK(broadcasts == 4);
}

TEST_CASE("ring summation EM equals the oracle and cancels its masks") {
  const Fixture f = make_fixture(5);
  const ProtocolRun run = run_secure_sum_em(demo_graph(), f.node_data, f.c, f.iters, f.init, 9);
  CHECK(run.cycle == std::vector<int>{1, 2, 3, 4, 5});
  CHECK(max_abs_dev(run.loglik, f.oracle.loglik) < 1e-12);
}

TEST_CASE("ring relays carry masked prefixes; the broadcast matches the true sum") {
  const Fixture f = make_fixture(5, 3);
  const ProtocolRun run = run_secure_sum_em(demo_graph(), f.node_data, f.c, 3, f.init, 9);
  const int n = 5;
  for (int t = 0; t < 3; ++t) {
    for (std::size_t ci = 0; ci < run.chains.size(); ++ci) {
      const RingChain& chain = run.chains[ci];
      // Ground truth: node values along the cycle plus the recorded mask.
      auto value_at = [&](int pos) -> Eigen::VectorXd {
        const LocalUpdates& u = run.node_updates[t][run.cycle[pos] - 1];
        switch (chain.quantity) {
          case 'a': {
            Eigen::VectorXd v(1);
            v[0] = u.mass[chain.component];
            return v;
          }
          case 'b': return u.weighted_sum[chain.component];
          default: return Eigen::VectorXd(pack_upper(u.scatter[chain.component]));
        }
      };
      Eigen::VectorXd expected = run.ring_masks[t][ci];
      Eigen::VectorXd true_sum = Eigen::VectorXd::Zero(chain.dim);
      const Message* broadcast = nullptr;
      for (const Message& m : run.transcript.messages()) {
        if (m.em_iter != t) continue;
        if (m.kind == MessageKind::kRingRelay &&
            m.round >= ring_round(ci, 0, n) && m.round < ring_round(ci, n, n)) {
          const int hop = m.round - ring_round(ci, 0, n);
          expected += value_at(hop);
          true_sum += value_at(hop);
          const Eigen::VectorXd carried = m.payload.head(chain.dim) + m.payload.tail(chain.dim);
          CHECK((carried - expected).cwiseAbs().maxCoeff() <=
                1e-9 * std::max(1.0, expected.cwiseAbs().maxCoeff()));
          CHECK(m.from == run.cycle[hop]);
          CHECK(m.to == std::vector<int>{run.cycle[(hop + 1) % n]});
        } else if (m.kind == MessageKind::kSumBroadcast && m.round == ring_round(ci, n, n)) {
          broadcast = &m;
        }
      }
      REQUIRE(broadcast != nullptr);
      CHECK((broadcast->payload - true_sum).cwiseAbs().maxCoeff() <=
            1e-12 * std::max(1.0, true_sum.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("with all-zero data the weighted-sum relays carry exactly the mask") {
  // Identical points at the origin: every b contribution is 0 * 0 = 0.
  std::vector<Eigen::MatrixXd> node_data(5, Eigen::MatrixXd::Zero(1, 1));
  GmmParams init;
  init.weights = Eigen::VectorXd::Constant(1, 1.0);
  init.means = {Eigen::VectorXd::Zero(1)};
  init.covariances = {Eigen::MatrixXd::Identity(1, 1)};
  SecureSumOptions opts;
  opts.em.cov_reg = 1e-6;
  const ProtocolRun run = run_secure_sum_em(demo_graph(), node_data, 1, 1, init, 3, opts);
  for (const Message& m : run.transcript.messages()) {
    if (m.kind != MessageKind::kRingRelay) continue;
    const std::size_t ci = m.round / 6;
    if (run.chains[ci].quantity != 'b') continue;
    const Eigen::VectorXd carried = m.payload.head(1) + m.payload.tail(1);
    CHECK(carried[0] == run.ring_masks[0][ci][0]);
  }
}

TEST_CASE("ring summation needs a Hamiltonian cycle") {
  const Graph star(5, {{1, 2}, {1, 3}, {1, 4}, {1, 5}});
  const Fixture f = make_fixture(5, 2);
  CHECK_THROWS_AS(run_secure_sum_em(star, f.node_data, f.c, 2, f.init, 1), NoHamiltonianCycle);
}

TEST_CASE("subspace EM tracks the oracle at tight consensus tolerance") {
  const Fixture f = make_fixture(5, 8);
  SubspaceOptions opts;
  opts.consensus.tol = 1e-10;
  opts.transcript = TranscriptPolicy::kOff;
  opts.consensus.transcript = TranscriptPolicy::kOff;
  const ProtocolRun run =
      run_subspace_em(demo_graph(), f.node_data, f.c, 8, f.init, 100.0, 5, opts);
  const EmTrace oracle = centralized_em(f.points, f.c, 8, f.init);
  CHECK(max_abs_dev(run.loglik, oracle.loglik) < 1e-6);
  CHECK(run.consensus_iters.size() == 8);
  // Consensus-level noise must not break the parameter invariants.
  for (const GmmParams& p : run.trajectory) p.validate();
}

TEST_CASE("dual noise does not move the subspace trajectory") {
  const Fixture f = make_fixture(5, 6);
  SubspaceOptions opts;
  opts.consensus.tol = 1e-10;
  opts.transcript = TranscriptPolicy::kOff;
  opts.consensus.transcript = TranscriptPolicy::kOff;
  const ProtocolRun quiet = run_subspace_em(demo_graph(), f.node_data, f.c, 6, f.init, 0.0, 5, opts);
  const ProtocolRun noisy =
      run_subspace_em(demo_graph(), f.node_data, f.c, 6, f.init, 1000.0, 5, opts);
  CHECK(max_abs_dev(quiet.loglik, noisy.loglik) < 1e-6);
}

TEST_CASE("one-component subspace EM reduces to plain averaging") {
  std::mt19937_64 rng(15);
  const Eigen::MatrixXd pts = test::random_points(5, 2, rng);
  const auto node_data = test::one_point_per_node(pts);
  GmmParams init;
  init.weights = Eigen::VectorXd::Constant(1, 1.0);
  init.means = {Eigen::VectorXd::Zero(2)};
  init.covariances = {Eigen::MatrixXd::Identity(2, 2)};
  SubspaceOptions opts;
  opts.consensus.tol = 1e-10;
  const ProtocolRun run = run_subspace_em(demo_graph(), node_data, 1, 1, init, 10.0, 7, opts);
  const Eigen::VectorXd mean = pts.colwise().mean().transpose();
  CHECK((run.trajectory[1].means[0] - mean).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(run.trajectory[1].weights[0] == 1.0);
}

TEST_CASE("subspace deviation shrinks monotonically with the consensus tolerance") {
  const Fixture f = make_fixture(5, 6);
  double previous = std::numeric_limits<double>::infinity();
  for (double tol : {1e-4, 1e-6, 1e-8}) {
    SubspaceOptions opts;
    opts.consensus.tol = tol;
    opts.transcript = TranscriptPolicy::kOff;
    opts.consensus.transcript = TranscriptPolicy::kOff;
    const ProtocolRun run =
        run_subspace_em(demo_graph(), f.node_data, f.c, 6, f.init, 100.0, 5, opts);
    const EmTrace oracle = centralized_em(f.points, f.c, 6, f.init);
    const double dev = max_abs_dev(run.loglik, oracle.loglik);
    CHECK(dev < previous);
    previous = dev;
  }
}

TEST_CASE("all drivers consume the same init and assignment") {
  const Fixture f = make_fixture(5, 3);
  SubspaceOptions sopts;
  sopts.consensus.tol = 1e-9;
  sopts.transcript = TranscriptPolicy::kOff;
  sopts.consensus.transcript = TranscriptPolicy::kOff;
  const ProtocolRun fed = run_federated_em(f.node_data, f.c, 3, f.init, 1);
  const ProtocolRun ring = run_secure_sum_em(demo_graph(), f.node_data, f.c, 3, f.init, 1);
  const ProtocolRun sub = run_subspace_em(demo_graph(), f.node_data, f.c, 3, f.init, 10.0, 1, sopts);
  CHECK(fed.loglik[0] == ring.loglik[0]);
  CHECK(fed.loglik[0] == sub.loglik[0]);
  // Exact aggregation: federated and ring trajectories are bit-identical.
  CHECK(max_abs_dev(fed.loglik, ring.loglik) == 0.0);
}
