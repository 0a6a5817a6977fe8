#include "ppdem/protocols.hpp"

#include <cmath>
#include <random>

#include "ppdem/errors.hpp"
#include "ppdem/numeric.hpp"
#include "ppdem/rng.hpp"

namespace ppdem {

std::string_view to_string(ProtocolKind kind) {
  switch (kind) {
    case ProtocolKind::kFederated: return "federated";
    case ProtocolKind::kSecureSum: return "secure-sum";
    case ProtocolKind::kSubspace: return "subspace";
  }
  return "unknown";
}

ProtocolKind protocol_from_string(std::string_view s) {
  if (s == "federated") return ProtocolKind::kFederated;
  if (s == "secure-sum" || s == "secure_sum") return ProtocolKind::kSecureSum;
  if (s == "subspace") return ProtocolKind::kSubspace;
  throw InvalidArgument("unknown protocol: " + std::string(s));
}

std::vector<RingChain> ring_chain_layout(int c, int d) {
  std::vector<RingChain> chains;
  chains.reserve(3 * c);
  for (int j = 0; j < c; ++j) {
    chains.push_back({j, 'a', 1});
    chains.push_back({j, 'b', d});
    chains.push_back({j, 'C', static_cast<int>(packed_upper_size(d))});
  }
  return chains;
}

int ring_round(int chain, int hop, int n_nodes) { return chain * (n_nodes + 1) + hop; }

Eigen::MatrixXd ProtocolRun::pooled_points() const {
  Eigen::Index rows = 0;
  const Eigen::Index cols = node_data.empty() ? 0 : node_data.front().cols();
  for (const auto& block : node_data) rows += block.rows();
  Eigen::MatrixXd pooled(rows, cols);
  Eigen::Index pos = 0;
  for (const auto& block : node_data) {
    pooled.middleRows(pos, block.rows()) = block;
    pos += block.rows();
  }
  return pooled;
}

namespace {

struct RunScaffold {
  Eigen::MatrixXd pooled;
  long total_points = 0;
  int dim = 0;
  double cov_reg = 0.0;
};

RunScaffold prepare(const std::vector<Eigen::MatrixXd>& node_data, int c, const EmOptions& em) {
  if (node_data.empty()) throw InvalidArgument("need at least one node");
  RunScaffold s;
  s.dim = static_cast<int>(node_data.front().cols());
  for (const auto& block : node_data) {
    if (block.rows() < 1) throw InvalidArgument("every node must hold at least one point");
    if (block.cols() != s.dim) throw InvalidArgument("point dimensions differ across nodes");
    s.total_points += block.rows();
  }
  if (s.total_points < c) throw InvalidArgument("fewer points than components");
  s.pooled.resize(s.total_points, s.dim);
  Eigen::Index pos = 0;
  for (const auto& block : node_data) {
    s.pooled.middleRows(pos, block.rows()) = block;
    pos += block.rows();
  }
  s.cov_reg = resolve_cov_reg(s.pooled, em);
  return s;
}

// Per-node E-step + local updates against the current parameters.
std::vector<LocalUpdates> node_round(const std::vector<Eigen::MatrixXd>& node_data,
                                     const GmmParams& params) {
  std::vector<LocalUpdates> updates;
  updates.reserve(node_data.size());
  for (const auto& block : node_data) {
    const Responsibilities resp = e_step(block, params);
    updates.push_back(local_updates(block, resp, params.means));
  }
  return updates;
}

}  // namespace

ProtocolRun run_federated_em(const std::vector<Eigen::MatrixXd>& node_data, int c, int iters,
                             const GmmParams& init, std::uint64_t /*seed*/,
                             const FederatedOptions& options) {
  const RunScaffold scaffold = prepare(node_data, c, options.em);
  const int n = static_cast<int>(node_data.size());
  ProtocolRun run;
  run.protocol = ProtocolKind::kFederated;
  run.node_data = node_data;
  run.cov_reg = scaffold.cov_reg;
  run.trajectory.push_back(init);
  run.loglik.push_back(log_likelihood(scaffold.pooled, init));
  for (int t = 0; t < iters; ++t) {
    const GmmParams& current = run.trajectory.back();
    std::vector<LocalUpdates> updates = node_round(node_data, current);
    std::vector<LocalUpdates> received;
    received.reserve(n);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd wire = stack_updates(updates[i]);
      if (options.transcript == TranscriptPolicy::kFull) {
        Message m;
        m.em_iter = t;
        m.round = 0;
        m.from = i + 1;
        m.to = {kServerNode};
        m.kind = MessageKind::kLocalUpdateUpload;
        m.payload = wire;
        run.transcript.record(std::move(m));
      }
      received.push_back(unstack_updates(wire, c, scaffold.dim, updates[i].points));
    }
    const GlobalSums sums = sum_local_updates(received);
    GmmParams next = global_update(sums, scaffold.cov_reg, options.em.component_death_rel);
    if (options.transcript == TranscriptPolicy::kFull) {
      Message m;
      m.em_iter = t;
      m.round = 1;
      m.from = kServerNode;
      m.kind = MessageKind::kGlobalBroadcast;
      for (int i = 1; i <= n; ++i) m.to.push_back(i);
      m.payload = stack_params(next);
      run.transcript.record(std::move(m));
    }
    run.node_updates.push_back(std::move(updates));
    run.loglik.push_back(log_likelihood(scaffold.pooled, next));
    run.trajectory.push_back(std::move(next));
  }
  return run;
}

namespace {

Eigen::VectorXd chain_value(const LocalUpdates& u, const RingChain& chain) {
  switch (chain.quantity) {
    case 'a': {
      Eigen::VectorXd v(1);
      v[0] = u.mass[chain.component];
      return v;
    }
    case 'b':
      return u.weighted_sum[chain.component];
    default:
      return pack_upper(u.scatter[chain.component]);
  }
}

}  // namespace

ProtocolRun run_secure_sum_em(const Graph& graph, const std::vector<Eigen::MatrixXd>& node_data,
                              int c, int iters, const GmmParams& init, std::uint64_t seed,
                              const SecureSumOptions& options) {
  if (graph.node_count() != static_cast<int>(node_data.size())) {
    throw InvalidArgument("one data block per graph node required");
  }
  const RunScaffold scaffold = prepare(node_data, c, options.em);
  const auto cycle = find_hamiltonian_cycle(graph);
  if (!cycle) throw NoHamiltonianCycle("graph has no Hamiltonian cycle");
  const int n = graph.node_count();
  const int d = scaffold.dim;

  const double data_rms = std::sqrt(scaffold.pooled.squaredNorm() /
                                    static_cast<double>(scaffold.pooled.size()));
  const double sigma_r = options.mask_scale_factor * (data_rms > 0 ? data_rms : 1.0);

  ProtocolRun run;
  run.protocol = ProtocolKind::kSecureSum;
  run.graph = graph;
  run.node_data = node_data;
  run.cycle = *cycle;
  run.chains = ring_chain_layout(c, d);
  run.cov_reg = scaffold.cov_reg;
  run.mask_sigma = sigma_r;
  run.trajectory.push_back(init);
  run.loglik.push_back(log_likelihood(scaffold.pooled, init));

  SeedStreams streams(seed);
  for (int t = 0; t < iters; ++t) {
    const GmmParams& current = run.trajectory.back();
    std::vector<LocalUpdates> updates = node_round(node_data, current);

    std::mt19937_64 mask_rng = streams.stream("ring-masks", t);
    std::normal_distribution<double> noise(0.0, sigma_r);
    std::vector<Eigen::VectorXd> masks;
    masks.reserve(run.chains.size());

    GlobalSums sums;
    sums.mass = Eigen::VectorXd::Zero(c);
    sums.weighted_sum.assign(c, Eigen::VectorXd::Zero(d));
    sums.scatter.assign(c, Eigen::MatrixXd::Zero(d, d));
    sums.total_points = scaffold.total_points;

    for (std::size_t ci = 0; ci < run.chains.size(); ++ci) {
      const RingChain& chain = run.chains[ci];
      Eigen::VectorXd mask(chain.dim);
      for (int a = 0; a < chain.dim; ++a) mask[a] = noise(mask_rng);
      masks.push_back(mask);

      // The initiator starts the loop with value + mask; every node adds its
      // own contribution; the initiator strips the mask and broadcasts.
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(chain.dim);
      Eigen::VectorXd comp = Eigen::VectorXd::Zero(chain.dim);
      auto add = [&](const Eigen::VectorXd& v) {
        for (int a = 0; a < chain.dim; ++a) neumaier_add(sum[a], comp[a], v[a]);
      };
      for (int hop = 0; hop < n; ++hop) {
        const int sender = (*cycle)[hop];
        const int receiver = (*cycle)[(hop + 1) % n];
        add(chain_value(updates[graph.node_position(sender)], chain));
        if (hop == 0) add(mask);
        if (options.transcript == TranscriptPolicy::kFull) {
          Message m;
          m.em_iter = t;
          m.round = ring_round(static_cast<int>(ci), hop, n);
          m.from = sender;
          m.to = {receiver};
          m.kind = MessageKind::kRingRelay;
          m.encrypted = options.encrypt_relays;
          m.payload.resize(2 * chain.dim);
          m.payload.head(chain.dim) = sum;
          m.payload.tail(chain.dim) = comp;
          run.transcript.record(std::move(m));
        }
      }
      add(-mask);
      const Eigen::VectorXd total = sum + comp;
      if (options.transcript == TranscriptPolicy::kFull) {
        Message m;
        m.em_iter = t;
        m.round = ring_round(static_cast<int>(ci), n, n);
        m.from = (*cycle)[0];
        for (int node : graph.nodes()) {
          if (node != (*cycle)[0]) m.to.push_back(node);
        }
        m.kind = MessageKind::kSumBroadcast;
        m.payload = total;
        run.transcript.record(std::move(m));
      }
      switch (chain.quantity) {
        case 'a': sums.mass[chain.component] = total[0]; break;
        case 'b': sums.weighted_sum[chain.component] = total; break;
        default: sums.scatter[chain.component] = unpack_upper(total, d); break;
      }
    }
    run.ring_masks.push_back(std::move(masks));
    GmmParams next = global_update(sums, scaffold.cov_reg, options.em.component_death_rel);
    run.node_updates.push_back(std::move(updates));
    run.loglik.push_back(log_likelihood(scaffold.pooled, next));
    run.trajectory.push_back(std::move(next));
  }
  return run;
}

ProtocolRun run_subspace_em(const Graph& graph, const std::vector<Eigen::MatrixXd>& node_data,
                            int c, int iters, const GmmParams& init, double sigma_lambda,
                            std::uint64_t seed, const SubspaceOptions& options) {
  if (graph.node_count() != static_cast<int>(node_data.size())) {
    throw InvalidArgument("one data block per graph node required");
  }
  const RunScaffold scaffold = prepare(node_data, c, options.em);
  const int n = graph.node_count();
  const int d = scaffold.dim;

  ProtocolRun run;
  run.protocol = ProtocolKind::kSubspace;
  run.graph = graph;
  run.node_data = node_data;
  run.cov_reg = scaffold.cov_reg;
  run.trajectory.push_back(init);
  run.loglik.push_back(log_likelihood(scaffold.pooled, init));

  SeedStreams streams(seed);
  for (int t = 0; t < iters; ++t) {
    const GmmParams& current = run.trajectory.back();
    std::vector<LocalUpdates> updates = node_round(node_data, current);

    ConsensusProblem problem;
    problem.graph = graph;
    problem.rho = options.rho;
    problem.inputs.reserve(n);
    for (const LocalUpdates& u : updates) problem.inputs.push_back(stack_updates(u));

    ConsensusOptions copts = options.consensus;
    copts.sigma_lambda = sigma_lambda;
    copts.transcript = options.transcript == TranscriptPolicy::kOff ? TranscriptPolicy::kOff
                                                                    : copts.transcript;
    copts.em_iter = t;
    const ConsensusResult consensus =
        run_consensus(problem, copts, streams.derive("subspace-consensus", t));
    run.consensus_iters.push_back(consensus.iterations);
    run.transcript.append(consensus.transcript);

    // Every node assembles the refreshed parameters from its own averages;
    // the recorded trajectory uses the lowest-label node's copy. Weights are
    // normalized by the total average mass, which equals dividing the mass
    // sum by the total point count.
    const Eigen::VectorXd& avg = consensus.averages.front();
    const LocalUpdates averages = unstack_updates(avg, c, d, 0);
    const double mass_avg_total = averages.mass.sum();
    GmmParams next;
    next.weights = Eigen::VectorXd(c);
    const double death =
        options.em.component_death_rel * static_cast<double>(scaffold.total_points);
    for (int j = 0; j < c; ++j) {
      const double mass_estimate = averages.mass[j] * static_cast<double>(n);
      if (mass_estimate <= death) throw EmptyComponent(j, mass_estimate);
      next.weights[j] = averages.mass[j] / mass_avg_total;
      next.means.push_back(averages.weighted_sum[j] / averages.mass[j]);
      Eigen::MatrixXd cov = averages.scatter[j] / averages.mass[j];
      cov.diagonal().array() += scaffold.cov_reg;
      next.covariances.push_back(std::move(cov));
    }
    run.node_updates.push_back(std::move(updates));
    run.loglik.push_back(log_likelihood(scaffold.pooled, next));
    run.trajectory.push_back(std::move(next));
  }
  return run;
}

}  // namespace ppdem
