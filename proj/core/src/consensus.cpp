#include "ppdem/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ppdem/errors.hpp"
#include "ppdem/rng.hpp"

namespace ppdem {

namespace {

void check_problem(const ConsensusProblem& p) {
  if (p.inputs.size() != static_cast<std::size_t>(p.graph.node_count())) {
    throw InvalidArgument("one input vector per node required");
  }
  if (p.inputs.empty()) throw InvalidArgument("empty consensus problem");
  const Eigen::Index q = p.inputs.front().size();
  for (const auto& s : p.inputs) {
    if (s.size() != q) throw InvalidArgument("input dimensions differ across nodes");
  }
  if (!(p.rho > 0)) throw InvalidArgument("rho must be positive");
  if (!is_connected(p.graph)) throw InvalidArgument("consensus needs a connected graph");
}

std::vector<Eigen::VectorXd> true_mean_oracle(const ConsensusProblem& p) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(p.inputs.front().size());
  for (const auto& s : p.inputs) mean += s;
  mean /= static_cast<double>(p.inputs.size());
  return std::vector<Eigen::VectorXd>(p.inputs.size(), mean);
}

double stacked_distance(const std::vector<Eigen::VectorXd>& a,
                        const std::vector<Eigen::VectorXd>& b) {
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sq += (a[i] - b[i]).squaredNorm();
  return std::sqrt(sq);
}

Eigen::VectorXd stack_duals(const std::vector<Eigen::VectorXd>& lambda) {
  Eigen::Index total = 0;
  for (const auto& l : lambda) total += l.size();
  Eigen::VectorXd out(total);
  Eigen::Index k = 0;
  for (const auto& l : lambda) {
    out.segment(k, l.size()) = l;
    k += l.size();
  }
  return out;
}

}  // namespace

int dual_slot(const Graph& g, int i, int j) {
  const int l = g.edge_index(i, j);
  if (l < 0) throw InvalidArgument("no edge between " + std::to_string(i) + " and " + std::to_string(j));
  return i < j ? l : l + g.edge_count();
}

DualInit init_duals(const Graph& g, int q, double sigma_lambda, std::uint64_t seed, int em_iter) {
  if (sigma_lambda < 0) throw InvalidArgument("sigma_lambda must be non-negative");
  DualInit init;
  init.lambda.assign(2 * g.edge_count(), Eigen::VectorXd::Zero(q));
  std::mt19937_64 rng(SeedStreams(seed).derive("dual-init"));
  std::normal_distribution<double> noise(0.0, 1.0);
  // Draw in a fixed order: per edge, first the (lo|hi) direction.
  for (int pass = 0; pass < 2; ++pass) {
    for (int l = 0; l < g.edge_count(); ++l) {
      const auto [lo, hi] = g.edges()[l];
      const int from = pass == 0 ? lo : hi;
      const int to = pass == 0 ? hi : lo;
      Eigen::VectorXd v = Eigen::VectorXd::Zero(q);
      if (sigma_lambda > 0) {
        for (Eigen::Index a = 0; a < q; ++a) v[a] = sigma_lambda * noise(rng);
      }
      init.lambda[dual_slot(g, from, to)] = v;
      Message m;
      m.em_iter = em_iter;
      m.round = 0;
      m.from = from;
      m.to = {to};
      m.kind = MessageKind::kDualInit;
      m.encrypted = true;
      m.payload = v;
      init.transcript.record(std::move(m));
    }
  }
  return init;
}

Eigen::VectorXd pdmm_primal_update(const ConsensusProblem& problem,
                                   const ConsensusState& state, int node) {
  const Graph& g = problem.graph;
  const int pos = g.node_position(node);
  if (pos < 0) throw InvalidArgument("unknown node " + std::to_string(node));
  Eigen::VectorXd acc = problem.inputs[pos];
  for (int nb : g.neighbors(node)) {
    const int nb_pos = g.node_position(nb);
    acc += problem.rho * state.y[nb_pos] -
           edge_sign(node, nb) * state.lambda[dual_slot(g, nb, node)];
  }
  return acc / (1.0 + problem.rho * g.degree(node));
}

Eigen::VectorXd pdmm_dual_update(const ConsensusProblem& problem,
                                 const ConsensusState& state, int broadcaster,
                                 int neighbor, const Eigen::VectorXd& y_new) {
  const Graph& g = problem.graph;
  const int nb_pos = g.node_position(neighbor);
  return state.lambda[dual_slot(g, neighbor, broadcaster)] +
         problem.rho * edge_sign(broadcaster, neighbor) * (y_new - state.y[nb_pos]);
}

namespace {

struct Engine {
  const ConsensusProblem& problem;
  const ConsensusOptions& options;
  ConsensusState state;
  ConsensusResult result;
  std::vector<Eigen::VectorXd> target;  // oracle mean, when used

  Engine(const ConsensusProblem& p, const ConsensusOptions& o, std::vector<Eigen::VectorXd> lambda0,
         Transcript init_transcript)
      : problem(p), options(o) {
    state.y = p.inputs;
    state.lambda = std::move(lambda0);
    if (options.transcript == TranscriptPolicy::kFull) {
      result.transcript = std::move(init_transcript);
    }
    if (options.stop == StopRule::kOracleResidual) target = true_mean_oracle(p);
    if (options.record_dual_trajectory) result.dual_trajectory.push_back(state.lambda);
  }

  double residual(const std::vector<Eigen::VectorXd>& previous) const {
    if (options.stop == StopRule::kOracleResidual) return stacked_distance(state.y, target);
    return stacked_distance(state.y, previous);
  }

  void record_broadcast(int node, int round, const Eigen::VectorXd& payload) {
    if (options.transcript != TranscriptPolicy::kFull) return;
    Message m;
    m.em_iter = options.em_iter;
    m.round = round;
    m.from = node;
    m.to = problem.graph.neighbors(node);
    m.kind = MessageKind::kPrimalBroadcast;
    m.encrypted = false;
    m.payload = payload;
    result.transcript.record(std::move(m));
  }

  void sync_round(int round) {
    const Graph& g = problem.graph;
    std::vector<Eigen::VectorXd> y_new(state.y.size());
    for (int pos = 0; pos < g.node_count(); ++pos) {
      y_new[pos] = pdmm_primal_update(problem, state, g.nodes()[pos]);
      record_broadcast(g.nodes()[pos], round, y_new[pos]);
    }
    std::vector<Eigen::VectorXd> lambda_new = state.lambda;
    for (int node : g.nodes()) {
      for (int nb : g.neighbors(node)) {
        lambda_new[dual_slot(g, node, nb)] =
            pdmm_dual_update(problem, state, node, nb, y_new[g.node_position(node)]);
      }
    }
    state.y = std::move(y_new);
    state.lambda = std::move(lambda_new);
    if (options.record_dual_trajectory) result.dual_trajectory.push_back(state.lambda);
  }

  void async_tick(int node, int round) {
    const Graph& g = problem.graph;
    const Eigen::VectorXd y_new = pdmm_primal_update(problem, state, node);
    record_broadcast(node, round, y_new);
    for (int nb : g.neighbors(node)) {
      state.lambda[dual_slot(g, node, nb)] = pdmm_dual_update(problem, state, node, nb, y_new);
    }
    state.y[g.node_position(node)] = y_new;
  }
};

}  // namespace

ConsensusResult run_consensus(const ConsensusProblem& problem, const ConsensusOptions& options,
                              std::uint64_t seed) {
  check_problem(problem);
  const Eigen::Index q = problem.inputs.front().size();
  SeedStreams streams(seed);
  DualInit duals = init_duals(problem.graph, static_cast<int>(q), options.sigma_lambda,
                              streams.derive("consensus-duals"), options.em_iter);
  Engine engine(problem, options, std::move(duals.lambda), std::move(duals.transcript));

  // A run may already sit at the stopping point (all inputs equal).
  if (options.stop == StopRule::kOracleResidual) {
    const double r0 = engine.residual({});
    if (r0 <= options.tol) {
      engine.result.averages = engine.state.y;
      engine.result.iterations = 0;
      engine.result.residual = r0;
      engine.result.converged = true;
      return std::move(engine.result);
    }
  }

  std::mt19937_64 activation = streams.stream("consensus-activation");
  std::uniform_int_distribution<int> pick(0, problem.graph.node_count() - 1);
  // Self-difference stopping compares against the state one full sweep ago.
  const int window =
      options.mode == ConsensusMode::kSynchronous ? 1 : problem.graph.node_count();
  std::vector<std::vector<Eigen::VectorXd>> history;

  double res = std::numeric_limits<double>::infinity();
  for (int t = 1; t <= options.max_iters; ++t) {
    history.push_back(engine.state.y);
    if (static_cast<int>(history.size()) > window) history.erase(history.begin());
    if (options.mode == ConsensusMode::kSynchronous) {
      engine.sync_round(t);
    } else {
      engine.async_tick(problem.graph.nodes()[pick(activation)], t);
    }
    engine.state.iter = t;
    const bool window_full = static_cast<int>(history.size()) == window;
    res = engine.residual(history.front());
    if ((options.stop == StopRule::kOracleResidual || window_full) && res <= options.tol) {
      engine.result.averages = engine.state.y;
      engine.result.iterations = t;
      engine.result.residual = res;
      engine.result.converged = true;
      return std::move(engine.result);
    }
  }
  if (options.throw_on_max_iters) throw MaxItersExceeded(options.max_iters, res);
  engine.result.averages = engine.state.y;
  engine.result.iterations = options.max_iters;
  engine.result.residual = res;
  engine.result.converged = false;
  return std::move(engine.result);
}

ConsensusResult replay_run(const ConsensusProblem& problem, const Transcript& transcript) {
  check_problem(problem);
  const Graph& g = problem.graph;
  const Eigen::Index q = problem.inputs.front().size();
  std::vector<Eigen::VectorXd> lambda0(2 * g.edge_count(), Eigen::VectorXd::Zero(q));
  // Group the primal broadcasts by round, preserving order.
  std::vector<std::pair<int, std::vector<const Message*>>> rounds;
  for (const Message& m : transcript.messages()) {
    if (m.kind == MessageKind::kDualInit) {
      if (m.to.size() != 1) throw Error("malformed dual_init message");
      lambda0[dual_slot(g, m.from, m.to.front())] = m.payload;
    } else if (m.kind == MessageKind::kPrimalBroadcast) {
      if (rounds.empty() || rounds.back().first != m.round) rounds.push_back({m.round, {}});
      rounds.back().second.push_back(&m);
    }
  }
  ConsensusOptions options;
  options.transcript = TranscriptPolicy::kOff;
  Engine engine(problem, options, std::move(lambda0), Transcript{});
  for (const auto& [round, broadcasts] : rounds) {
    if (broadcasts.size() == static_cast<std::size_t>(g.node_count())) {
      // Synchronous round: all primals are computed from the pre-round state.
      std::vector<Eigen::VectorXd> y_new(g.node_count());
      for (const Message* m : broadcasts) {
        const Eigen::VectorXd y = pdmm_primal_update(problem, engine.state, m->from);
        if (y.size() != m->payload.size() || (y.array() != m->payload.array()).any()) {
          throw Error("replay mismatch at round " + std::to_string(round));
        }
        y_new[g.node_position(m->from)] = y;
      }
      std::vector<Eigen::VectorXd> lambda_new = engine.state.lambda;
      for (int node : g.nodes()) {
        for (int nb : g.neighbors(node)) {
          lambda_new[dual_slot(g, node, nb)] = pdmm_dual_update(
              problem, engine.state, node, nb, y_new[g.node_position(node)]);
        }
      }
      engine.state.y = std::move(y_new);
      engine.state.lambda = std::move(lambda_new);
    } else if (broadcasts.size() == 1) {
      const Message* m = broadcasts.front();
      const Eigen::VectorXd y = pdmm_primal_update(problem, engine.state, m->from);
      if (y.size() != m->payload.size() || (y.array() != m->payload.array()).any()) {
        throw Error("replay mismatch at round " + std::to_string(round));
      }
      for (int nb : g.neighbors(m->from)) {
        engine.state.lambda[dual_slot(g, m->from, nb)] =
            pdmm_dual_update(problem, engine.state, m->from, nb, y);
      }
      engine.state.y[g.node_position(m->from)] = y;
    } else {
      throw Error("round " + std::to_string(round) + " has an unexpected broadcast count");
    }
    engine.state.iter = round;
  }
  engine.result.averages = engine.state.y;
  engine.result.iterations = engine.state.iter;
  engine.result.converged = true;
  return std::move(engine.result);
}

SubspaceDiagnostics subspace_diagnostics(
    const ConsensusProblem& problem,
    const std::vector<std::vector<Eigen::VectorXd>>& dual_trajectory, std::uint64_t seed) {
  if (dual_trajectory.size() < 3) {
    throw InvalidArgument("need a recorded trajectory of at least two rounds");
  }
  check_problem(problem);
  const Eigen::Index q = problem.inputs.front().size();
  const int rounds = static_cast<int>(dual_trajectory.size()) - 1;

  // Reference trajectories: zero-initialized duals stay inside the
  // convergent subspace, so their span estimates it. Several input vectors
  // widen the span beyond one run's path.
  constexpr int kReferenceRuns = 4;
  SeedStreams streams(seed);
  double input_scale = 0.0;
  for (const auto& s : problem.inputs) input_scale += s.squaredNorm();
  input_scale = std::sqrt(input_scale / (problem.inputs.size() * q));
  if (input_scale <= 0) input_scale = 1.0;

  std::vector<Eigen::VectorXd> columns;
  for (int ref = 0; ref < kReferenceRuns; ++ref) {
    ConsensusProblem ref_problem = problem;
    if (ref > 0) {
      std::mt19937_64 rng = streams.stream("diagnostics-inputs", ref);
      std::normal_distribution<double> normal(0.0, input_scale);
      for (auto& s : ref_problem.inputs) {
        for (Eigen::Index a = 0; a < q; ++a) s[a] = normal(rng);
      }
    }
    ConsensusOptions opts;
    opts.mode = ConsensusMode::kSynchronous;
    opts.sigma_lambda = 0.0;
    opts.tol = -1.0;  // run the full length
    opts.max_iters = std::max(rounds, 200);
    opts.throw_on_max_iters = false;
    opts.transcript = TranscriptPolicy::kOff;
    opts.record_dual_trajectory = true;
    const ConsensusResult res = run_consensus(ref_problem, opts, streams.derive("diagnostics", ref));
    for (std::size_t t = 1; t < res.dual_trajectory.size(); ++t) {
      columns.push_back(stack_duals(res.dual_trajectory[t]));
    }
    for (std::size_t t = 2; t < res.dual_trajectory.size(); ++t) {
      columns.push_back(stack_duals(res.dual_trajectory[t]) -
                        stack_duals(res.dual_trajectory[t - 2]));
    }
  }

  Eigen::MatrixXd basis_input(columns.front().size(), columns.size());
  for (std::size_t cidx = 0; cidx < columns.size(); ++cidx) basis_input.col(cidx) = columns[cidx];
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis_input);
  qr.setThreshold(1e-9);
  const int rank = static_cast<int>(qr.rank());
  Eigen::MatrixXd q_full = qr.householderQ();
  const Eigen::MatrixXd basis = q_full.leftCols(rank);

  SubspaceDiagnostics diag;
  diag.subspace_dim = rank;
  std::vector<Eigen::VectorXd> projected;
  projected.reserve(dual_trajectory.size());
  for (const auto& lambda : dual_trajectory) {
    const Eigen::VectorXd stacked = stack_duals(lambda);
    const Eigen::VectorXd conv = basis * (basis.transpose() * stacked);
    projected.push_back(conv);
    diag.convergent_norm.push_back(conv.norm());
    diag.orthogonal_norm.push_back((stacked - conv).norm());
  }
  for (std::size_t t = 2; t < projected.size(); ++t) {
    diag.convergent_step2_diff.push_back((projected[t] - projected[t - 2]).norm());
  }
  return diag;
}

}  // namespace ppdem
