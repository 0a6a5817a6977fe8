#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ppdem/graph.hpp"
#include "ppdem/transcript.hpp"

namespace ppdem {

// Distributed averaging: every node holds a private input vector and the
// network agrees on the arithmetic mean by exchanging primal broadcasts and
// per-directed-edge dual variables.
struct ConsensusProblem {
  Graph graph;
  std::vector<Eigen::VectorXd> inputs;  // s_i, one per graph.nodes() position
  double rho = 0.4;  // primal-dual step constant (convergence rate knob)
};

// Two dual vectors per undirected edge. Slot l holds the (lo|hi) direction
// of edge l, slot l+m the (hi|lo) direction.
int dual_slot(const Graph& g, int i, int j);

struct ConsensusState {
  std::vector<Eigen::VectorXd> y;       // per node, graph.nodes() order
  std::vector<Eigen::VectorXd> lambda;  // 2m dual vectors, see dual_slot
  int iter = 0;
};

enum class ConsensusMode { kSynchronous, kAsynchronous };

// Oracle residual compares against the true mean (simulation only); the
// self-difference rule is usable by real deployments.
enum class StopRule { kOracleResidual, kSelfDifference };

struct ConsensusOptions {
  ConsensusMode mode = ConsensusMode::kSynchronous;
  double sigma_lambda = 0.0;  // stddev of the dual initialization noise
  double tol = 1e-8;
  int max_iters = 200000;  // synchronous rounds or asynchronous activations
  StopRule stop = StopRule::kOracleResidual;
  bool throw_on_max_iters = true;
  TranscriptPolicy transcript = TranscriptPolicy::kFull;
  bool record_dual_trajectory = false;  // synchronous runs only
  int em_iter = -1;                     // tag for nested transcripts
};

// Gaussian dual initialization; every lambda_{i|j} travels once over an
// encrypted channel and is the only encrypted traffic of a run.
struct DualInit {
  std::vector<Eigen::VectorXd> lambda;
  Transcript transcript;
};
DualInit init_duals(const Graph& g, int q, double sigma_lambda, std::uint64_t seed,
                    int em_iter = -1);

// One primal update of node i from the current state.
Eigen::VectorXd pdmm_primal_update(const ConsensusProblem& problem,
                                   const ConsensusState& state, int node);

// Dual refresh triggered by node i broadcasting y_new: each neighbor j
// computes the (i|j)-directed dual from the mirrored (j|i) dual. The caller
// stores the result in dual_slot(g, i, j).
Eigen::VectorXd pdmm_dual_update(const ConsensusProblem& problem,
                                 const ConsensusState& state, int broadcaster,
                                 int neighbor, const Eigen::VectorXd& y_new);

struct ConsensusResult {
  std::vector<Eigen::VectorXd> averages;  // final y per node
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  Transcript transcript;
  // lambda per recorded synchronous round (index 0 = initialization).
  std::vector<std::vector<Eigen::VectorXd>> dual_trajectory;
};

ConsensusResult run_consensus(const ConsensusProblem& problem,
                              const ConsensusOptions& options, std::uint64_t seed);

// Determinism audit: re-executes a run from its recorded dual initialization
// and broadcast order, verifying every recorded payload bit-exactly.
// Throws Error on any mismatch.
ConsensusResult replay_run(const ConsensusProblem& problem, const Transcript& transcript);

// Splits the recorded dual trajectory into the component that converges and
// the component that never does. The convergent subspace is estimated
// empirically from noiseless reference runs (no closed form is used), which
// the `empirical_projector` flag signals to consumers.
struct SubspaceDiagnostics {
  std::vector<double> convergent_norm;        // per recorded round
  std::vector<double> orthogonal_norm;        // per recorded round
  std::vector<double> convergent_step2_diff;  // ||P(l_t - l_{t-2})||, from t=2
  int subspace_dim = 0;
  bool empirical_projector = true;
};
SubspaceDiagnostics subspace_diagnostics(
    const ConsensusProblem& problem,
    const std::vector<std::vector<Eigen::VectorXd>>& dual_trajectory,
    std::uint64_t seed = 0x9ddfea08eb382d69ULL);

}  // namespace ppdem
