#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string_view>
#include <vector>

#include "ppdem/consensus.hpp"
#include "ppdem/gmm.hpp"
#include "ppdem/graph.hpp"
#include "ppdem/transcript.hpp"

namespace ppdem {

enum class ProtocolKind { kFederated, kSecureSum, kSubspace };
std::string_view to_string(ProtocolKind kind);
ProtocolKind protocol_from_string(std::string_view s);

// One masked ring-summation chain per (component, quantity) and iteration.
struct RingChain {
  int component = 0;
  char quantity = 'a';  // 'a' mass, 'b' weighted sum, 'C' packed scatter
  int dim = 1;
};
std::vector<RingChain> ring_chain_layout(int c, int d);
// Round numbering of the ring phase: chain ci occupies rounds
// [ci*(n+1), ci*(n+1)+n]; hop k is the relay leaving cycle position k and
// round ci*(n+1)+n is the unmasked broadcast.
int ring_round(int chain, int hop, int n_nodes);

// Everything the simulator knows about a finished run. Per-node internal
// state is retained as evaluation ground truth for the adversary module; it
// is never part of any adversary's view unless that node is corrupt.
struct ProtocolRun {
  ProtocolKind protocol = ProtocolKind::kFederated;
  std::vector<GmmParams> trajectory;  // length T+1, index 0 = init
  std::vector<double> loglik;         // on the pooled data, same length
  Transcript transcript;
  Graph graph;                                          // empty for federated
  std::vector<Eigen::MatrixXd> node_data;               // per node 1..n
  std::vector<std::vector<LocalUpdates>> node_updates;  // [iter][node]
  std::vector<int> cycle;                               // secure-sum cycle, else empty
  std::vector<std::vector<Eigen::VectorXd>> ring_masks; // [iter][chain], initiator state
  std::vector<RingChain> chains;
  double cov_reg = 0.0;
  double mask_sigma = 0.0;
  std::vector<int> consensus_iters;  // per EM iteration (subspace only)

  int em_iters() const { return static_cast<int>(trajectory.size()) - 1; }
  int node_count() const { return static_cast<int>(node_data.size()); }
  Eigen::MatrixXd pooled_points() const;
};

struct FederatedOptions {
  EmOptions em;
  TranscriptPolicy transcript = TranscriptPolicy::kFull;
};

struct SecureSumOptions {
  EmOptions em;
  double mask_scale_factor = 1e3;  // sigma_r = factor * RMS data scale
  bool encrypt_relays = false;
  TranscriptPolicy transcript = TranscriptPolicy::kFull;
};

struct SubspaceOptions {
  EmOptions em;
  ConsensusOptions consensus;  // mode, rho via rho field below, tol, max_iters
  double rho = 0.4;
  TranscriptPolicy transcript = TranscriptPolicy::kFull;
};

// Server-aggregated EM: each node uploads its intermediate updates, the
// server aggregates and broadcasts refreshed parameters. Exact aggregation.
ProtocolRun run_federated_em(const std::vector<Eigen::MatrixXd>& node_data, int c, int iters,
                             const GmmParams& init, std::uint64_t seed,
                             const FederatedOptions& options = {});

// Ring-summation baseline over a Hamiltonian cycle: the cycle's first node
// masks each aggregate with a random value that cancels after a full loop.
// Relay payloads carry compensated (sum, compensation) halves so the mask
// cancels exactly. Throws NoHamiltonianCycle when the graph has none.
ProtocolRun run_secure_sum_em(const Graph& graph, const std::vector<Eigen::MatrixXd>& node_data,
                              int c, int iters, const GmmParams& init, std::uint64_t seed,
                              const SecureSumOptions& options = {});

// The decentralized driver: per EM iteration one dual-perturbed consensus
// run averages the stacked intermediate updates, after which every node
// assembles the refreshed parameters locally.
ProtocolRun run_subspace_em(const Graph& graph, const std::vector<Eigen::MatrixXd>& node_data,
                            int c, int iters, const GmmParams& init, double sigma_lambda,
                            std::uint64_t seed, const SubspaceOptions& options = {});

}  // namespace ppdem
