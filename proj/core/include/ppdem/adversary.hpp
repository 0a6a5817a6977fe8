#pragma once

#include <Eigen/Dense>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "ppdem/gmm.hpp"
#include "ppdem/protocols.hpp"
#include "ppdem/transcript.hpp"

namespace ppdem {

enum class AdversaryKind { kPassive, kEavesdropper };

// What one adversary can see of a run. A passive coalition observes every
// message touching a corrupt node plus the corrupt nodes' own data, local
// updates and masks; an eavesdropper observes exactly the unencrypted
// messages and no internal state.
struct AdversaryView {
  AdversaryKind kind = AdversaryKind::kPassive;
  std::set<int> corrupt;
  std::vector<Message> messages;
  std::map<int, Eigen::MatrixXd> corrupt_data;
  std::map<int, std::vector<LocalUpdates>> corrupt_updates;  // node -> per-iter
  // node -> per-iter per-chain ring masks (only a corrupt ring initiator).
  std::map<int, std::vector<std::vector<Eigen::VectorXd>>> corrupt_masks;
  int em_iters = 0;
};

AdversaryView passive_view(const ProtocolRun& run, const std::set<int>& corrupt);
AdversaryView eavesdrop_view(const Transcript& transcript);

// Server-side reconstruction: the uploaded pair (a_ij, b_ij) determines a
// node's datum as b/a. The estimate is refined to the exact floating-point
// preimage when one is consistent with every uploaded component.
struct FederatedRecovery {
  std::map<int, Eigen::VectorXd> estimates;
};
FederatedRecovery reconstruct_federated(const AdversaryView& view, int em_iter, int c, int d,
                                        double mass_threshold = 1e-12);

// Ring-summation attack output for one (iteration, chain): values pinned
// down exactly, plus honest groups whose sums (but nothing finer) are
// determined.
struct SegmentRecovery {
  std::map<int, Eigen::VectorXd> exact;
  std::vector<std::pair<std::vector<int>, Eigen::VectorXd>> segment_sums;
};
struct SecureSumRecovery {
  std::vector<RingChain> chains;
  std::vector<std::vector<SegmentRecovery>> per_iter;  // [iter][chain]
};
SecureSumRecovery reconstruct_secure_sum(const AdversaryView& view, const std::vector<int>& cycle,
                                         const std::vector<RingChain>& chains,
                                         const std::set<int>& corrupt);

// Which honest groups a ring-summation adversary pins down, as a function of
// cycle positions alone: consecutive observed relays bracket honest
// stretches; the mask is known when the initiator is corrupt or the closing
// relay plus the broadcast reveal it. Singleton groups mean exact recovery.
struct RingLeakageStructure {
  bool mask_known = false;
  std::vector<std::vector<int>> determined_groups;
};
RingLeakageStructure ring_leakage_structure(const std::vector<int>& cycle,
                                            const std::set<int>& corrupt);

// The honest-sum statistics the dual-perturbed protocol is contracted to
// reveal (and nothing finer) when the honest subgraph is connected.
// Throws HonestSubgraphDisconnected when that hypothesis fails.
std::vector<GlobalSums> subspace_honest_sums(const ProtocolRun& run, const std::set<int>& corrupt);

}  // namespace ppdem
