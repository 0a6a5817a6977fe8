#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <set>
#include <vector>

#include "ppdem/adversary.hpp"
#include "ppdem/graph.hpp"
#include "ppdem/protocols.hpp"

namespace ppdem {

struct MiEstimate {
  double value = 0.0;      // raw k-NN estimate in nats (may be slightly negative)
  int k = 0;               // neighbor count used
  int sample_count = 0;
  double normalized = 0.0;  // value / self-information estimate, clamped to [0,1]
};

// Kraskov k-nearest-neighbor mutual-information estimate between paired
// samples (rows of x and y). Columns are standardized and dithered by a
// 1e-10 uniform jitter before the max-norm neighbor queries.
// Throws InsufficientSamples unless N >= 2k+2.
double ksg_mi(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int k, std::uint64_t seed);

// ksg_mi(x,y) divided by ksg_mi(x,x) with the x-side jitter shared between
// numerator and denominator, so y == x normalizes to exactly 1.
MiEstimate normalized_mi(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int k,
                         std::uint64_t seed);

enum class SecureSumFeatureMode {
  // The per-node sufficient statistics the ring attack determines: exact
  // values for wedged nodes, honest-group sums otherwise.
  kSufficientStatistics,
  // The raw observed element list (masked prefixes, corrupt values, total).
  kRawView,
};

enum class ResponsibilityNormalization {
  kPerNodeOverComponents,  // each node's responsibilities sum to 1
  kOverNodes,              // each component's responsibilities sum to 1 across nodes
};

struct LeakageOptions {
  int components = 1;  // scalar-data synthetic model by default
  int knn_k = 3;
  double mask_scale = 1e3;  // sigma of the synthetic ring masks (raw mode)
  SecureSumFeatureMode secure_features = SecureSumFeatureMode::kSufficientStatistics;
  ResponsibilityNormalization normalization =
      ResponsibilityNormalization::kPerNodeOverComponents;
  // An eavesdropper observes every unencrypted relay, which determines every
  // ring value exactly; against the dual-perturbed protocol it learns no
  // more than the all-node sums.
  AdversaryKind adversary = AdversaryKind::kPassive;
  // Keep the per-iteration feature matrices in the result (for export).
  bool collect_features = false;
};

struct LeakageResult {
  std::vector<MiEstimate> per_iter;
  std::vector<Eigen::MatrixXd> features;  // [iter] trials x dim, when collected
};

// The synthetic Monte-Carlo leakage experiment: per trial one standard
// normal scalar per node plus per-iteration uniform responsibilities; the
// requested protocol's adversary-view features are synthesized for the
// target node and pooled across trials into a normalized-MI estimate per EM
// iteration. Throws InsufficientSamples when trials < 1000.
LeakageResult monte_carlo_leakage(ProtocolKind protocol, const Graph& graph,
                                  const std::set<int>& corrupt, int target_node, int trials,
                                  int em_iters, std::uint64_t seed,
                                  const LeakageOptions& options = {});

}  // namespace ppdem
