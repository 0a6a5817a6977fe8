#include "ppdem/adversary.hpp"

#include <algorithm>
#include <cmath>

#include "ppdem/errors.hpp"
#include "ppdem/graph.hpp"
#include "ppdem/numeric.hpp"

namespace ppdem {

AdversaryView passive_view(const ProtocolRun& run, const std::set<int>& corrupt) {
  AdversaryView view;
  view.kind = AdversaryKind::kPassive;
  view.corrupt = corrupt;
  view.em_iters = run.em_iters();
  for (const Message& m : run.transcript.messages()) {
    bool seen = corrupt.count(m.from) > 0;
    for (int r : m.to) {
      if (seen) break;
      seen = corrupt.count(r) > 0;
    }
    if (seen) view.messages.push_back(m);
  }
  for (int node : corrupt) {
    if (node == kServerNode) continue;  // the server holds no data of its own
    const int idx = node - 1;
    if (idx < 0 || idx >= static_cast<int>(run.node_data.size())) {
      throw InvalidArgument("corrupt node " + std::to_string(node) + " is not part of the run");
    }
    view.corrupt_data[node] = run.node_data[idx];
    std::vector<LocalUpdates> per_iter;
    for (const auto& round : run.node_updates) per_iter.push_back(round[idx]);
    view.corrupt_updates[node] = std::move(per_iter);
    if (!run.cycle.empty() && run.cycle.front() == node) {
      view.corrupt_masks[node] = run.ring_masks;
    }
  }
  return view;
}

AdversaryView eavesdrop_view(const Transcript& transcript) {
  AdversaryView view;
  view.kind = AdversaryKind::kEavesdropper;
  int max_iter = -1;
  for (const Message& m : transcript.messages()) {
    if (!m.encrypted) view.messages.push_back(m);
    max_iter = std::max(max_iter, m.em_iter);
  }
  view.em_iters = max_iter + 1;
  return view;
}

namespace {

// Smallest exact preimage hunt: prefer the value x with fl(a_j * x) == b_j
// for every substantial component, which undoes the wire rounding of b = a*x.
double refine_coordinate(double base, const std::vector<std::pair<double, double>>& pairs) {
  constexpr int kUlpRadius = 4;
  double best = base;
  int matches = 0;
  double candidate = base;
  for (int step = -kUlpRadius; step <= kUlpRadius; ++step) {
    candidate = base;
    for (int s = 0; s < std::abs(step); ++s) {
      candidate = std::nextafter(candidate, step > 0 ? std::numeric_limits<double>::infinity()
                                                     : -std::numeric_limits<double>::infinity());
    }
    bool consistent = true;
    for (const auto& [a, b] : pairs) {
      if (a * candidate != b) {
        consistent = false;
        break;
      }
    }
    if (consistent) {
      ++matches;
      best = candidate;
      if (matches > 1) return base;  // ambiguous; keep the plain ratio
    }
  }
  return matches == 1 ? best : base;
}

}  // namespace

FederatedRecovery reconstruct_federated(const AdversaryView& view, int em_iter, int c, int d,
                                        double mass_threshold) {
  FederatedRecovery recovery;
  for (const Message& m : view.messages) {
    if (m.kind != MessageKind::kLocalUpdateUpload || m.em_iter != em_iter) continue;
    const LocalUpdates u = unstack_updates(m.payload, c, d, 0);
    int best = -1;
    for (int j = 0; j < c; ++j) {
      if (u.mass[j] > mass_threshold && (best < 0 || u.mass[j] > u.mass[best])) best = j;
    }
    if (best < 0) throw UnrecoverableNode(m.from);
    Eigen::VectorXd x = u.weighted_sum[best] / u.mass[best];
    for (int a = 0; a < d; ++a) {
      std::vector<std::pair<double, double>> pairs;
      for (int j = 0; j < c; ++j) {
        if (u.mass[j] > mass_threshold) pairs.emplace_back(u.mass[j], u.weighted_sum[j][a]);
      }
      x[a] = refine_coordinate(x[a], pairs);
    }
    recovery.estimates[m.from] = std::move(x);
  }
  return recovery;
}

namespace {

struct CompensatedValue {
  Eigen::VectorXd sum;
  Eigen::VectorXd comp;

  static CompensatedValue zero(Eigen::Index dim) {
    return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Zero(dim)};
  }
  static CompensatedValue plain(const Eigen::VectorXd& v) {
    return {v, Eigen::VectorXd::Zero(v.size())};
  }
  void add(const Eigen::VectorXd& v, double scale = 1.0) {
    for (Eigen::Index a = 0; a < sum.size(); ++a) neumaier_add(sum[a], comp[a], scale * v[a]);
  }
  Eigen::VectorXd value() const { return sum + comp; }
};

CompensatedValue difference(const CompensatedValue& hi, const CompensatedValue& lo) {
  CompensatedValue out = CompensatedValue::zero(hi.sum.size());
  out.sum = hi.sum - lo.sum;
  out.comp = hi.comp - lo.comp;
  return out;
}

}  // namespace

SecureSumRecovery reconstruct_secure_sum(const AdversaryView& view, const std::vector<int>& cycle,
                                         const std::vector<RingChain>& chains,
                                         const std::set<int>& corrupt) {
  const int n = static_cast<int>(cycle.size());
  SecureSumRecovery recovery;
  recovery.chains = chains;
  recovery.per_iter.resize(view.em_iters, std::vector<SegmentRecovery>(chains.size()));

  std::vector<int> position_of_label(*std::max_element(cycle.begin(), cycle.end()) + 1, -1);
  for (int k = 0; k < n; ++k) position_of_label[cycle[k]] = k;
  const int initiator = cycle.front();

  for (int t = 0; t < view.em_iters; ++t) {
    for (std::size_t ci = 0; ci < chains.size(); ++ci) {
      const RingChain& chain = chains[ci];
      SegmentRecovery& out = recovery.per_iter[t][ci];

      // Observed masked prefixes by cycle position, plus the unmasked total.
      std::map<int, CompensatedValue> prefixes;
      bool have_total = false;
      Eigen::VectorXd total;
      for (const Message& m : view.messages) {
        if (m.em_iter != t) continue;
        if (m.kind == MessageKind::kRingRelay &&
            m.round >= ring_round(static_cast<int>(ci), 0, n) &&
            m.round < ring_round(static_cast<int>(ci), n, n)) {
          const int hop = m.round - ring_round(static_cast<int>(ci), 0, n);
          CompensatedValue v = CompensatedValue::zero(chain.dim);
          v.sum = m.payload.head(chain.dim);
          v.comp = m.payload.tail(chain.dim);
          prefixes.emplace(hop, std::move(v));
        } else if (m.kind == MessageKind::kSumBroadcast &&
                   m.round == ring_round(static_cast<int>(ci), n, n)) {
          have_total = true;
          total = m.payload;
        }
      }
      if (prefixes.empty() && !have_total) continue;

      // Per-node chain values known to the coalition.
      std::map<int, Eigen::VectorXd> corrupt_values;
      for (const auto& [node, updates] : view.corrupt_updates) {
        corrupt_values[node] = [&] {
          const LocalUpdates& u = updates[t];
          switch (chain.quantity) {
            case 'a': {
              Eigen::VectorXd v(1);
              v[0] = u.mass[chain.component];
              return v;
            }
            case 'b': return u.weighted_sum[chain.component];
            default: return Eigen::VectorXd(pack_upper(u.scatter[chain.component]));
          }
        }();
      }

      // The mask: directly from a corrupt initiator, else derivable from the
      // closing relay plus the broadcast total.
      bool mask_known = false;
      CompensatedValue mask = CompensatedValue::zero(chain.dim);
      if (auto it = view.corrupt_masks.find(initiator); it != view.corrupt_masks.end()) {
        mask = CompensatedValue::plain(it->second[t][ci]);
        mask_known = true;
      } else if (have_total && prefixes.count(n - 1)) {
        mask = prefixes.at(n - 1);
        mask.add(total, -1.0);
        mask_known = true;
      }
      if (mask_known) {
        prefixes.emplace(-1, mask);
        if (have_total && !prefixes.count(n - 1)) {
          CompensatedValue closing = mask;
          closing.add(total);
          prefixes.emplace(n - 1, std::move(closing));
        }
      }

      // Consecutive observed prefixes bracket a stretch of contributions;
      // subtracting the corrupt ones leaves one honest group per gap.
      std::vector<char> covered(n, 0);
      auto emit_group = [&](const std::vector<int>& honest, CompensatedValue value) {
        if (honest.empty()) return;
        if (honest.size() == 1) {
          out.exact[honest.front()] = value.value();
        } else {
          std::vector<int> sorted = honest;
          std::sort(sorted.begin(), sorted.end());
          out.segment_sums.emplace_back(std::move(sorted), value.value());
        }
      };
      for (auto hi = prefixes.begin(); hi != prefixes.end(); ++hi) {
        auto lo = hi;
        if (lo == prefixes.begin()) continue;
        --lo;
        CompensatedValue gap = difference(hi->second, lo->second);
        std::vector<int> honest;
        for (int k = lo->first + 1; k <= hi->first; ++k) {
          covered[k] = 1;
          const int node = cycle[k];
          if (corrupt.count(node)) {
            gap.add(corrupt_values.at(node), -1.0);
          } else {
            honest.push_back(node);
          }
        }
        emit_group(honest, std::move(gap));
      }

      // Whatever the gaps did not cover wraps around the initiator; its
      // honest total follows from the broadcast once every other honest
      // group's sum is known.
      if (have_total) {
        std::vector<int> uncovered_honest;
        bool any_uncovered = false;
        for (int k = 0; k < n; ++k) {
          if (covered[k]) continue;
          any_uncovered = true;
          if (!corrupt.count(cycle[k])) uncovered_honest.push_back(cycle[k]);
        }
        if (any_uncovered && !uncovered_honest.empty()) {
          CompensatedValue wrap = CompensatedValue::plain(total);
          for (const auto& [node, value] : corrupt_values) {
            if (!covered[position_of_label[node]]) wrap.add(value, -1.0);
          }
          for (const auto& [node, value] : out.exact) wrap.add(value, -1.0);
          for (const auto& [nodes, value] : out.segment_sums) wrap.add(value, -1.0);
          for (const auto& [node, value] : corrupt_values) {
            if (covered[position_of_label[node]]) wrap.add(value, -1.0);
          }
          emit_group(uncovered_honest, std::move(wrap));
        }
      }
    }
  }
  return recovery;
}

RingLeakageStructure ring_leakage_structure(const std::vector<int>& cycle,
                                            const std::set<int>& corrupt) {
  const int n = static_cast<int>(cycle.size());
  RingLeakageStructure structure;
  if (corrupt.empty()) return structure;

  std::set<int> observed;  // positions whose outgoing relay is seen
  for (int k = 0; k < n; ++k) {
    if (corrupt.count(cycle[k]) || corrupt.count(cycle[(k + 1) % n])) observed.insert(k);
  }
  structure.mask_known = corrupt.count(cycle.front()) > 0 || observed.count(n - 1) > 0;
  if (structure.mask_known) {
    observed.insert(-1);
    observed.insert(n - 1);
  }

  std::vector<char> covered(n, 0);
  for (auto hi = observed.begin(); hi != observed.end(); ++hi) {
    auto lo = hi;
    if (lo == observed.begin()) continue;
    --lo;
    std::vector<int> honest;
    for (int k = *lo + 1; k <= *hi; ++k) {
      covered[k] = 1;
      if (!corrupt.count(cycle[k])) honest.push_back(cycle[k]);
    }
    if (!honest.empty()) {
      std::sort(honest.begin(), honest.end());
      structure.determined_groups.push_back(std::move(honest));
    }
  }
  std::vector<int> wrap;
  for (int k = 0; k < n; ++k) {
    if (!covered[k] && !corrupt.count(cycle[k])) wrap.push_back(cycle[k]);
  }
  if (!wrap.empty()) {
    std::sort(wrap.begin(), wrap.end());
    structure.determined_groups.push_back(std::move(wrap));
  }
  return structure;
}

std::vector<GlobalSums> subspace_honest_sums(const ProtocolRun& run, const std::set<int>& corrupt) {
  if (run.graph.node_count() == 0) throw InvalidArgument("run has no graph");
  for (int node : corrupt) {
    if (!run.graph.has_node(node)) {
      throw InvalidArgument("corrupt node " + std::to_string(node) + " is not in the graph");
    }
  }
  if (!corrupt.empty()) {
    if (corrupt.size() == static_cast<std::size_t>(run.graph.node_count())) {
      throw InvalidArgument("no honest nodes left");
    }
    const Graph honest_subgraph = remove_nodes(run.graph, corrupt);
    if (!is_connected(honest_subgraph)) {
      throw HonestSubgraphDisconnected("honest nodes are disconnected after removing " +
                                       std::to_string(corrupt.size()) + " corrupt nodes");
    }
  }
  std::vector<GlobalSums> sums;
  sums.reserve(run.node_updates.size());
  for (const auto& round : run.node_updates) {
    std::vector<LocalUpdates> honest;
    for (int node : run.graph.nodes()) {
      if (!corrupt.count(node)) honest.push_back(round[node - 1]);
    }
    sums.push_back(sum_local_updates(honest));
  }
  return sums;
}

}  // namespace ppdem
