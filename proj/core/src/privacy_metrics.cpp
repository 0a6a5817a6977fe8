#include "ppdem/privacy_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ppdem/adversary.hpp"
#include "ppdem/data.hpp"
#include "ppdem/errors.hpp"
#include "ppdem/numeric.hpp"
#include "ppdem/rng.hpp"

namespace ppdem {

double digamma(double x) {
  // Ascending recurrence into the asymptotic region, then the standard
  // Bernoulli series; the truncation error is below 1e-13 for x >= 12.
  double value = 0.0;
  while (x < 12.0) {
    value -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  value += std::log(x) - 0.5 * inv -
           inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 / 240.0)));
  return value;
}

namespace {

constexpr double kJitterScale = 1e-10;

Eigen::MatrixXd standardized(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out = m;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    const double mean = out.col(c).mean();
    out.col(c).array() -= mean;
    const double sd = std::sqrt(out.col(c).squaredNorm() / static_cast<double>(out.rows()));
    if (sd > 0) out.col(c) /= sd;
  }
  return out;
}

void add_jitter(Eigen::MatrixXd& m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, kJitterScale);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) += unit(rng);
  }
}

void check_inputs(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int k) {
  if (x.rows() != y.rows()) throw InvalidArgument("sample counts differ");
  if (k < 1) throw InvalidArgument("k must be positive");
  if (x.rows() < 2 * k + 2) {
    throw InsufficientSamples("need at least " + std::to_string(2 * k + 2) + " samples, have " +
                              std::to_string(x.rows()));
  }
  if (!x.allFinite() || !y.allFinite()) throw InvalidArgument("samples must be finite");
}

// Kraskov estimator 1 with max-norm balls and strict radius counts, on
// already standardized and jittered samples.
double ksg_core(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int k) {
  const int n = static_cast<int>(x.rows());
  const int px = static_cast<int>(x.cols());
  const int py = static_cast<int>(y.cols());
  // Row-major copies keep the hot loop on contiguous memory.
  std::vector<double> xs(static_cast<std::size_t>(n) * px);
  std::vector<double> ys(static_cast<std::size_t>(n) * py);
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < px; ++a) xs[static_cast<std::size_t>(i) * px + a] = x(i, a);
    for (int a = 0; a < py; ++a) ys[static_cast<std::size_t>(i) * py + a] = y(i, a);
  }
  std::vector<double> dx(n), dy(n), dz(n), scratch(n);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* xi = xs.data() + static_cast<std::size_t>(i) * px;
    const double* yi = ys.data() + static_cast<std::size_t>(i) * py;
    for (int j = 0; j < n; ++j) {
      const double* xj = xs.data() + static_cast<std::size_t>(j) * px;
      double mx = 0.0;
      for (int a = 0; a < px; ++a) mx = std::max(mx, std::abs(xi[a] - xj[a]));
      const double* yj = ys.data() + static_cast<std::size_t>(j) * py;
      double my = 0.0;
      for (int a = 0; a < py; ++a) my = std::max(my, std::abs(yi[a] - yj[a]));
      dx[j] = mx;
      dy[j] = my;
      dz[j] = std::max(mx, my);
    }
    dz[i] = std::numeric_limits<double>::infinity();
    scratch = dz;
    std::nth_element(scratch.begin(), scratch.begin() + (k - 1), scratch.end());
    const double eps = scratch[k - 1];
    int nx = -1, ny = -1;  // the self-distance 0 is always below eps
    for (int j = 0; j < n; ++j) {
      if (dx[j] < eps) ++nx;
      if (dy[j] < eps) ++ny;
    }
    acc += digamma(nx + 1) + digamma(ny + 1);
  }
  return digamma(k) + digamma(n) - acc / n;
}

bool bitwise_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return (a.array() == b.array()).all();
}

}  // namespace

double ksg_mi(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int k, std::uint64_t seed) {
  check_inputs(x, y, k);
  SeedStreams streams(seed);
  Eigen::MatrixXd xj = standardized(x);
  Eigen::MatrixXd yj = standardized(y);
  std::mt19937_64 jx = streams.stream("ksg-jitter-x");
  std::mt19937_64 jy = streams.stream("ksg-jitter-y");
  add_jitter(xj, jx);
  add_jitter(yj, jy);
  return ksg_core(xj, yj, k);
}

MiEstimate normalized_mi(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int k,
                         std::uint64_t seed) {
  check_inputs(x, y, k);
  if (x.rows() < 50) {
    throw InsufficientSamples("normalized estimates need at least 50 samples");
  }
  SeedStreams streams(seed);
  Eigen::MatrixXd xj = standardized(x);
  std::mt19937_64 jx = streams.stream("ksg-jitter-x");
  add_jitter(xj, jx);
  Eigen::MatrixXd yj;
  if (bitwise_equal(x, y)) {
    yj = xj;  // shared jitter makes the ratio exactly one
  } else {
    yj = standardized(y);
    std::mt19937_64 jy = streams.stream("ksg-jitter-y");
    add_jitter(yj, jy);
  }
  MiEstimate est;
  est.k = k;
  est.sample_count = static_cast<int>(x.rows());
  est.value = ksg_core(xj, yj, k);
  const double self = ksg_core(xj, xj, k);
  est.normalized = self > 0 ? std::clamp(est.value / self, 0.0, 1.0) : 0.0;
  return est;
}

namespace {

// Trial- and iteration-indexed substream keys for the splittable scheme.
std::uint64_t trial_key(int iter, int trial) {
  return (static_cast<std::uint64_t>(iter) << 32) + static_cast<std::uint64_t>(trial);
}

}  // namespace

LeakageResult monte_carlo_leakage(ProtocolKind protocol, const Graph& graph,
                                  const std::set<int>& corrupt, int target_node, int trials,
                                  int em_iters, std::uint64_t seed, const LeakageOptions& options) {
  if (trials < 1000) {
    throw InsufficientSamples("Monte Carlo leakage needs at least 1000 trials, got " +
                              std::to_string(trials));
  }
  if (em_iters < 1) throw InvalidArgument("need at least one EM iteration");
  if (!graph.has_node(target_node)) throw InvalidArgument("target node not in graph");
  if (corrupt.count(target_node)) throw InvalidArgument("target node must be honest");
  for (int node : corrupt) {
    if (!graph.has_node(node)) {
      throw InvalidArgument("corrupt node " + std::to_string(node) + " is not in the graph");
    }
  }
  const int n = graph.node_count();
  const int c = options.components;
  if (c < 1) throw InvalidArgument("component count must be positive");

  // Protocol-specific structure, fixed across iterations.
  std::vector<int> cycle;
  RingLeakageStructure ring;
  std::vector<int> target_group;
  const bool eavesdrop = options.adversary == AdversaryKind::kEavesdropper;
  if (protocol == ProtocolKind::kSecureSum) {
    const auto found = find_hamiltonian_cycle(graph);
    if (!found) throw NoHamiltonianCycle("graph has no Hamiltonian cycle");
    cycle = *found;
    if (eavesdrop) {
      target_group = {target_node};  // consecutive relays pin every value
    } else {
      ring = ring_leakage_structure(cycle, corrupt);
      for (const auto& group : ring.determined_groups) {
        if (std::find(group.begin(), group.end(), target_node) != group.end()) {
          target_group = group;
          break;
        }
      }
      if (target_group.empty()) {
        // No corrupt observers: only the public total is revealed.
        for (int node : graph.nodes()) target_group.push_back(node);
      }
    }
  } else if (protocol == ProtocolKind::kSubspace) {
    if (!eavesdrop && !corrupt.empty()) {
      const Graph honest = remove_nodes(graph, std::set<int>(corrupt));
      if (!is_connected(honest)) {
        throw HonestSubgraphDisconnected("honest subgraph is disconnected");
      }
    }
  }

  // Per-trial draws under a splittable scheme: every trial derives its own
  // seed, so trials stay independent regardless of how they are scheduled.
  SeedStreams streams(seed);
  const bool over_nodes = options.normalization == ResponsibilityNormalization::kOverNodes;
  Eigen::MatrixXd x(trials, n);
  for (int tr = 0; tr < trials; ++tr) {
    const SyntheticPrivateData draw =
        synthetic_private_data(n, c, streams.derive("mc-trial", tr), over_nodes);
    x.row(tr) = draw.x.transpose();
  }
  const int target_idx = graph.node_position(target_node);
  const Eigen::MatrixXd x_target = x.col(target_idx);

  // Denominator (self-information) shared across iterations: same target
  // samples, same jitter realization.
  Eigen::MatrixXd x_jittered = standardized(x_target);
  {
    std::mt19937_64 rng = streams.stream("mc-jitter-x");
    add_jitter(x_jittered, rng);
  }
  if (trials < 2 * options.knn_k + 2) {
    throw InsufficientSamples("trial count below the estimator minimum");
  }
  const double self_information = ksg_core(x_jittered, x_jittered, options.knn_k);

  LeakageResult result;
  for (int t = 0; t < em_iters; ++t) {
    Eigen::MatrixXd resp(trials, n * c);
    for (int tr = 0; tr < trials; ++tr) {
      const SyntheticPrivateData draw =
          synthetic_private_data(n, c, streams.derive("mc-resp", trial_key(t, tr)), over_nodes);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < c; ++j) resp(tr, i * c + j) = draw.responsibilities(i, j);
      }
    }
    auto mass = [&](int tr, int node_label, int j) {
      return resp(tr, graph.node_position(node_label) * c + j);
    };
    auto weighted = [&](int tr, int node_label, int j) {
      return mass(tr, node_label, j) * x(tr, graph.node_position(node_label));
    };

    Eigen::MatrixXd features;
    switch (protocol) {
      case ProtocolKind::kFederated: {
        features.resize(trials, 2 * c);
        for (int tr = 0; tr < trials; ++tr) {
          for (int j = 0; j < c; ++j) {
            features(tr, j) = mass(tr, target_node, j);
            features(tr, c + j) = weighted(tr, target_node, j);
          }
        }
        break;
      }
      case ProtocolKind::kSubspace: {
        features.resize(trials, 2 * c);
        for (int tr = 0; tr < trials; ++tr) {
          for (int j = 0; j < c; ++j) {
            double a_sum = 0.0, b_sum = 0.0;
            for (int node : graph.nodes()) {
              if (!eavesdrop && corrupt.count(node)) continue;
              a_sum += mass(tr, node, j);
              b_sum += weighted(tr, node, j);
            }
            features(tr, j) = a_sum;
            features(tr, c + j) = b_sum;
          }
        }
        break;
      }
      case ProtocolKind::kSecureSum: {
        if (options.secure_features == SecureSumFeatureMode::kSufficientStatistics) {
          features.resize(trials, 2 * c);
          for (int tr = 0; tr < trials; ++tr) {
            for (int j = 0; j < c; ++j) {
              double a_sum = 0.0, b_sum = 0.0;
              for (int node : target_group) {
                a_sum += mass(tr, node, j);
                b_sum += weighted(tr, node, j);
              }
              features(tr, j) = a_sum;
              features(tr, c + j) = b_sum;
            }
          }
        } else {
          // Raw observed elements: masked prefixes at observed positions,
          // corrupt nodes' own values, and the unmasked total.
          std::vector<int> observed_positions;
          const int nn = static_cast<int>(cycle.size());
          for (int kpos = 0; kpos < nn; ++kpos) {
            if (corrupt.count(cycle[kpos]) || corrupt.count(cycle[(kpos + 1) % nn])) {
              observed_positions.push_back(kpos);
            }
          }
          std::vector<int> corrupt_sorted(corrupt.begin(), corrupt.end());
          const int per_quantity = static_cast<int>(observed_positions.size()) +
                                   static_cast<int>(corrupt_sorted.size()) + 1;
          features.resize(trials, 2 * c * per_quantity);
          std::normal_distribution<double> mask_noise(0.0, options.mask_scale);
          for (int tr = 0; tr < trials; ++tr) {
            std::mt19937_64 mask_rng = streams.stream("mc-mask", trial_key(t, tr));
            int col = 0;
            for (int q = 0; q < 2; ++q) {
              for (int j = 0; j < c; ++j) {
                const double r = mask_noise(mask_rng);
                auto value = [&](int node) { return q == 0 ? mass(tr, node, j) : weighted(tr, node, j); };
                double prefix = r;
                int next_obs = 0;
                double total = 0.0;
                std::vector<double> prefix_features;
                for (int kpos = 0; kpos < nn; ++kpos) {
                  prefix += value(cycle[kpos]);
                  total += value(cycle[kpos]);
                  if (next_obs < static_cast<int>(observed_positions.size()) &&
                      observed_positions[next_obs] == kpos) {
                    prefix_features.push_back(prefix);
                    ++next_obs;
                  }
                }
                for (double pf : prefix_features) features(tr, col++) = pf;
                for (int node : corrupt_sorted) features(tr, col++) = value(node);
                features(tr, col++) = total;
              }
            }
          }
        }
        break;
      }
    }

    Eigen::MatrixXd y_jittered = standardized(features);
    std::mt19937_64 rng = streams.stream("mc-jitter-y", t);
    add_jitter(y_jittered, rng);
    MiEstimate est;
    est.k = options.knn_k;
    est.sample_count = trials;
    est.value = ksg_core(x_jittered, y_jittered, options.knn_k);
    est.normalized =
        self_information > 0 ? std::clamp(est.value / self_information, 0.0, 1.0) : 0.0;
    result.per_iter.push_back(est);
    if (options.collect_features) result.features.push_back(std::move(features));
  }
  return result;
}

}  // namespace ppdem
