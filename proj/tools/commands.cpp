#include "commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ppdem/adversary.hpp"
#include "ppdem/consensus.hpp"
#include "ppdem/data.hpp"
#include "ppdem/errors.hpp"
#include "ppdem/gmm.hpp"
#include "ppdem/graph.hpp"
#include "ppdem/privacy_metrics.hpp"
#include "ppdem/protocols.hpp"
#include "ppdem/rng.hpp"

namespace ppdem::cli {

namespace {

namespace fs = std::filesystem;

std::string write_file(const fs::path& dir, const std::string& name, const std::string& content) {
  fs::create_directories(dir);
  const fs::path path = dir / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  return path.string();
}

std::string config_comment(const ExperimentConfig& config) {
  return "# config " + config.to_json() + "\n";
}

struct BuiltGraph {
  Graph graph;
  int retries = 0;
};

BuiltGraph build_graph(const ExperimentConfig& config) {
  SeedStreams streams(config.seed);
  if (config.graph_type == "fig1") return {demo_graph(), 0};
  if (config.graph_type == "file") {
    std::ifstream in(config.graph_file, std::ios::binary);
    if (!in) throw Error("cannot open graph file " + config.graph_file);
    std::ostringstream buf;
    buf << in.rdbuf();
    return {Graph::from_edge_list(buf.str()), 0};
  }
  if (config.graph_type != "geometric") {
    throw InvalidArgument("unknown graph_type: " + config.graph_type);
  }
  const int n = config.graph_n;
  const double radius = config.graph_radius < 0
                            ? std::sqrt(2.0 * std::log(static_cast<double>(n)) / n)
                            : config.graph_radius;
  // Disconnected draws retry with a fresh placement; a non-positive radius
  // can never connect and runs the retries out.
  for (int attempt = 0; attempt < config.graph_retry_cap; ++attempt) {
    Graph g = radius > 0 ? random_geometric_graph(n, radius, streams.derive("graph", attempt))
                         : Graph(n, {});
    if (is_connected(g)) return {std::move(g), attempt};
  }
  throw RetriesExhausted("no connected geometric graph after " +
                         std::to_string(config.graph_retry_cap) + " placements");
}

Eigen::MatrixXd build_dataset(const ExperimentConfig& config, bool* projected = nullptr) {
  SeedStreams streams(config.seed);
  Eigen::MatrixXd points;
  if (config.data_type == "csv") {
    points = load_csv(config.data_path, config.label_column, config.drop_columns).values;
  } else if (config.data_type == "synthetic") {
    const int c = config.synthetic_clusters;
    const int d = config.synthetic_features;
    GmmParams truth;
    truth.weights = Eigen::VectorXd::Constant(c, 1.0 / c);
    std::mt19937_64 rng = streams.stream("data-centers");
    std::normal_distribution<double> center(0.0, config.synthetic_separation);
    for (int j = 0; j < c; ++j) {
      Eigen::VectorXd mu(d);
      for (int a = 0; a < d; ++a) mu[a] = center(rng);
      truth.means.push_back(std::move(mu));
      truth.covariances.push_back(Eigen::MatrixXd::Identity(d, d));
    }
    points = synthetic_gmm_data(truth, config.synthetic_points, streams.derive("data-sample")).points;
  } else {
    throw InvalidArgument("unknown data_type: " + config.data_type);
  }
  if (config.pca_k > 0) points = pca(points, config.pca_k).projected;
  if (projected) *projected = config.pca_k > 0;
  return points;
}

ProtocolRun dispatch_protocol(const std::string& protocol, const ExperimentConfig& config,
                              const Graph& graph, const std::vector<Eigen::MatrixXd>& node_data,
                              const GmmParams& init, std::uint64_t seed) {
  const TranscriptPolicy policy =
      config.transcript == "off" ? TranscriptPolicy::kOff : TranscriptPolicy::kFull;
  EmOptions em;
  switch (protocol_from_string(protocol)) {
    case ProtocolKind::kFederated: {
      FederatedOptions opts;
      opts.em = em;
      opts.transcript = policy;
      return run_federated_em(node_data, config.components, config.iters, init, seed, opts);
    }
    case ProtocolKind::kSecureSum: {
      SecureSumOptions opts;
      opts.em = em;
      opts.mask_scale_factor = config.mask_scale;
      opts.encrypt_relays = config.encrypt_relays;
      opts.transcript = policy;
      return run_secure_sum_em(graph, node_data, config.components, config.iters, init, seed, opts);
    }
    case ProtocolKind::kSubspace:
    default: {
      SubspaceOptions opts;
      opts.em = em;
      opts.rho = config.rho;
      opts.consensus.tol = config.consensus_tol;
      opts.consensus.max_iters = config.consensus_max_iters;
      opts.consensus.mode = config.consensus_mode == "asynchronous"
                                ? ConsensusMode::kAsynchronous
                                : ConsensusMode::kSynchronous;
      opts.consensus.transcript = policy;
      opts.transcript = policy;
      return run_subspace_em(graph, node_data, config.components, config.iters, init,
                             config.sigma_lambda, seed, opts);
    }
  }
}

nlohmann::json params_json(const GmmParams& p) { return nlohmann::json::parse(p.to_json()); }

}  // namespace

std::vector<std::string> cmd_graph_gen(const ExperimentConfig& config) {
  const BuiltGraph built = build_graph(config);
  std::vector<std::string> written;
  written.push_back(
      write_file(config.output_dir, "graph.txt", config_comment(config) + built.graph.to_edge_list()));
  nlohmann::json report;
  report["config"] = nlohmann::json::parse(config.to_json());
  report["nodes"] = built.graph.node_count();
  report["edges"] = built.graph.edge_count();
  report["connected"] = is_connected(built.graph);
  report["retries"] = built.retries;
  written.push_back(write_file(config.output_dir, "graph_report.json", report.dump(2) + "\n"));
  return written;
}

std::vector<std::string> cmd_em_run(const ExperimentConfig& config) {
  SeedStreams streams(config.seed);
  const BuiltGraph built = build_graph(config);
  bool was_projected = false;
  const Eigen::MatrixXd points = build_dataset(config, &was_projected);
  const auto node_data = assign_contiguous_blocks(points, built.graph.node_count());
  const GmmParams init = init_params(points, config.components, streams.derive("init"));

  const EmTrace oracle = centralized_em(points, config.components, config.iters, init);
  const ProtocolRun run = dispatch_protocol(config.protocol, config, built.graph, node_data, init,
                                            streams.derive("protocol"));

  std::vector<std::string> written;
  if (was_projected) {
    written.push_back(write_file(config.output_dir, "projected_data.csv",
                                 config_comment(config) + to_csv(points)));
  }

  nlohmann::json trajectory;
  trajectory["config"] = nlohmann::json::parse(config.to_json());
  trajectory["protocol"] = std::string(to_string(run.protocol));
  trajectory["params"] = nlohmann::json::array();
  for (const GmmParams& p : run.trajectory) trajectory["params"].push_back(params_json(p));
  written.push_back(
      write_file(config.output_dir, "trajectory.json", trajectory.dump(2) + "\n"));

  std::ostringstream loglik;
  loglik << config_comment(config) << "iter,loglik\n";
  loglik.precision(17);
  for (std::size_t t = 0; t < run.loglik.size(); ++t) loglik << t << ',' << run.loglik[t] << '\n';
  written.push_back(write_file(config.output_dir, "loglik.csv", loglik.str()));

  written.push_back(
      write_file(config.output_dir, "transcript.jsonl", run.transcript.to_jsonl()));

  nlohmann::json comparison;
  comparison["config"] = nlohmann::json::parse(config.to_json());
  double max_loglik_dev = 0.0;
  nlohmann::json per_iter = nlohmann::json::array();
  for (std::size_t t = 0; t < run.loglik.size(); ++t) {
    const double loglik_dev = std::abs(run.loglik[t] - oracle.loglik[t]);
    max_loglik_dev = std::max(max_loglik_dev, loglik_dev);
    double param_dev = 0.0;
    const GmmParams& a = run.trajectory[t];
    const GmmParams& b = oracle.params[t];
    nlohmann::json row;
    row["iter"] = t;
    row["loglik"] = run.loglik[t];
    row["oracle_loglik"] = oracle.loglik[t];
    row["loglik_abs_dev"] = loglik_dev;
    for (int j = 0; j < a.components(); ++j) {
      param_dev = std::max(param_dev, std::abs(a.weights[j] - b.weights[j]));
      param_dev = std::max(param_dev, (a.means[j] - b.means[j]).cwiseAbs().maxCoeff());
      param_dev = std::max(param_dev, (a.covariances[j] - b.covariances[j]).cwiseAbs().maxCoeff());
    }
    row["param_abs_dev"] = param_dev;
    per_iter.push_back(row);
  }
  comparison["per_iter"] = per_iter;
  comparison["max_loglik_abs_dev"] = max_loglik_dev;
  if (!run.consensus_iters.empty()) comparison["consensus_iters"] = run.consensus_iters;
  written.push_back(write_file(config.output_dir, "comparison.json", comparison.dump(2) + "\n"));
  return written;
}

std::vector<std::string> cmd_privacy_audit(const ExperimentConfig& config) {
  const BuiltGraph built = build_graph(config);
  const std::set<int> corrupt(config.corrupt.begin(), config.corrupt.end());
  std::vector<std::string> protocols = config.protocols;
  if (protocols.empty()) protocols = {config.protocol};

  LeakageOptions options;
  options.components = 1;  // scalar synthetic model
  options.knn_k = config.knn_k;
  options.mask_scale = config.mask_scale;
  options.adversary = config.adversary == "eavesdrop" ? AdversaryKind::kEavesdropper
                                                      : AdversaryKind::kPassive;

  SeedStreams streams(config.seed);
  std::vector<std::string> written;
  nlohmann::json summary;
  summary["config"] = nlohmann::json::parse(config.to_json());
  std::map<std::string, std::vector<double>> means;
  std::map<std::string, std::vector<double>> errs;

  for (const std::string& name : protocols) {
    const ProtocolKind kind = protocol_from_string(name);
    std::vector<std::vector<double>> reps;  // [rep][iter]
    for (int rep = 0; rep < config.repetitions; ++rep) {
      LeakageOptions rep_options = options;
      rep_options.collect_features = config.dump_features && rep == 0;
      const LeakageResult res =
          monte_carlo_leakage(kind, built.graph, corrupt, config.target_node, config.trials,
                              config.audit_iters, streams.derive("audit", rep), rep_options);
      std::vector<double> nmi;
      for (const MiEstimate& e : res.per_iter) nmi.push_back(e.normalized);
      reps.push_back(std::move(nmi));
      if (rep_options.collect_features) {
        // The per-iteration adversary-view features behind the estimates.
        std::ostringstream fcsv;
        fcsv << config_comment(config) << "iter,trial";
        for (Eigen::Index f = 0; f < res.features.front().cols(); ++f) fcsv << ",f" << f;
        fcsv << '\n';
        fcsv.precision(17);
        for (std::size_t t = 0; t < res.features.size(); ++t) {
          for (Eigen::Index tr = 0; tr < res.features[t].rows(); ++tr) {
            fcsv << t << ',' << tr;
            for (Eigen::Index f = 0; f < res.features[t].cols(); ++f) {
              fcsv << ',' << res.features[t](tr, f);
            }
            fcsv << '\n';
          }
        }
        written.push_back(
            write_file(config.output_dir, "features_" + name + ".csv", fcsv.str()));
      }
    }
    std::ostringstream csv;
    csv << config_comment(config) << "iter,nmi,stderr\n";
    csv.precision(17);
    std::vector<double> mean_per_iter, se_per_iter;
    for (int t = 0; t < config.audit_iters; ++t) {
      double mean = 0.0;
      for (const auto& rep : reps) mean += rep[t];
      mean /= reps.size();
      double var = 0.0;
      for (const auto& rep : reps) var += (rep[t] - mean) * (rep[t] - mean);
      const double se = reps.size() > 1 ? std::sqrt(var / (reps.size() - 1) / reps.size()) : 0.0;
      csv << t << ',' << mean << ',' << se << '\n';
      mean_per_iter.push_back(mean);
      se_per_iter.push_back(se);
    }
    means[name] = mean_per_iter;
    errs[name] = se_per_iter;
    summary["nmi"][name] = mean_per_iter;
    summary["stderr"][name] = se_per_iter;
    written.push_back(write_file(config.output_dir, "nmi_" + name + ".csv", csv.str()));
  }

  // Leakage ordering report when all three protocols were requested.
  if (means.count("federated") && means.count("secure-sum") && means.count("subspace")) {
    bool ordered = true;
    double min_gap_sigmas = std::numeric_limits<double>::infinity();
    for (int t = 0; t < config.audit_iters; ++t) {
      const double fed = means["federated"][t], sec = means["secure-sum"][t],
                   sub = means["subspace"][t];
      const double se_fs = std::hypot(errs["federated"][t], errs["secure-sum"][t]);
      const double se_ss = std::hypot(errs["secure-sum"][t], errs["subspace"][t]);
      ordered = ordered && sub < sec && sec < fed;
      if (se_fs > 0) min_gap_sigmas = std::min(min_gap_sigmas, (fed - sec) / se_fs);
      if (se_ss > 0) min_gap_sigmas = std::min(min_gap_sigmas, (sec - sub) / se_ss);
    }
    summary["ordering_holds"] = ordered;
    summary["min_gap_stderrs"] = min_gap_sigmas;
  }
  written.push_back(write_file(config.output_dir, "audit_summary.json", summary.dump(2) + "\n"));
  return written;
}

std::vector<std::string> cmd_calibrate_mi(const ExperimentConfig& config) {
  SeedStreams streams(config.seed);
  std::ostringstream csv;
  csv << config_comment(config) << "rho,n,true_mi,mean_estimate,mean_rel_error,sd\n";
  csv.precision(10);
  nlohmann::json report;
  report["config"] = nlohmann::json::parse(config.to_json());
  nlohmann::json rows = nlohmann::json::array();
  std::uint64_t draw = 0;
  for (double rho : config.calib_rho) {
    for (int n : config.calib_samples) {
      const double truth = rho == 0.0 ? 0.0 : -0.5 * std::log(1.0 - rho * rho);
      std::vector<double> estimates;
      for (int rep = 0; rep < config.calib_repetitions; ++rep) {
        std::mt19937_64 rng = streams.stream("calib", draw++);
        std::normal_distribution<double> normal(0.0, 1.0);
        Eigen::MatrixXd x(n, 1), y(n, 1);
        const double co = std::sqrt(1.0 - rho * rho);
        for (int i = 0; i < n; ++i) {
          const double u = normal(rng);
          const double v = normal(rng);
          x(i, 0) = u;
          y(i, 0) = rho * u + co * v;
        }
        estimates.push_back(ksg_mi(x, y, config.knn_k, streams.derive("calib-jitter", draw)));
      }
      double mean = std::accumulate(estimates.begin(), estimates.end(), 0.0) / estimates.size();
      double var = 0.0;
      for (double e : estimates) var += (e - mean) * (e - mean);
      const double sd = estimates.size() > 1 ? std::sqrt(var / (estimates.size() - 1)) : 0.0;
      const double rel = truth != 0.0 ? (mean - truth) / truth : mean;
      csv << rho << ',' << n << ',' << truth << ',' << mean << ',' << rel << ',' << sd << '\n';
      nlohmann::json row;
      row["rho"] = rho;
      row["n"] = n;
      row["true_mi"] = truth;
      row["mean_estimate"] = mean;
      row["mean_rel_error"] = rel;
      row["sd"] = sd;
      rows.push_back(row);
    }
  }
  report["rows"] = rows;
  std::vector<std::string> written;
  written.push_back(write_file(config.output_dir, "calibration.csv", csv.str()));
  written.push_back(write_file(config.output_dir, "calibration.json", report.dump(2) + "\n"));
  return written;
}

}  // namespace ppdem::cli
