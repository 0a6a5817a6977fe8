#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "commands.hpp"
#include "experiment_config.hpp"
#include "ppdem/errors.hpp"

namespace {

using ppdem::cli::ExperimentConfig;

void add_common_flags(CLI::App* cmd, ExperimentConfig& config, std::string& config_file) {
  cmd->add_option("--config", config_file, "JSON config file; flags override its values");
  cmd->add_option("--seed", config.seed, "master seed for all labeled substreams");
  cmd->add_option("--out", config.output_dir, "output directory");
}

void add_graph_flags(CLI::App* cmd, ExperimentConfig& config) {
  cmd->add_option("--graph-type", config.graph_type, "geometric | file | fig1");
  cmd->add_option("--n", config.graph_n, "node count for geometric graphs");
  cmd->add_option("--radius", config.graph_radius,
                  "geometric radius; negative selects sqrt(2 ln n / n)");
  cmd->add_option("--graph", config.graph_file, "edge-list file (sets --graph-type file)");
  cmd->add_option("--retry-cap", config.graph_retry_cap, "connectivity retry cap");
}

void add_data_flags(CLI::App* cmd, ExperimentConfig& config) {
  cmd->add_option("--data", config.data_path, "CSV dataset (sets --data-type csv)");
  cmd->add_option("--data-type", config.data_type, "csv | synthetic");
  cmd->add_option("--label-column", config.label_column, "label column to split off");
  cmd->add_option("--drop-columns", config.drop_columns, "columns to discard (e.g. name)");
  cmd->add_option("--pca", config.pca_k, "project to this many principal components");
}

int dispatch(const std::string& name, const ExperimentConfig& config) {
  std::vector<std::string> written;
  if (name == "graph-gen") {
    written = ppdem::cli::cmd_graph_gen(config);
  } else if (name == "em-run") {
    written = ppdem::cli::cmd_em_run(config);
  } else if (name == "privacy-audit") {
    written = ppdem::cli::cmd_privacy_audit(config);
  } else {
    written = ppdem::cli::cmd_calibrate_mi(config);
  }
  for (const std::string& path : written) std::cout << path << '\n';
  return 0;
}

template <typename E>
bool emit_error_as(const std::exception& e, const char* name) {
  if (dynamic_cast<const E*>(&e) == nullptr) return false;
  nlohmann::json j;
  j["error"] = name;
  j["message"] = e.what();
  std::cerr << j.dump() << std::endl;
  return true;
}

void emit_error(const std::exception& e) {
  if (emit_error_as<ppdem::NoHamiltonianCycle>(e, "NoHamiltonianCycle")) return;
  if (emit_error_as<ppdem::HonestSubgraphDisconnected>(e, "HonestSubgraphDisconnected")) return;
  if (emit_error_as<ppdem::InsufficientSamples>(e, "InsufficientSamples")) return;
  if (emit_error_as<ppdem::RetriesExhausted>(e, "RetriesExhausted")) return;
  if (emit_error_as<ppdem::MaxItersExceeded>(e, "MaxItersExceeded")) return;
  if (emit_error_as<ppdem::EmptyComponent>(e, "EmptyComponent")) return;
  if (emit_error_as<ppdem::NotPositiveDefinite>(e, "NotPositiveDefinite")) return;
  if (emit_error_as<ppdem::DegenerateDenominator>(e, "DegenerateDenominator")) return;
  if (emit_error_as<ppdem::UnrecoverableNode>(e, "UnrecoverableNode")) return;
  if (emit_error_as<ppdem::RankDeficient>(e, "RankDeficient")) return;
  if (emit_error_as<ppdem::NonNumeric>(e, "NonNumeric")) return;
  if (emit_error_as<ppdem::ParseError>(e, "ParseError")) return;
  if (emit_error_as<ppdem::InvalidArgument>(e, "InvalidArgument")) return;
  if (emit_error_as<ppdem::Error>(e, "Error")) return;
  nlohmann::json j;
  j["error"] = "Exception";
  j["message"] = e.what();
  std::cerr << j.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed Gaussian-mixture EM simulator with privacy instrumentation"};
  app.require_subcommand(1);

  ExperimentConfig config;
  if (const char* env_out = std::getenv("PPDEM_OUTPUT_DIR")) config.output_dir = env_out;
  std::string config_file;

  CLI::App* graph_gen = app.add_subcommand(
      "graph-gen", "Generate a connected geometric topology and its report");
  add_common_flags(graph_gen, config, config_file);
  add_graph_flags(graph_gen, config);

  CLI::App* em_run = app.add_subcommand(
      "em-run", "Run one protocol plus the single-site oracle and compare");
  add_common_flags(em_run, config, config_file);
  add_graph_flags(em_run, config);
  add_data_flags(em_run, config);
  em_run->add_option("--protocol", config.protocol, "federated | secure-sum | subspace");
  em_run->add_option("--components", config.components, "mixture components");
  em_run->add_option("--iters", config.iters, "EM iterations");
  em_run->add_option("--sigma-lambda", config.sigma_lambda, "dual initialization stddev");
  em_run->add_option("--rho", config.rho, "primal-dual step constant");
  em_run->add_option("--consensus-tol,--tol", config.consensus_tol, "consensus stopping tolerance");
  em_run->add_option("--max-iters", config.consensus_max_iters, "consensus iteration cap");
  em_run->add_option("--mode", config.consensus_mode, "synchronous | asynchronous");
  em_run->add_option("--mask-scale", config.mask_scale, "ring mask scale factor");
  em_run->add_flag("--encrypt-relays", config.encrypt_relays, "mark ring relays encrypted");
  em_run->add_option("--transcript", config.transcript, "full | off");

  CLI::App* audit = app.add_subcommand(
      "privacy-audit", "Monte-Carlo leakage meter per protocol (NMI per iteration)");
  add_common_flags(audit, config, config_file);
  add_graph_flags(audit, config);
  audit->add_option("--protocol", config.protocol, "single protocol to audit");
  audit->add_option("--protocols", config.protocols, "protocols to audit side by side");
  audit->add_option("--corrupt", config.corrupt, "corrupt node labels (e.g. --corrupt 2 4)")
      ->delimiter(',');
  audit->add_option("--adversary", config.adversary, "passive | eavesdrop");
  audit->add_option("--target", config.target_node, "honest node under audit");
  audit->add_option("--trials", config.trials, "Monte Carlo trials pooled per estimate");
  audit->add_option("--knn-k", config.knn_k, "k of the k-NN estimator");
  audit->add_option("--repetitions", config.repetitions, "meter repetitions for stderr");
  audit->add_option("--iters", config.audit_iters, "EM iterations to audit");
  audit->add_option("--mask-scale", config.mask_scale, "ring mask scale factor");
  audit->add_flag("--dump-features,!--no-dump-features", config.dump_features,
                  "write the per-iteration view-feature CSV (one repetition)");

  CLI::App* calibrate = app.add_subcommand(
      "calibrate-mi", "Check the k-NN estimator against closed-form Gaussian MI");
  add_common_flags(calibrate, config, config_file);
  calibrate->add_option("--rho", config.calib_rho, "correlations to sweep")->delimiter(',');
  calibrate->add_option("--samples", config.calib_samples, "sample counts to sweep")
      ->delimiter(',');
  calibrate->add_option("--repetitions", config.calib_repetitions, "repetitions per cell");
  calibrate->add_option("--knn-k", config.knn_k, "k of the k-NN estimator");

  // Parse once to resolve --config, then re-parse so flags override the file.
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    if (!config_file.empty()) {
      ExperimentConfig from_file = ExperimentConfig::from_file(config_file);
      std::swap(config, from_file);
      app.clear();
      app.parse(argc, argv);
    }
    if (!config.graph_file.empty() && graph_gen->count("--graph-type") == 0 &&
        em_run->count("--graph-type") == 0 && audit->count("--graph-type") == 0) {
      config.graph_type = "file";
    }
    if (!config.data_path.empty() && em_run->count("--data-type") == 0) config.data_type = "csv";
    for (CLI::App* sub : app.get_subcommands()) return dispatch(sub->get_name(), config);
  } catch (const std::exception& e) {
    emit_error(e);
    return 1;
  }
  return 1;
}
