#include "experiment_config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ppdem/errors.hpp"

namespace ppdem::cli {

namespace {

template <typename T>
void read_if_present(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["graph_type"] = graph_type;
  j["graph_n"] = graph_n;
  j["graph_radius"] = graph_radius;
  j["graph_file"] = graph_file;
  j["graph_retry_cap"] = graph_retry_cap;
  j["data_type"] = data_type;
  j["data_path"] = data_path;
  j["label_column"] = label_column;
  j["drop_columns"] = drop_columns;
  j["pca_k"] = pca_k;
  j["synthetic_points"] = synthetic_points;
  j["synthetic_features"] = synthetic_features;
  j["synthetic_clusters"] = synthetic_clusters;
  j["synthetic_separation"] = synthetic_separation;
  j["protocol"] = protocol;
  j["protocols"] = protocols;
  j["components"] = components;
  j["iters"] = iters;
  j["sigma_lambda"] = sigma_lambda;
  j["rho"] = rho;
  j["consensus_tol"] = consensus_tol;
  j["consensus_max_iters"] = consensus_max_iters;
  j["consensus_mode"] = consensus_mode;
  j["mask_scale"] = mask_scale;
  j["encrypt_relays"] = encrypt_relays;
  j["transcript"] = transcript;
  j["corrupt"] = corrupt;
  j["adversary"] = adversary;
  j["target_node"] = target_node;
  j["trials"] = trials;
  j["knn_k"] = knn_k;
  j["repetitions"] = repetitions;
  j["audit_iters"] = audit_iters;
  j["dump_features"] = dump_features;
  j["calib_rho"] = calib_rho;
  j["calib_samples"] = calib_samples;
  j["calib_repetitions"] = calib_repetitions;
  j["output_dir"] = output_dir;
  return j.dump();
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("bad config JSON: ") + e.what(), 1, 1);
  }
  ExperimentConfig c;
  read_if_present(j, "seed", c.seed);
  read_if_present(j, "graph_type", c.graph_type);
  read_if_present(j, "graph_n", c.graph_n);
  read_if_present(j, "graph_radius", c.graph_radius);
  read_if_present(j, "graph_file", c.graph_file);
  read_if_present(j, "graph_retry_cap", c.graph_retry_cap);
  read_if_present(j, "data_type", c.data_type);
  read_if_present(j, "data_path", c.data_path);
  read_if_present(j, "label_column", c.label_column);
  read_if_present(j, "drop_columns", c.drop_columns);
  read_if_present(j, "pca_k", c.pca_k);
  read_if_present(j, "synthetic_points", c.synthetic_points);
  read_if_present(j, "synthetic_features", c.synthetic_features);
  read_if_present(j, "synthetic_clusters", c.synthetic_clusters);
  read_if_present(j, "synthetic_separation", c.synthetic_separation);
  read_if_present(j, "protocol", c.protocol);
  read_if_present(j, "protocols", c.protocols);
  read_if_present(j, "components", c.components);
  read_if_present(j, "iters", c.iters);
  read_if_present(j, "sigma_lambda", c.sigma_lambda);
  read_if_present(j, "rho", c.rho);
  read_if_present(j, "consensus_tol", c.consensus_tol);
  read_if_present(j, "consensus_max_iters", c.consensus_max_iters);
  read_if_present(j, "consensus_mode", c.consensus_mode);
  read_if_present(j, "mask_scale", c.mask_scale);
  read_if_present(j, "encrypt_relays", c.encrypt_relays);
  read_if_present(j, "transcript", c.transcript);
  read_if_present(j, "corrupt", c.corrupt);
  read_if_present(j, "adversary", c.adversary);
  read_if_present(j, "target_node", c.target_node);
  read_if_present(j, "trials", c.trials);
  read_if_present(j, "knn_k", c.knn_k);
  read_if_present(j, "repetitions", c.repetitions);
  read_if_present(j, "audit_iters", c.audit_iters);
  read_if_present(j, "dump_features", c.dump_features);
  read_if_present(j, "calib_rho", c.calib_rho);
  read_if_present(j, "calib_samples", c.calib_samples);
  read_if_present(j, "calib_repetitions", c.calib_repetitions);
  read_if_present(j, "output_dir", c.output_dir);
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  // Result files embed the config under a "config" key; accept those too.
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (!j.is_discarded() && j.is_object() && j.contains("config") && j.at("config").is_object()) {
    return from_json(j.at("config").dump());
  }
  return from_json(text);
}

}  // namespace ppdem::cli
