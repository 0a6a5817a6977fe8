#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ppdem::cli {

// Flat, JSON-round-trippable description of one experiment. Every emitted
// result file embeds the resolved config so any output can be reproduced
// from itself.
struct ExperimentConfig {
  std::uint64_t seed = 1;

  // graph: geometric | file | fig1 (built-in 5-node demo topology)
  std::string graph_type = "fig1";
  int graph_n = 80;
  double graph_radius = -1.0;  // < 0 selects sqrt(2 ln n / n)
  std::string graph_file;
  int graph_retry_cap = 100;

  // data: csv | synthetic
  std::string data_type = "synthetic";
  std::string data_path;
  std::string label_column;
  std::vector<std::string> drop_columns;
  int pca_k = 0;  // 0 = no projection
  int synthetic_points = 195;
  int synthetic_features = 22;
  int synthetic_clusters = 2;
  double synthetic_separation = 4.0;

  // protocol run
  std::string protocol = "subspace";
  std::vector<std::string> protocols;  // privacy-audit can take several
  int components = 2;
  int iters = 30;
  double sigma_lambda = 100.0;
  double rho = 0.4;
  double consensus_tol = 1e-8;
  int consensus_max_iters = 200000;
  std::string consensus_mode = "synchronous";
  double mask_scale = 1e3;
  bool encrypt_relays = false;
  std::string transcript = "full";  // full | off

  // adversary / audit
  std::vector<int> corrupt;
  std::string adversary = "passive";  // passive | eavesdrop
  int target_node = 1;
  int trials = 10000;
  int knn_k = 3;
  int repetitions = 10;
  int audit_iters = 10;
  bool dump_features = true;  // write the view-feature CSV behind the meter

  // calibrate-mi
  std::vector<double> calib_rho = {0.3, 0.6, 0.9};
  std::vector<int> calib_samples = {1000, 10000};
  int calib_repetitions = 20;

  std::string output_dir = "out";

  std::string to_json() const;
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);
};

}  // namespace ppdem::cli
