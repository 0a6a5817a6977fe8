#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ppdem/gmm.hpp"

namespace ppdem {

struct Dataset {
  Eigen::MatrixXd values;  // instances x features, all finite
  std::vector<std::string> feature_names;
  Eigen::VectorXd labels;  // empty unless a label column was extracted
  std::string label_name;

  bool has_labels() const { return labels.size() > 0; }
};

// Parses a comma-separated table. A header row is detected automatically (or
// required when a label/drop column is named). Lines starting with '#' are
// ignored. `label_column` is split off into Dataset::labels; `drop_columns`
// are discarded entirely (e.g. free-text id columns).
Dataset parse_csv(const std::string& text, const std::string& label_column = "",
                  const std::vector<std::string>& drop_columns = {});
Dataset load_csv(const std::string& path, const std::string& label_column = "",
                 const std::vector<std::string>& drop_columns = {});

// Full-precision round-trippable CSV of a numeric matrix.
std::string to_csv(const Eigen::MatrixXd& values,
                   const std::vector<std::string>& column_names = {});

struct PcaResult {
  Eigen::MatrixXd projected;        // instances x k
  Eigen::MatrixXd components;       // k x d, orthonormal rows
  Eigen::VectorXd explained_variance;  // top-k eigenvalues of the sample covariance
  double total_variance = 0.0;
  Eigen::VectorXd mean;             // column means removed before projection
};

// Top-k principal components of the sample covariance. Every component's
// largest-magnitude entry is made positive so results are reproducible.
// Throws RankDeficient when fewer than k eigenvalues are (numerically)
// positive.
PcaResult pca(const Eigen::MatrixXd& data, int k);

// The synthetic privacy-experiment model: one standard-normal scalar per
// node and uniform responsibilities. Normalization is per node across
// components by default; the alternative normalizes each component across
// nodes.
struct SyntheticPrivateData {
  Eigen::VectorXd x;                  // n
  Eigen::MatrixXd responsibilities;   // n x c
};
SyntheticPrivateData synthetic_private_data(int n, int c, std::uint64_t seed,
                                            bool normalize_over_nodes = false);

// Ancestral sampling from a mixture; labels are 0-based component indices.
struct LabeledSample {
  Eigen::MatrixXd points;
  std::vector<int> labels;
};
LabeledSample synthetic_gmm_data(const GmmParams& params, int count, std::uint64_t seed);

// Splits points into contiguous per-node batches, larger blocks first, so
// that every node is nonempty when count >= n_nodes.
std::vector<Eigen::MatrixXd> assign_contiguous_blocks(const Eigen::MatrixXd& points,
                                                      int n_nodes);

}  // namespace ppdem
