#include "ppdem/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "ppdem/errors.hpp"
#include "ppdem/rng.hpp"

namespace ppdem {

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    // trim surrounding whitespace
    const auto first = field.find_first_not_of(" \t\r");
    const auto last = field.find_last_not_of(" \t\r");
    fields.push_back(first == std::string::npos ? "" : field.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && !s.empty();
}

}  // namespace

Dataset parse_csv(const std::string& text, const std::string& label_column,
                  const std::vector<std::string>& drop_columns) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  std::vector<long> row_numbers;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    rows.push_back(split_commas(line));
    row_numbers.push_back(line_no);
  }
  if (rows.empty()) throw ParseError("no data rows", 1, 1);

  const std::size_t width = rows.front().size();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != width) {
      throw ParseError("ragged row: expected " + std::to_string(width) + " fields, found " +
                           std::to_string(rows[r].size()),
                       row_numbers[r], 1);
    }
  }

  // Header detection: any non-numeric first-row field means a header; named
  // label/drop columns require one.
  bool has_header = false;
  for (const std::string& f : rows.front()) {
    double tmp;
    if (!parse_double(f, tmp)) {
      has_header = true;
      break;
    }
  }
  if ((!label_column.empty() || !drop_columns.empty()) && !has_header) {
    throw ParseError("named columns require a header row", row_numbers.front(), 1);
  }

  std::vector<std::string> names(width);
  std::size_t first_data = 0;
  if (has_header) {
    names = rows.front();
    first_data = 1;
    if (rows.size() == 1) throw ParseError("header without data rows", row_numbers.front(), 1);
  } else {
    for (std::size_t c = 0; c < width; ++c) names[c] = "col" + std::to_string(c);
  }

  long label_index = -1;
  std::vector<char> dropped(width, 0);
  if (!label_column.empty()) {
    const auto it = std::find(names.begin(), names.end(), label_column);
    if (it == names.end()) {
      throw ParseError("label column '" + label_column + "' not found", row_numbers.front(), 1);
    }
    label_index = it - names.begin();
  }
  for (const std::string& drop : drop_columns) {
    const auto it = std::find(names.begin(), names.end(), drop);
    if (it == names.end()) {
      throw ParseError("drop column '" + drop + "' not found", row_numbers.front(), 1);
    }
    dropped[it - names.begin()] = 1;
  }
  if (label_index >= 0 && dropped[label_index]) {
    throw InvalidArgument("label column cannot also be dropped");
  }

  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < width; ++c) {
    if (static_cast<long>(c) != label_index && !dropped[c]) feature_cols.push_back(c);
  }
  if (feature_cols.empty()) throw ParseError("no feature columns left", row_numbers.front(), 1);

  const std::size_t n = rows.size() - first_data;
  Dataset ds;
  ds.values.resize(n, feature_cols.size());
  if (label_index >= 0) {
    ds.labels.resize(n);
    ds.label_name = label_column;
  }
  for (std::size_t c = 0; c < feature_cols.size(); ++c) ds.feature_names.push_back(names[feature_cols[c]]);

  for (std::size_t r = 0; r < n; ++r) {
    const auto& row = rows[r + first_data];
    for (std::size_t c = 0; c < feature_cols.size(); ++c) {
      double v;
      if (!parse_double(row[feature_cols[c]], v) || !std::isfinite(v)) {
        throw NonNumeric("non-numeric value '" + row[feature_cols[c]] + "'",
                         row_numbers[r + first_data], static_cast<long>(feature_cols[c]) + 1);
      }
      ds.values(r, c) = v;
    }
    if (label_index >= 0) {
      double v;
      if (!parse_double(row[label_index], v) || !std::isfinite(v)) {
        throw NonNumeric("non-numeric label '" + row[label_index] + "'",
                         row_numbers[r + first_data], label_index + 1);
      }
      ds.labels[r] = v;
    }
  }
  return ds;
}

Dataset load_csv(const std::string& path, const std::string& label_column,
                 const std::vector<std::string>& drop_columns) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), label_column, drop_columns);
}

std::string to_csv(const Eigen::MatrixXd& values, const std::vector<std::string>& column_names) {
  std::ostringstream out;
  out.precision(17);
  if (!column_names.empty()) {
    for (std::size_t c = 0; c < column_names.size(); ++c) {
      if (c) out << ',';
      out << column_names[c];
    }
    out << '\n';
  }
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      if (c) out << ',';
      out << values(r, c);
    }
    out << '\n';
  }
  return out.str();
}

PcaResult pca(const Eigen::MatrixXd& data, int k) {
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  if (n < 2) throw InvalidArgument("PCA needs at least two instances");
  if (k < 1 || k > std::min<Eigen::Index>(n, d)) {
    throw InvalidArgument("PCA component count out of range");
  }
  PcaResult res;
  res.mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - res.mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw Error("eigendecomposition failed");
  const Eigen::VectorXd evals = eig.eigenvalues();  // ascending
  res.total_variance = evals.sum();
  const double tol = 1e-12 * std::max(1.0, evals.cwiseAbs().maxCoeff());
  int positive = 0;
  for (Eigen::Index i = 0; i < evals.size(); ++i) {
    if (evals[i] > tol) ++positive;
  }
  if (positive < k) {
    throw RankDeficient("only " + std::to_string(positive) + " positive eigenvalues, need " +
                        std::to_string(k));
  }
  res.components.resize(k, d);
  res.explained_variance.resize(k);
  for (int c = 0; c < k; ++c) {
    const Eigen::Index src = evals.size() - 1 - c;  // descending order
    Eigen::VectorXd v = eig.eigenvectors().col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0) v = -v;
    res.components.row(c) = v.transpose();
    res.explained_variance[c] = evals[src];
  }
  res.projected = centered * res.components.transpose();
  return res;
}

SyntheticPrivateData synthetic_private_data(int n, int c, std::uint64_t seed,
                                            bool normalize_over_nodes) {
  if (n < 1 || c < 1) throw InvalidArgument("need n >= 1 and c >= 1");
  SeedStreams streams(seed);
  std::mt19937_64 xs = streams.stream("private-x");
  std::mt19937_64 rs = streams.stream("private-resp");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SyntheticPrivateData out;
  out.x.resize(n);
  for (int i = 0; i < n; ++i) out.x[i] = normal(xs);
  out.responsibilities.resize(n, c);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < c; ++j) out.responsibilities(i, j) = unit(rs);
  }
  if (normalize_over_nodes) {
    for (int j = 0; j < c; ++j) {
      const double s = out.responsibilities.col(j).sum();
      out.responsibilities.col(j) /= s;
    }
  } else {
    // Per node across components; the last entry absorbs the rounding so
    // every row sums to exactly 1.
    for (int i = 0; i < n; ++i) {
      const double s = out.responsibilities.row(i).sum();
      double acc = 0.0;
      for (int j = 0; j + 1 < c; ++j) {
        out.responsibilities(i, j) /= s;
        acc += out.responsibilities(i, j);
      }
      out.responsibilities(i, c - 1) = 1.0 - acc;
    }
  }
  return out;
}

LabeledSample synthetic_gmm_data(const GmmParams& params, int count, std::uint64_t seed) {
  params.validate();
  const int c = params.components();
  const int d = params.dim();
  std::vector<Eigen::MatrixXd> chol;
  chol.reserve(c);
  for (int j = 0; j < c; ++j) {
    chol.push_back(Eigen::LLT<Eigen::MatrixXd>(params.covariances[j]).matrixL());
  }
  std::mt19937_64 rng(SeedStreams(seed).derive("gmm-sample"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  LabeledSample out;
  out.points.resize(count, d);
  out.labels.resize(count);
  for (int p = 0; p < count; ++p) {
    const double u = unit(rng);
    int j = 0;
    double cum = params.weights[0];
    while (j + 1 < c && u > cum) cum += params.weights[++j];
    Eigen::VectorXd z(d);
    for (int a = 0; a < d; ++a) z[a] = normal(rng);
    out.points.row(p) = (params.means[j] + chol[j] * z).transpose();
    out.labels[p] = j;
  }
  return out;
}

std::vector<Eigen::MatrixXd> assign_contiguous_blocks(const Eigen::MatrixXd& points, int n_nodes) {
  const Eigen::Index n = points.rows();
  if (n_nodes < 1) throw InvalidArgument("need at least one node");
  if (n < n_nodes) throw InvalidArgument("fewer points than nodes");
  const Eigen::Index base = n / n_nodes;
  const Eigen::Index larger = n % n_nodes;  // first `larger` nodes get base+1 points
  std::vector<Eigen::MatrixXd> blocks;
  blocks.reserve(n_nodes);
  Eigen::Index pos = 0;
  for (int i = 0; i < n_nodes; ++i) {
    const Eigen::Index size = base + (i < larger ? 1 : 0);
    blocks.push_back(points.middleRows(pos, size));
    pos += size;
  }
  return blocks;
}

}  // namespace ppdem
