#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ppdem/data.hpp"
#include "ppdem/errors.hpp"
#include "test_support.hpp"

using namespace ppdem;

TEST_CASE("csv parsing: headers, labels, drops and error paths") {
  const Dataset plain = parse_csv("1,2,3\n");
  CHECK(plain.values.rows() == 1);
  CHECK(plain.values.cols() == 3);
  CHECK(plain.values(0, 2) == 3.0);
  CHECK_FALSE(plain.has_labels());

  const Dataset with_header = parse_csv("a,b,status\n1,2,1\n3,4,0\n", "status");
  CHECK(with_header.values.rows() == 2);
  CHECK(with_header.values.cols() == 2);
  CHECK(with_header.labels[0] == 1.0);
  CHECK(with_header.labels[1] == 0.0);
  CHECK(with_header.feature_names == std::vector<std::string>{"a", "b"});

  const Dataset dropped = parse_csv("name,a,status\nrec1,2,1\nrec2,4,0\n", "status", {"name"});
  CHECK(dropped.values.cols() == 1);
  CHECK(dropped.values(1, 0) == 4.0);

  CHECK_THROWS_AS(parse_csv(""), ParseError);
  CHECK_THROWS_AS(parse_csv("a,b\n"), ParseError);          // header, no rows
  CHECK_THROWS_AS(parse_csv("1,2\n3\n"), ParseError);       // ragged
  CHECK_THROWS_AS(parse_csv("a,b\n1,x\n"), NonNumeric);
  CHECK_THROWS_AS(parse_csv("a,b\n1,2\n", "missing"), ParseError);
}

TEST_CASE("a voice-measurements-shaped table reduces to 195 x 22") {
  std::mt19937_64 rng(5);
  std::ostringstream csv;
  csv << "name";
  for (int f = 0; f < 22; ++f) csv << ",f" << f;
  csv << ",status\n";
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int r = 0; r < 195; ++r) {
    csv << "subject" << r;
    for (int f = 0; f < 22; ++f) csv << ',' << unit(rng);
    csv << ',' << (r % 4 != 0 ? 1 : 0) << '\n';
  }
  const Dataset ds = parse_csv(csv.str(), "status", {"name"});
  CHECK(ds.values.rows() == 195);
  CHECK(ds.values.cols() == 22);
  CHECK(ds.labels.size() == 195);
}

TEST_CASE("numeric csv write/read round-trips losslessly") {
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd m = test::random_points(7, 3, rng);
  const Dataset back = parse_csv(to_csv(m));
  REQUIRE(back.values.rows() == 7);
  CHECK((back.values - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pca: rank-1 data, completeness and the moment invariants") {
  // Points on the line y = 2x.
  Eigen::MatrixXd line(5, 2);
  for (int i = 0; i < 5; ++i) {
    line(i, 0) = i;
    line(i, 1) = 2.0 * i;
  }
  const PcaResult r1 = pca(line, 1);
  CHECK(r1.explained_variance[0] == doctest::Approx(r1.total_variance).epsilon(1e-12));
  // Deterministic sign: the largest-magnitude entry of (1,2)/sqrt(5) is positive.
  CHECK(r1.components(0, 1) > 0.0);
  CHECK_THROWS_AS(pca(line, 2), RankDeficient);

  std::mt19937_64 rng(13);
  const Eigen::MatrixXd pts = test::random_points(40, 4, rng);
  const PcaResult full = pca(pts, 4);
  const Eigen::MatrixXd reconstructed =
      (full.projected * full.components).rowwise() + full.mean.transpose();
  CHECK((reconstructed - pts).cwiseAbs().maxCoeff() <= 1e-9);

  const PcaResult top2 = pca(pts, 2);
  CHECK(top2.projected.colwise().mean().cwiseAbs().maxCoeff() <= 1e-10);
  const Eigen::MatrixXd proj_cov =
      top2.projected.transpose() * top2.projected / static_cast<double>(pts.rows() - 1);
  CHECK(std::abs(proj_cov(0, 0) - top2.explained_variance[0]) <= 1e-8);
  CHECK(std::abs(proj_cov(1, 1) - top2.explained_variance[1]) <= 1e-8);
  CHECK(std::abs(proj_cov(0, 1)) <= 1e-8);
  CHECK(top2.explained_variance[0] >= top2.explained_variance[1]);
}

TEST_CASE("pca top eigenpairs agree with a power-iteration oracle") {
  std::mt19937_64 rng(21);
  const Eigen::MatrixXd pts = test::random_points(60, 6, rng);
  const Eigen::RowVectorXd mean = pts.colwise().mean();
  const Eigen::MatrixXd centered = pts.rowwise() - mean;
  Eigen::MatrixXd cov = centered.transpose() * centered / 59.0;

  const PcaResult result = pca(pts, 2);
  Eigen::MatrixXd deflated = cov;
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd v = Eigen::VectorXd::Ones(6).normalized();
    double eig = 0.0;
    for (int it = 0; it < 3000; ++it) {
      v = (deflated * v).normalized();
      eig = v.dot(deflated * v);
    }
    CHECK(result.explained_variance[k] == doctest::Approx(eig).epsilon(1e-6));
    CHECK(std::abs(v.dot(result.components.row(k).transpose())) ==
          doctest::Approx(1.0).epsilon(1e-6));
    deflated -= eig * v * v.transpose();
  }
}

TEST_CASE("synthetic private data: normalization and moments") {
  const SyntheticPrivateData one = synthetic_private_data(6, 1, 3);
  for (int i = 0; i < 6; ++i) CHECK(one.responsibilities(i, 0) == 1.0);

  const SyntheticPrivateData multi = synthetic_private_data(5, 3, 3);
  for (int i = 0; i < 5; ++i) {
    CHECK(multi.responsibilities.row(i).sum() == 1.0);
    CHECK(multi.responsibilities.row(i).minCoeff() >= 0.0);
  }

  const SyntheticPrivateData alt = synthetic_private_data(5, 3, 3, true);
  for (int j = 0; j < 3; ++j) {
    CHECK(alt.responsibilities.col(j).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }

  const SyntheticPrivateData big = synthetic_private_data(10000, 2, 5);
  CHECK(std::abs(big.x.mean()) < 0.05);
  const double var = (big.x.array() - big.x.mean()).square().sum() / (big.x.size() - 1);
  CHECK(std::abs(var - 1.0) < 0.05);

  const SyntheticPrivateData again = synthetic_private_data(10000, 2, 5);
  CHECK((again.x - big.x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mixture sampling follows the weights and component moments") {
  GmmParams truth;
  truth.weights = Eigen::VectorXd(2);
  truth.weights << 0.3, 0.7;
  truth.means = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
  truth.means[1][0] = 10.0;
  truth.covariances = {Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(1, 1)};
  const LabeledSample sample = synthetic_gmm_data(truth, 10000, 19);
  double fraction = 0.0;
  for (int label : sample.labels) fraction += label == 0 ? 1.0 : 0.0;
  fraction /= sample.labels.size();
  CHECK(std::abs(fraction - 0.3) < 0.02);

  GmmParams deterministic = truth;
  deterministic.weights << 1.0, 0.0;
  const LabeledSample all_first = synthetic_gmm_data(deterministic, 300, 23);
  for (int label : all_first.labels) CHECK(label == 0);

  GmmParams standard;
  standard.weights = Eigen::VectorXd::Constant(1, 1.0);
  standard.means = {Eigen::VectorXd::Zero(2)};
  standard.covariances = {Eigen::MatrixXd::Identity(2, 2)};
  const LabeledSample normal_sample = synthetic_gmm_data(standard, 10000, 29);
  CHECK(normal_sample.points.colwise().mean().cwiseAbs().maxCoeff() < 0.05);
  const Eigen::MatrixXd cov = normal_sample.points.transpose() * normal_sample.points /
                              static_cast<double>(normal_sample.points.rows());
  CHECK((cov - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 0.06);
}

TEST_CASE("contiguous block assignment covers the data with balanced sizes") {
  std::mt19937_64 rng(31);
  const Eigen::MatrixXd pts = test::random_points(195, 2, rng);
  const auto blocks = assign_contiguous_blocks(pts, 80);
  REQUIRE(blocks.size() == 80);
  Eigen::Index total = 0;
  int threes = 0;
  for (const auto& b : blocks) {
    CHECK((b.rows() == 2 || b.rows() == 3));
    threes += b.rows() == 3 ? 1 : 0;
    total += b.rows();
  }
  CHECK(total == 195);
  CHECK(threes == 35);
  // Concatenation reproduces the original order.
  CHECK((blocks.front().row(0) - pts.row(0)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((blocks.back().bottomRows(1) - pts.bottomRows(1)).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(assign_contiguous_blocks(pts, 200), InvalidArgument);
}
