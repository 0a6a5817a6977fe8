#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace ppdem {

// Mixture parameters: weights, means and covariances of c Gaussian
// components over d-dimensional data.
struct GmmParams {
  Eigen::VectorXd weights;                   // c, non-negative, sums to 1
  std::vector<Eigen::VectorXd> means;        // c vectors of dimension d
  std::vector<Eigen::MatrixXd> covariances;  // c symmetric positive definite d x d

  int components() const { return static_cast<int>(weights.size()); }
  int dim() const { return means.empty() ? 0 : static_cast<int>(means.front().size()); }

  // Checks the type invariants (weight simplex, symmetry, positive
  // definiteness); throws on violation.
  void validate() const;

  std::string to_json() const;  // {c, d, beta[], mu[][], sigma[][][]}
  static GmmParams from_json(const std::string& text);
};

// Row p holds the posterior component probabilities of point p; each row is
// non-negative and sums to 1.
using Responsibilities = Eigen::MatrixXd;

// One node's intermediate M-step contributions: per component the
// responsibility mass a_j, the responsibility-weighted point sum b_j and the
// weighted scatter around the current mean C_j. These are the only
// quantities a node ever shares.
struct LocalUpdates {
  Eigen::VectorXd mass;                       // c
  std::vector<Eigen::VectorXd> weighted_sum;  // c vectors of dimension d
  std::vector<Eigen::MatrixXd> scatter;       // c matrices d x d
  long points = 0;                            // local point count

  static LocalUpdates zero(int c, int d);
};

// Network-wide aggregates of LocalUpdates plus the total point count.
struct GlobalSums {
  Eigen::VectorXd mass;
  std::vector<Eigen::VectorXd> weighted_sum;
  std::vector<Eigen::MatrixXd> scatter;
  long total_points = 0;
};

// Density of N(mean, covariance) at x, via Cholesky factorization.
// Throws NotPositiveDefinite if the factorization fails.
double gaussian_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                    const Eigen::MatrixXd& covariance);
double log_gaussian_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                        const Eigen::MatrixXd& covariance);

// Posterior responsibilities of every point (rows of `points`), computed in
// the log domain with max subtraction. Throws DegenerateDenominator if a
// row's denominator vanishes even then.
Responsibilities e_step(const Eigen::MatrixXd& points, const GmmParams& params);

// Local M-step contributions of one node's batch. `means` are the component
// means of the same iteration the responsibilities were computed with; the
// scatter term centers on them, not on the refreshed means.
LocalUpdates local_updates(const Eigen::MatrixXd& local_points,
                           const Eigen::MatrixXd& resp_rows,
                           const std::vector<Eigen::VectorXd>& means);

// Compensated aggregation of per-node updates, in node order.
GlobalSums sum_local_updates(const std::vector<LocalUpdates>& updates);

// Global parameter assembly: weights = mass/n, means = weighted_sum/mass,
// covariances = scatter/mass + cov_reg * I. Throws EmptyComponent when a
// component's mass falls below component_death_rel * total_points.
GmmParams global_update(const GlobalSums& sums, double cov_reg,
                        double component_death_rel = 1e-8);

double log_likelihood(const Eigen::MatrixXd& points, const GmmParams& params);

struct EmOptions {
  // Ridge added to every refreshed covariance. Negative means "derive from
  // the data" as cov_reg_scale times the mean feature variance.
  double cov_reg = -1.0;
  double cov_reg_scale = 1e-6;
  double component_death_rel = 1e-8;
};

// Mean of the per-feature sample variances; the data-derived scale behind
// the default covariance ridge.
double mean_feature_variance(const Eigen::MatrixXd& points);
double resolve_cov_reg(const Eigen::MatrixXd& points, const EmOptions& opts);

struct EmTrace {
  std::vector<GmmParams> params;  // length iters + 1, index 0 = init
  std::vector<double> loglik;     // same length, evaluated on the full data
};

// Plain single-site EM; the output-correctness oracle every distributed
// driver is compared against.
EmTrace centralized_em(const Eigen::MatrixXd& points, int c, int iters,
                       const GmmParams& init, const EmOptions& opts = {});

// Uniform weights, means drawn without replacement from the data, shared
// covariance = sample covariance + ridge. Deterministic for a fixed seed.
GmmParams init_params(const Eigen::MatrixXd& points, int c, std::uint64_t seed);

// Stacked wire/consensus layout of LocalUpdates: per component
// [mass | weighted_sum (d) | packed upper scatter (d(d+1)/2)].
int stacked_update_dim(int c, int d);
Eigen::VectorXd stack_updates(const LocalUpdates& u);
LocalUpdates unstack_updates(const Eigen::VectorXd& v, int c, int d, long points);

// Stacked parameter layout: per component [weight | mean | packed upper cov].
Eigen::VectorXd stack_params(const GmmParams& p);
GmmParams unstack_params(const Eigen::VectorXd& v, int c, int d);

}  // namespace ppdem
