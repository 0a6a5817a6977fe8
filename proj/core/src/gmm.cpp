#include "ppdem/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <json.hpp>

#include "ppdem/errors.hpp"
#include "ppdem/numeric.hpp"
#include "ppdem/rng.hpp"

namespace ppdem {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Eigen::LLT<Eigen::MatrixXd> factorize(const Eigen::MatrixXd& covariance) {
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("covariance is not positive definite");
  }
  return llt;
}

double log_pdf_with_llt(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                        const Eigen::LLT<Eigen::MatrixXd>& llt) {
  const Eigen::MatrixXd& l = llt.matrixL();
  Eigen::VectorXd z = llt.matrixL().solve(x - mean);
  double log_det_half = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) log_det_half += std::log(l(i, i));
  return -0.5 * static_cast<double>(x.size()) * kLog2Pi - log_det_half - 0.5 * z.squaredNorm();
}

}  // namespace

void GmmParams::validate() const {
  const int c = components();
  if (c < 1) throw InvalidArgument("mixture needs at least one component");
  if (static_cast<int>(means.size()) != c || static_cast<int>(covariances.size()) != c) {
    throw InvalidArgument("component count mismatch between weights, means and covariances");
  }
  const int d = dim();
  double weight_sum = 0.0;
  for (int j = 0; j < c; ++j) {
    if (weights[j] < 0.0) throw InvalidArgument("negative mixture weight");
    weight_sum += weights[j];
    if (means[j].size() != d) throw InvalidArgument("mean dimension mismatch");
    if (covariances[j].rows() != d || covariances[j].cols() != d) {
      throw InvalidArgument("covariance dimension mismatch");
    }
    const double asym = (covariances[j] - covariances[j].transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12) throw InvalidArgument("covariance is not symmetric");
    factorize(covariances[j]);
  }
  if (std::abs(weight_sum - 1.0) > 1e-12) {
    throw InvalidArgument("mixture weights do not sum to 1");
  }
}

std::string GmmParams::to_json() const {
  nlohmann::json j;
  j["c"] = components();
  j["d"] = dim();
  j["beta"] = std::vector<double>(weights.data(), weights.data() + weights.size());
  nlohmann::json mu = nlohmann::json::array();
  nlohmann::json sigma = nlohmann::json::array();
  for (int k = 0; k < components(); ++k) {
    mu.push_back(std::vector<double>(means[k].data(), means[k].data() + means[k].size()));
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < covariances[k].rows(); ++r) {
      std::vector<double> row(covariances[k].cols());
      for (Eigen::Index col = 0; col < covariances[k].cols(); ++col) row[col] = covariances[k](r, col);
      rows.push_back(row);
    }
    sigma.push_back(rows);
  }
  j["mu"] = mu;
  j["sigma"] = sigma;
  return j.dump();
}

GmmParams GmmParams::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  const int c = j.at("c").get<int>();
  const int d = j.at("d").get<int>();
  GmmParams p;
  const auto beta = j.at("beta").get<std::vector<double>>();
  if (static_cast<int>(beta.size()) != c) throw InvalidArgument("beta length mismatch");
  p.weights = Eigen::Map<const Eigen::VectorXd>(beta.data(), c);
  for (int k = 0; k < c; ++k) {
    const auto mu = j.at("mu").at(k).get<std::vector<double>>();
    if (static_cast<int>(mu.size()) != d) throw InvalidArgument("mu length mismatch");
    p.means.push_back(Eigen::Map<const Eigen::VectorXd>(mu.data(), d));
    Eigen::MatrixXd cov(d, d);
    for (int r = 0; r < d; ++r) {
      const auto row = j.at("sigma").at(k).at(r).get<std::vector<double>>();
      if (static_cast<int>(row.size()) != d) throw InvalidArgument("sigma row length mismatch");
      for (int col = 0; col < d; ++col) cov(r, col) = row[col];
    }
    p.covariances.push_back(std::move(cov));
  }
  return p;
}

LocalUpdates LocalUpdates::zero(int c, int d) {
  LocalUpdates u;
  u.mass = Eigen::VectorXd::Zero(c);
  u.weighted_sum.assign(c, Eigen::VectorXd::Zero(d));
  u.scatter.assign(c, Eigen::MatrixXd::Zero(d, d));
  u.points = 0;
  return u;
}

double log_gaussian_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                        const Eigen::MatrixXd& covariance) {
  return log_pdf_with_llt(x, mean, factorize(covariance));
}

double gaussian_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                    const Eigen::MatrixXd& covariance) {
  return std::exp(log_gaussian_pdf(x, mean, covariance));
}

Responsibilities e_step(const Eigen::MatrixXd& points, const GmmParams& params) {
  const int c = params.components();
  const Eigen::Index n = points.rows();
  std::vector<Eigen::LLT<Eigen::MatrixXd>> llts;
  llts.reserve(c);
  Eigen::VectorXd log_weights(c);
  for (int j = 0; j < c; ++j) {
    llts.push_back(factorize(params.covariances[j]));
    log_weights[j] = std::log(params.weights[j]);
  }
  Responsibilities resp(n, c);
  Eigen::VectorXd lw(c);
  for (Eigen::Index p = 0; p < n; ++p) {
    const Eigen::VectorXd x = points.row(p).transpose();
    for (int j = 0; j < c; ++j) {
      lw[j] = log_weights[j] + log_pdf_with_llt(x, params.means[j], llts[j]);
    }
    const double m = lw.maxCoeff();
    if (!(m > -std::numeric_limits<double>::infinity())) {
      throw DegenerateDenominator("responsibility denominator vanished for point " +
                                  std::to_string(p));
    }
    double sum = 0.0;
    for (int j = 0; j < c; ++j) sum += std::exp(lw[j] - m);
    const double log_denom = m + std::log(sum);
    for (int j = 0; j < c; ++j) resp(p, j) = std::exp(lw[j] - log_denom);
  }
  return resp;
}

LocalUpdates local_updates(const Eigen::MatrixXd& local_points,
                           const Eigen::MatrixXd& resp_rows,
                           const std::vector<Eigen::VectorXd>& means) {
  const int c = static_cast<int>(means.size());
  const int d = static_cast<int>(local_points.cols());
  if (resp_rows.rows() != local_points.rows() || resp_rows.cols() != c) {
    throw InvalidArgument("responsibility rows do not align with local points");
  }
  LocalUpdates u = LocalUpdates::zero(c, d);
  u.points = local_points.rows();
  Eigen::VectorXd mass_comp = Eigen::VectorXd::Zero(c);
  std::vector<Eigen::VectorXd> sum_comp(c, Eigen::VectorXd::Zero(d));
  std::vector<Eigen::MatrixXd> scatter_comp(c, Eigen::MatrixXd::Zero(d, d));
  for (Eigen::Index p = 0; p < local_points.rows(); ++p) {
    const Eigen::VectorXd x = local_points.row(p).transpose();
    for (int j = 0; j < c; ++j) {
      const double r = resp_rows(p, j);
      neumaier_add(u.mass[j], mass_comp[j], r);
      const Eigen::VectorXd delta = x - means[j];
      for (int a = 0; a < d; ++a) {
        neumaier_add(u.weighted_sum[j][a], sum_comp[j][a], r * x[a]);
        for (int b = a; b < d; ++b) {
          neumaier_add(u.scatter[j](a, b), scatter_comp[j](a, b), r * (delta[a] * delta[b]));
        }
      }
    }
  }
  for (int j = 0; j < c; ++j) {
    u.mass[j] += mass_comp[j];
    u.weighted_sum[j] += sum_comp[j];
    for (int a = 0; a < d; ++a) {
      for (int b = a; b < d; ++b) {
        u.scatter[j](a, b) += scatter_comp[j](a, b);
        u.scatter[j](b, a) = u.scatter[j](a, b);
      }
    }
  }
  return u;
}

GlobalSums sum_local_updates(const std::vector<LocalUpdates>& updates) {
  if (updates.empty()) throw InvalidArgument("no local updates to aggregate");
  const int c = static_cast<int>(updates.front().mass.size());
  const int d = static_cast<int>(updates.front().weighted_sum.front().size());
  GlobalSums sums;
  sums.mass = Eigen::VectorXd::Zero(c);
  sums.weighted_sum.assign(c, Eigen::VectorXd::Zero(d));
  sums.scatter.assign(c, Eigen::MatrixXd::Zero(d, d));
  Eigen::VectorXd mass_comp = Eigen::VectorXd::Zero(c);
  std::vector<Eigen::VectorXd> sum_comp(c, Eigen::VectorXd::Zero(d));
  std::vector<Eigen::MatrixXd> scatter_comp(c, Eigen::MatrixXd::Zero(d, d));
  for (const LocalUpdates& u : updates) {
    sums.total_points += u.points;
    for (int j = 0; j < c; ++j) {
      neumaier_add(sums.mass[j], mass_comp[j], u.mass[j]);
      for (int a = 0; a < d; ++a) {
        neumaier_add(sums.weighted_sum[j][a], sum_comp[j][a], u.weighted_sum[j][a]);
        for (int b = a; b < d; ++b) {
          neumaier_add(sums.scatter[j](a, b), scatter_comp[j](a, b), u.scatter[j](a, b));
        }
      }
    }
  }
  for (int j = 0; j < c; ++j) {
    sums.mass[j] += mass_comp[j];
    sums.weighted_sum[j] += sum_comp[j];
    for (int a = 0; a < d; ++a) {
      for (int b = a; b < d; ++b) {
        sums.scatter[j](a, b) += scatter_comp[j](a, b);
        sums.scatter[j](b, a) = sums.scatter[j](a, b);
      }
    }
  }
  return sums;
}

GmmParams global_update(const GlobalSums& sums, double cov_reg, double component_death_rel) {
  const int c = static_cast<int>(sums.mass.size());
  const int d = static_cast<int>(sums.weighted_sum.front().size());
  if (sums.total_points < 1) throw InvalidArgument("global update needs at least one point");
  const double death = component_death_rel * static_cast<double>(sums.total_points);
  GmmParams p;
  p.weights = Eigen::VectorXd(c);
  for (int j = 0; j < c; ++j) {
    if (sums.mass[j] <= death) throw EmptyComponent(j, sums.mass[j]);
    p.weights[j] = sums.mass[j] / static_cast<double>(sums.total_points);
    p.means.push_back(sums.weighted_sum[j] / sums.mass[j]);
    Eigen::MatrixXd cov = sums.scatter[j] / sums.mass[j];
    cov.diagonal().array() += cov_reg;
    p.covariances.push_back(std::move(cov));
  }
  return p;
}

double log_likelihood(const Eigen::MatrixXd& points, const GmmParams& params) {
  const int c = params.components();
  std::vector<Eigen::LLT<Eigen::MatrixXd>> llts;
  llts.reserve(c);
  Eigen::VectorXd log_weights(c);
  for (int j = 0; j < c; ++j) {
    llts.push_back(factorize(params.covariances[j]));
    log_weights[j] = std::log(params.weights[j]);
  }
  NeumaierSum total;
  Eigen::VectorXd lw(c);
  for (Eigen::Index p = 0; p < points.rows(); ++p) {
    const Eigen::VectorXd x = points.row(p).transpose();
    for (int j = 0; j < c; ++j) {
      lw[j] = log_weights[j] + log_pdf_with_llt(x, params.means[j], llts[j]);
    }
    const double m = lw.maxCoeff();
    double sum = 0.0;
    for (int j = 0; j < c; ++j) sum += std::exp(lw[j] - m);
    total.add(m + std::log(sum));
  }
  return total.value();
}

double mean_feature_variance(const Eigen::MatrixXd& points) {
  if (points.rows() < 2) return 1.0;
  const Eigen::RowVectorXd mean = points.colwise().mean();
  const Eigen::MatrixXd centered = points.rowwise() - mean;
  const double denom = static_cast<double>(points.rows() - 1) * points.cols();
  return centered.squaredNorm() / denom;
}

double resolve_cov_reg(const Eigen::MatrixXd& points, const EmOptions& opts) {
  if (opts.cov_reg >= 0.0) return opts.cov_reg;
  const double scale = mean_feature_variance(points);
  return opts.cov_reg_scale * (scale > 0.0 ? scale : 1.0);
}

EmTrace centralized_em(const Eigen::MatrixXd& points, int c, int iters,
                       const GmmParams& init, const EmOptions& opts) {
  if (c < 1) throw InvalidArgument("component count must be positive");
  if (points.rows() < c) throw InvalidArgument("need at least c points");
  const double cov_reg = resolve_cov_reg(points, opts);
  EmTrace trace;
  trace.params.push_back(init);
  trace.loglik.push_back(log_likelihood(points, init));
  for (int t = 0; t < iters; ++t) {
    const GmmParams& current = trace.params.back();
    const Responsibilities resp = e_step(points, current);
    const LocalUpdates pooled = local_updates(points, resp, current.means);
    GlobalSums sums = sum_local_updates({pooled});
    GmmParams next = global_update(sums, cov_reg, opts.component_death_rel);
    trace.loglik.push_back(log_likelihood(points, next));
    trace.params.push_back(std::move(next));
  }
  return trace;
}

GmmParams init_params(const Eigen::MatrixXd& points, int c, std::uint64_t seed) {
  const Eigen::Index n = points.rows();
  const int d = static_cast<int>(points.cols());
  if (n < c) throw InvalidArgument("need at least c points to initialize");
  std::mt19937_64 rng(SeedStreams(seed).derive("gmm-init"));
  std::vector<Eigen::Index> indices(n);
  for (Eigen::Index i = 0; i < n; ++i) indices[i] = i;
  // Partial Fisher-Yates: the first c slots become the sampled means.
  for (int j = 0; j < c; ++j) {
    std::uniform_int_distribution<Eigen::Index> pick(j, n - 1);
    std::swap(indices[j], indices[pick(rng)]);
  }
  const Eigen::RowVectorXd mean = points.colwise().mean();
  const Eigen::MatrixXd centered = points.rowwise() - mean;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(d, d);
  if (n > 1) cov = centered.transpose() * centered / static_cast<double>(n - 1);
  const double reg = 1e-6 * (mean_feature_variance(points) > 0 ? mean_feature_variance(points) : 1.0);
  cov.diagonal().array() += reg;
  GmmParams p;
  p.weights = Eigen::VectorXd::Constant(c, 1.0 / c);
  for (int j = 0; j < c; ++j) {
    p.means.push_back(points.row(indices[j]).transpose());
    p.covariances.push_back(cov);
  }
  return p;
}

int stacked_update_dim(int c, int d) {
  return c * (1 + d + static_cast<int>(packed_upper_size(d)));
}

Eigen::VectorXd stack_updates(const LocalUpdates& u) {
  const int c = static_cast<int>(u.mass.size());
  const int d = static_cast<int>(u.weighted_sum.front().size());
  Eigen::VectorXd out(stacked_update_dim(c, d));
  Eigen::Index k = 0;
  for (int j = 0; j < c; ++j) {
    out[k++] = u.mass[j];
    out.segment(k, d) = u.weighted_sum[j];
    k += d;
    out.segment(k, packed_upper_size(d)) = pack_upper(u.scatter[j]);
    k += packed_upper_size(d);
  }
  return out;
}

LocalUpdates unstack_updates(const Eigen::VectorXd& v, int c, int d, long points) {
  if (v.size() != stacked_update_dim(c, d)) throw InvalidArgument("bad stacked update size");
  LocalUpdates u = LocalUpdates::zero(c, d);
  u.points = points;
  Eigen::Index k = 0;
  for (int j = 0; j < c; ++j) {
    u.mass[j] = v[k++];
    u.weighted_sum[j] = v.segment(k, d);
    k += d;
    u.scatter[j] = unpack_upper(v.segment(k, packed_upper_size(d)), d);
    k += packed_upper_size(d);
  }
  return u;
}

Eigen::VectorXd stack_params(const GmmParams& p) {
  const int c = p.components();
  const int d = p.dim();
  Eigen::VectorXd out(stacked_update_dim(c, d));
  Eigen::Index k = 0;
  for (int j = 0; j < c; ++j) {
    out[k++] = p.weights[j];
    out.segment(k, d) = p.means[j];
    k += d;
    out.segment(k, packed_upper_size(d)) = pack_upper(p.covariances[j]);
    k += packed_upper_size(d);
  }
  return out;
}

GmmParams unstack_params(const Eigen::VectorXd& v, int c, int d) {
  if (v.size() != stacked_update_dim(c, d)) throw InvalidArgument("bad stacked params size");
  GmmParams p;
  p.weights = Eigen::VectorXd(c);
  Eigen::Index k = 0;
  for (int j = 0; j < c; ++j) {
    p.weights[j] = v[k++];
    p.means.push_back(v.segment(k, d));
    k += d;
    p.covariances.push_back(unpack_upper(v.segment(k, packed_upper_size(d)), d));
    k += packed_upper_size(d);
  }
  return p;
}

}  // namespace ppdem
