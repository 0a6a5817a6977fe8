#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace ppdem {

// Neumaier compensated accumulation. value() represents the exact sum of the
// inputs to O(eps^2), which keeps aggregation results identical (to the last
// bit, in practice) regardless of how the terms are grouped across nodes, and
// lets large summation masks cancel without eating the payload's low bits.
inline void neumaier_add(double& sum, double& comp, double v) {
  const double t = sum + v;
  if (std::abs(sum) >= std::abs(v)) {
    comp += (sum - t) + v;
  } else {
    comp += (v - t) + sum;
  }
  sum = t;
}

class NeumaierSum {
 public:
  void add(double v) { neumaier_add(sum_, comp_, v); }
  double sum_part() const { return sum_; }
  double comp_part() const { return comp_; }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// Element-wise compensated accumulator over fixed-size vectors.
class NeumaierVec {
 public:
  explicit NeumaierVec(Eigen::Index size)
      : sum_(Eigen::VectorXd::Zero(size)), comp_(Eigen::VectorXd::Zero(size)) {}

  void add(const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < sum_.size(); ++i) {
      neumaier_add(sum_[i], comp_[i], v[i]);
    }
  }
  void add_scaled(double scale, const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < sum_.size(); ++i) {
      neumaier_add(sum_[i], comp_[i], scale * v[i]);
    }
  }
  const Eigen::VectorXd& sum_part() const { return sum_; }
  const Eigen::VectorXd& comp_part() const { return comp_; }
  Eigen::VectorXd value() const { return sum_ + comp_; }
  Eigen::Index size() const { return sum_.size(); }

 private:
  Eigen::VectorXd sum_;
  Eigen::VectorXd comp_;
};

// Packed upper triangle (row-major) of a symmetric matrix. Symmetric payloads
// travel in packed form so per-entry transport noise cannot break symmetry.
inline Eigen::Index packed_upper_size(Eigen::Index d) { return d * (d + 1) / 2; }

inline Eigen::VectorXd pack_upper(const Eigen::MatrixXd& m) {
  const Eigen::Index d = m.rows();
  Eigen::VectorXd out(packed_upper_size(d));
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i; j < d; ++j) {
      out[k++] = m(i, j);
    }
  }
  return out;
}

inline Eigen::MatrixXd unpack_upper(const Eigen::VectorXd& v, Eigen::Index d) {
  Eigen::MatrixXd out(d, d);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i; j < d; ++j) {
      out(i, j) = v[k];
      out(j, i) = v[k];
      ++k;
    }
  }
  return out;
}

double digamma(double x);

}  // namespace ppdem
