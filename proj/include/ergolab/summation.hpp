#pragma once

// Compensated (Neumaier) accumulation for long series with small terms.

#include <cmath>
#include <complex>

#include <Eigen/Dense>

namespace ergolab {

/// Neumaier's variant of Kahan summation; exact error-free transformation per add.
class CompensatedSum {
 public:
  CompensatedSum& operator+=(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
    return *this;
  }

  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Componentwise compensated sum of complex vectors.
class CompensatedVector {
 public:
  explicit CompensatedVector(Eigen::Index dim)
      : sum_(Eigen::VectorXcd::Zero(dim)),
        comp_re_(Eigen::VectorXd::Zero(dim)),
        comp_im_(Eigen::VectorXd::Zero(dim)) {}

  void add(const Eigen::VectorXcd& x) {
    for (Eigen::Index k = 0; k < sum_.size(); ++k) {
      sum_(k) = {step(sum_(k).real(), x(k).real(), comp_re_(k)),
                 step(sum_(k).imag(), x(k).imag(), comp_im_(k))};
    }
  }

  Eigen::VectorXcd value() const {
    Eigen::VectorXcd v = sum_;
    for (Eigen::Index k = 0; k < v.size(); ++k) v(k) += std::complex<double>(comp_re_(k), comp_im_(k));
    return v;
  }

 private:
  static double step(double s, double x, double& c) {
    const double t = s + x;
    if (std::abs(s) >= std::abs(x)) {
      c += (s - t) + x;
    } else {
      c += (x - t) + s;
    }
    return t;
  }

  Eigen::VectorXcd sum_;
  Eigen::VectorXd comp_re_;
  Eigen::VectorXd comp_im_;
};

}  // namespace ergolab
