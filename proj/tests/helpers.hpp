#pragma once

#include <initializer_list>

#include "ergolab/operator.hpp"

namespace ergolab::testing {

inline ComplexMatrix diag(std::initializer_list<Complex> entries) {
  Eigen::VectorXcd d(static_cast<Index>(entries.size()));
  Index k = 0;
  for (Complex z : entries) d(k++) = z;
  return ComplexMatrix(Eigen::MatrixXcd(d.asDiagonal()));
}

inline ComplexMatrix dense(std::initializer_list<std::initializer_list<Complex>> rows) {
  const auto n = static_cast<Index>(rows.size());
  Eigen::MatrixXcd m(n, n);
  Index i = 0;
  for (const auto& row : rows) {
    Index j = 0;
    for (Complex z : row) m(i, j++) = z;
    ++i;
  }
  return ComplexMatrix(std::move(m));
}

inline VectorC vec(std::initializer_list<Complex> entries) {
  Eigen::VectorXcd v(static_cast<Index>(entries.size()));
  Index k = 0;
  for (Complex z : entries) v(k++) = z;
  return VectorC(std::move(v));
}

inline double distance(const ComplexMatrix& a, const ComplexMatrix& b) {
  return operator_norm(Eigen::MatrixXcd(a.matrix() - b.matrix()));
}

inline double distance(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  return operator_norm(Eigen::MatrixXcd(a - b));
}

}  // namespace ergolab::testing
