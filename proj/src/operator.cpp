#include "ergolab/operator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace ergolab {

namespace {

bool all_finite(const Eigen::MatrixXcd& m) {
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) {
      if (!std::isfinite(m(i, j).real()) || !std::isfinite(m(i, j).imag())) return false;
    }
  }
  return true;
}

void require_dim(Index dim, const char* what) {
  if (dim < 1) throw InvalidArgument(std::string(what) + ": dimension must be positive");
  if (dim > kMaxDimension) {
    throw InvalidArgument(std::string(what) + ": dimension " + std::to_string(dim) +
                          " exceeds limit " + std::to_string(kMaxDimension));
  }
}

Eigen::MatrixXcd volterra(Index nodes) {
  require_dim(nodes, "volterra");
  const double h = 1.0 / static_cast<double>(nodes);
  Eigen::MatrixXcd v = Eigen::MatrixXcd::Zero(nodes, nodes);
  for (Index i = 0; i < nodes; ++i) {
    for (Index j = 0; j < i; ++j) v(i, j) = h;
    v(i, i) = 0.5 * h;
  }
  return v;
}

struct Builder {
  Eigen::MatrixXcd operator()(const spec::Dense& s) const {
    if (s.entries.rows() != s.entries.cols()) throw InvalidArgument("dense: matrix is not square");
    require_dim(s.entries.rows(), "dense");
    return s.entries;
  }

  Eigen::MatrixXcd operator()(const spec::DiagonalUnitary& s) const {
    const auto dim = static_cast<Index>(s.angles.size());
    require_dim(dim, "diagonal_unitary");
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
    for (Index k = 0; k < dim; ++k) {
      const double theta = s.angles[static_cast<std::size_t>(k)];
      if (!std::isfinite(theta)) throw InvalidArgument("diagonal_unitary: non-finite angle");
      m(k, k) = std::polar(1.0, theta);
      if (std::abs(std::abs(m(k, k)) - 1.0) > 1e-12) {
        throw InvalidArgument("diagonal_unitary: entry off the unit circle");
      }
    }
    return m;
  }

  Eigen::MatrixXcd operator()(const spec::CyclicShift& s) const {
    require_dim(s.dim, "cyclic_shift");
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(s.dim, s.dim);
    for (Index k = 0; k < s.dim; ++k) m((k + 1) % s.dim, k) = 1.0;
    return m;
  }

  Eigen::MatrixXcd operator()(const spec::Permutation& s) const {
    const auto dim = static_cast<Index>(s.sigma.size());
    require_dim(dim, "permutation");
    std::vector<bool> seen(s.sigma.size(), false);
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
    for (Index k = 0; k < dim; ++k) {
      const Index target = s.sigma[static_cast<std::size_t>(k)];
      if (target < 0 || target >= dim || seen[static_cast<std::size_t>(target)]) {
        throw InvalidArgument("permutation: sigma is not a permutation of 0..n-1");
      }
      seen[static_cast<std::size_t>(target)] = true;
      m(target, k) = 1.0;
    }
    return m;
  }

  Eigen::MatrixXcd operator()(const spec::JordanBlock& s) const {
    require_dim(s.size, "jordan");
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(s.size, s.size);
    for (Index k = 0; k < s.size; ++k) {
      m(k, k) = s.lambda;
      if (k + 1 < s.size) m(k, k + 1) = 1.0;
    }
    return m;
  }

  Eigen::MatrixXcd operator()(const spec::BlockDiag& s) const {
    if (s.blocks.empty()) throw InvalidArgument("block_diag: no blocks");
    std::vector<Eigen::MatrixXcd> parts;
    parts.reserve(s.blocks.size());
    Index dim = 0;
    for (const auto& block : s.blocks) {
      parts.push_back(build(block).matrix());
      dim += parts.back().rows();
      require_dim(dim, "block_diag");
    }
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
    Index offset = 0;
    for (const auto& p : parts) {
      m.block(offset, offset, p.rows(), p.cols()) = p;
      offset += p.rows();
    }
    return m;
  }

  Eigen::MatrixXcd operator()(const spec::VolterraDiscretization& s) const {
    return volterra(s.nodes);
  }

  Eigen::MatrixXcd operator()(const spec::IMinusVolterra& s) const {
    Eigen::MatrixXcd v = volterra(s.nodes);
    return Eigen::MatrixXcd::Identity(s.nodes, s.nodes) - v;
  }

  Eigen::MatrixXcd operator()(const spec::WeightedShift& s) const {
    const auto dim = static_cast<Index>(s.weights.size()) + 1;
    require_dim(dim, "weighted_shift");
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
    for (Index k = 0; k + 1 < dim; ++k) m(k + 1, k) = s.weights[static_cast<std::size_t>(k)];
    return m;
  }

  Eigen::MatrixXcd operator()(const spec::Stochastic& s) const {
    const Index dim = s.transition.rows();
    if (dim != s.transition.cols()) throw InvalidArgument("stochastic: matrix is not square");
    require_dim(dim, "stochastic");
    for (Index i = 0; i < dim; ++i) {
      double row = 0.0;
      for (Index j = 0; j < dim; ++j) {
        const double p = s.transition(i, j);
        if (!(p >= 0.0)) {
          throw InvalidArgument("stochastic: negative or non-finite entry in row " +
                                std::to_string(i));
        }
        row += p;
      }
      if (std::abs(row - 1.0) > 1e-12) {
        throw InvalidArgument("stochastic: row " + std::to_string(i) + " sums to " +
                              std::to_string(row));
      }
    }
    return s.transition.cast<Complex>();
  }

  Eigen::MatrixXcd operator()(const spec::Scaled& s) const {
    if (!s.inner) throw InvalidArgument("scaled: missing inner operator");
    if (std::abs(std::abs(s.lambda) - 1.0) > 1e-12) {
      throw InvalidArgument("scaled: |lambda| must be 1");
    }
    return scale(s.lambda, build(*s.inner)).matrix();
  }
};

}  // namespace

ComplexMatrix::ComplexMatrix(Eigen::MatrixXcd entries) : entries_(std::move(entries)) {
  if (entries_.rows() == 0 || entries_.rows() != entries_.cols()) {
    throw InvalidArgument("ComplexMatrix: matrix must be square and non-empty");
  }
  if (!all_finite(entries_)) throw InvalidArgument("ComplexMatrix: non-finite entry");
}

ComplexMatrix ComplexMatrix::identity(Index dim) {
  return ComplexMatrix(Eigen::MatrixXcd::Identity(dim, dim));
}

ComplexMatrix ComplexMatrix::zero(Index dim) {
  return ComplexMatrix(Eigen::MatrixXcd::Zero(dim, dim));
}

bool ComplexMatrix::approx_equal(const ComplexMatrix& other, double tol) const {
  if (dim() != other.dim()) return false;
  return (entries_ - other.entries_).cwiseAbs().maxCoeff() <= tol;
}

ComplexMatrix ComplexMatrix::operator*(const ComplexMatrix& rhs) const {
  if (dim() != rhs.dim()) throw InvalidArgument("matrix product: dimension mismatch");
  Eigen::MatrixXcd product = entries_ * rhs.entries_;
  if (!all_finite(product)) throw ArithmeticOverflow("matrix product overflowed");
  return ComplexMatrix(std::move(product));
}

ComplexMatrix ComplexMatrix::operator+(const ComplexMatrix& rhs) const {
  if (dim() != rhs.dim()) throw InvalidArgument("matrix sum: dimension mismatch");
  return ComplexMatrix(entries_ + rhs.entries_);
}

ComplexMatrix ComplexMatrix::operator-(const ComplexMatrix& rhs) const {
  if (dim() != rhs.dim()) throw InvalidArgument("matrix difference: dimension mismatch");
  return ComplexMatrix(entries_ - rhs.entries_);
}

ComplexMatrix operator*(Complex s, const ComplexMatrix& m) { return scale(s, m); }

VectorC::VectorC(Eigen::VectorXcd entries) : entries_(std::move(entries)) {
  if (entries_.size() == 0) throw InvalidArgument("VectorC: empty vector");
  if (!all_finite(entries_)) throw InvalidArgument("VectorC: non-finite entry");
}

VectorC VectorC::basis(Index dim, Index k) {
  if (k < 0 || k >= dim) throw InvalidArgument("VectorC::basis: index out of range");
  return VectorC(Eigen::VectorXcd::Unit(dim, k));
}

VectorC VectorC::zero(Index dim) { return VectorC(Eigen::VectorXcd::Zero(dim)); }

VectorC apply(const ComplexMatrix& op, const VectorC& x) {
  if (op.dim() != x.dim()) throw InvalidArgument("apply: dimension mismatch");
  return VectorC(op.matrix() * x.vector());
}

OperatorSpec OperatorSpec::scaled(Complex lambda, OperatorSpec inner) {
  return OperatorSpec{spec::Scaled{lambda, std::make_shared<const OperatorSpec>(std::move(inner))}};
}

Index spec_dimension(const OperatorSpec& s) { return build(s).dim(); }

ComplexMatrix build(const OperatorSpec& s) { return ComplexMatrix(std::visit(Builder{}, s.kind)); }

ComplexMatrix scale(Complex lambda, const ComplexMatrix& op) {
  Eigen::MatrixXcd m = op.matrix();
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) m(i, j) = lambda * m(i, j);
  }
  return ComplexMatrix(std::move(m));
}

double operator_norm(const ComplexMatrix& m) { return operator_norm(m.matrix()); }

double operator_norm(const Eigen::MatrixXcd& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1 && m.cols() == 1) return std::abs(m(0, 0));
  const double scale_factor = m.cwiseAbs().maxCoeff();
  if (scale_factor == 0.0) return 0.0;
  // Rescale so that M^*M neither underflows nor overflows.
  const Eigen::MatrixXcd a = m / scale_factor;
  const Eigen::MatrixXcd gram = a.adjoint() * a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(gram, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a);
    return scale_factor * svd.singularValues()(0);
  }
  const double top = std::max(0.0, solver.eigenvalues().maxCoeff());
  return scale_factor * std::sqrt(top);
}

double frobenius_norm(const Eigen::MatrixXcd& m) { return m.norm(); }

double matrix_norm(const Eigen::MatrixXcd& m, NormKind kind) {
  return kind == NormKind::Spectral ? operator_norm(m) : frobenius_norm(m);
}

double GeometricFit::bound(Index n) const {
  return constant * std::pow(rate, static_cast<double>(n));
}

namespace {

void flush_entries(Complex* data, Index size) {
  for (Index k = 0; k < size; ++k) {
    double re = data[k].real(), im = data[k].imag();
    if (std::abs(re) < kUnderflowFlush) re = 0.0;
    if (std::abs(im) < kUnderflowFlush) im = 0.0;
    data[k] = Complex(re, im);
  }
}

}  // namespace

void flush_underflow(Eigen::MatrixXcd& m) { flush_entries(m.data(), m.size()); }
void flush_underflow(Eigen::VectorXcd& v) { flush_entries(v.data(), v.size()); }

PowerTrace power_trace(const ComplexMatrix& op, Index n_max, NormKind kind) {
  if (n_max < 1) throw InvalidArgument("power_trace: n_max must be >= 1");
  PowerTrace trace;
  trace.norms.reserve(static_cast<std::size_t>(n_max));
  Eigen::MatrixXcd power = op.matrix();
  Eigen::MatrixXcd next(op.dim(), op.dim());
  for (Index n = 1; n <= n_max; ++n) {
    if (n > 1) {
      next.noalias() = power * op.matrix();
      power.swap(next);
    }
    const double norm = matrix_norm(power, kind);
    if (!std::isfinite(norm) || norm > kNormOverflow) {
      trace.truncated = true;
      break;
    }
    trace.norms.push_back(norm);
  }
  return trace;
}

std::optional<GeometricFit> fit_geometric_decay(const PowerTrace& trace) {
  const auto& norms = trace.norms;
  const auto count = static_cast<Index>(norms.size());
  if (count == 0) throw InvalidArgument("fit_geometric_decay: empty trace");
  if (count < 2) return std::nullopt;

  const Index quarter_start = count - std::max<Index>(1, count / 4);
  const double quarter_max =
      *std::max_element(norms.begin() + quarter_start, norms.end());
  if (quarter_max == 0.0) {
    // Nilpotent: every rate works once the powers vanish; report r = 1/2.
    GeometricFit fit{0.0, 0.5};
    for (Index idx = 0; idx < count; ++idx) {
      fit.constant = std::max(fit.constant, norms[static_cast<std::size_t>(idx)] /
                                                std::pow(0.5, static_cast<double>(idx + 1)));
    }
    fit.constant = std::max(fit.constant, std::numeric_limits<double>::min());
    return fit;
  }
  if (norms.back() >= 0.99 * quarter_max) return std::nullopt;

  auto log_norm = [&](Index idx) {
    return std::log(std::max(norms[static_cast<std::size_t>(idx)], 1e-300));
  };

  // Least squares of log||T^n|| on n over the second half.
  const Index first = count / 2;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const auto m = static_cast<double>(count - first);
  for (Index idx = first; idx < count; ++idx) {
    const auto n = static_cast<double>(idx + 1);
    const double y = log_norm(idx);
    sx += n;
    sy += y;
    sxx += n * n;
    sxy += n * y;
  }
  const double denom = m * sxx - sx * sx;
  if (denom <= 0.0) return std::nullopt;
  const double slope = (m * sxy - sx * sy) / denom;
  const double intercept = (sy - slope * sx) / m;
  if (!(slope < 0.0)) return std::nullopt;

  GeometricFit fit;
  fit.rate = std::exp(slope);
  double log_c = intercept;
  for (Index idx = 0; idx < count; ++idx) {
    log_c = std::max(log_c, log_norm(idx) - static_cast<double>(idx + 1) * slope);
  }
  fit.constant = std::exp(log_c);
  // Rounding in pow/exp can leave the bound a few ulps short.
  for (int guard = 0; guard < 64; ++guard) {
    bool covered = true;
    for (Index idx = 0; idx < count; ++idx) {
      if (norms[static_cast<std::size_t>(idx)] > fit.bound(idx + 1)) {
        covered = false;
        break;
      }
    }
    if (covered) break;
    fit.constant *= 1.0 + 1e-14;
  }
  return fit;
}

}  // namespace ergolab
