#pragma once

// Dense complex operators, the operator catalog, norms and power sequences.

#include <complex>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace ergolab {

using Complex = std::complex<double>;
using Index = Eigen::Index;

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: wrong shape, non-finite entries, violated invariants.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A theorem hypothesis or documented precondition does not hold for the operand.
class PreconditionFailed : public Error {
 public:
  using Error::Error;
};

/// Arithmetic left the finite range.
class ArithmeticOverflow : public Error {
 public:
  using Error::Error;
};

/// Largest dimension the catalog will build.
inline constexpr Index kMaxDimension = 4096;

/// Square complex matrix with finite entries.
///
/// Comparison is always tolerance based; two matrices computed along
/// different paths are never compared bitwise.
class ComplexMatrix {
 public:
  /// Throws InvalidArgument for empty, non-square or non-finite input.
  explicit ComplexMatrix(Eigen::MatrixXcd entries);

  static ComplexMatrix identity(Index dim);
  static ComplexMatrix zero(Index dim);

  Index dim() const { return entries_.rows(); }
  const Eigen::MatrixXcd& matrix() const { return entries_; }
  Complex operator()(Index row, Index col) const { return entries_(row, col); }

  /// Elementwise comparison: max |a_ij - b_ij| <= tol.
  bool approx_equal(const ComplexMatrix& other, double tol) const;

  ComplexMatrix operator*(const ComplexMatrix& rhs) const;
  ComplexMatrix operator+(const ComplexMatrix& rhs) const;
  ComplexMatrix operator-(const ComplexMatrix& rhs) const;
  friend ComplexMatrix operator*(Complex scale, const ComplexMatrix& m);

 private:
  Eigen::MatrixXcd entries_;
};

/// Complex column vector with finite entries.
class VectorC {
 public:
  explicit VectorC(Eigen::VectorXcd entries);

  static VectorC basis(Index dim, Index k);
  static VectorC zero(Index dim);

  Index dim() const { return entries_.size(); }
  const Eigen::VectorXcd& vector() const { return entries_; }
  Complex operator()(Index k) const { return entries_(k); }
  double norm() const { return entries_.norm(); }

 private:
  Eigen::VectorXcd entries_;
};

/// T applied to x. Dimensions must agree.
VectorC apply(const ComplexMatrix& op, const VectorC& x);

// ---------------------------------------------------------------------------
// Operator catalog

struct OperatorSpec;

namespace spec {

struct Dense {
  Eigen::MatrixXcd entries;
};
/// diag(e^{i theta_k}).
struct DiagonalUnitary {
  std::vector<double> angles;
};
/// e_k -> e_{k+1 mod d}.
struct CyclicShift {
  Index dim = 0;
};
/// e_k -> e_{sigma(k)}.
struct Permutation {
  std::vector<Index> sigma;
};
/// lambda I + superdiagonal ones.
struct JordanBlock {
  Complex lambda;
  Index size = 0;
};
struct BlockDiag {
  std::vector<OperatorSpec> blocks;
};
/// Trapezoid discretization of f -> int_0^x f on N nodes.
struct VolterraDiscretization {
  Index nodes = 0;
};
/// I minus the Volterra discretization.
struct IMinusVolterra {
  Index nodes = 0;
};
/// e_k -> w_k e_{k+1}; dimension is weights.size() + 1.
struct WeightedShift {
  std::vector<Complex> weights;
};
/// Row-stochastic matrix acting on functions, (Pf)(i) = sum_j p_ij f(j).
struct Stochastic {
  Eigen::MatrixXd transition;
};
/// lambda times the inner operator, |lambda| = 1.
struct Scaled {
  Complex lambda;
  std::shared_ptr<const OperatorSpec> inner;
};

}  // namespace spec

/// Declarative description of a catalog operator. Immutable once built.
struct OperatorSpec {
  using Kind = std::variant<spec::Dense, spec::DiagonalUnitary, spec::CyclicShift,
                            spec::Permutation, spec::JordanBlock, spec::BlockDiag,
                            spec::VolterraDiscretization, spec::IMinusVolterra,
                            spec::WeightedShift, spec::Stochastic, spec::Scaled>;
  Kind kind;

  /// Convenience for Scaled, which holds its inner spec by shared pointer.
  static OperatorSpec scaled(Complex lambda, OperatorSpec inner);
};

/// Dimension the spec builds to. Throws InvalidArgument on invalid specs.
Index spec_dimension(const OperatorSpec& spec);

/// Materialize a spec. Throws InvalidArgument on violated invariants or
/// dimensions beyond kMaxDimension.
ComplexMatrix build(const OperatorSpec& spec);

/// lambda * T, entry by entry. build(Scaled{lambda, s}) goes through this
/// exact routine, so both paths agree bitwise.
ComplexMatrix scale(Complex lambda, const ComplexMatrix& op);

// ---------------------------------------------------------------------------
// Norms and power sequences

enum class NormKind { Spectral, Frobenius };

/// Largest singular value, from the top eigenvalue of M^*M computed with a
/// self-adjoint eigensolver. Deterministic, relative accuracy ~ machine eps.
double operator_norm(const ComplexMatrix& m);
double operator_norm(const Eigen::MatrixXcd& m);

double frobenius_norm(const Eigen::MatrixXcd& m);
double matrix_norm(const Eigen::MatrixXcd& m, NormKind kind);

/// Fitted exponential envelope ||T^n|| <= C r^n.
struct GeometricFit {
  double constant = 0.0;
  double rate = 0.0;

  double bound(Index n) const;
};

/// ||T^n|| for n = 1..n_max, n = index + 1.
struct PowerTrace {
  std::vector<double> norms;
  bool truncated = false;  ///< norms passed kNormOverflow; trace stops there
  std::optional<GeometricFit> fit;

  Index size() const { return static_cast<Index>(norms.size()); }
  double at(Index n) const { return norms.at(static_cast<std::size_t>(n - 1)); }
};

inline constexpr double kNormOverflow = 1e300;

/// Long power streams zero entries below this. A decaying stream would
/// otherwise spend hundreds of steps on subnormal arithmetic, two orders of
/// magnitude slower, for values no tolerance can see.
inline constexpr double kUnderflowFlush = 1e-290;

void flush_underflow(Eigen::MatrixXcd& m);
void flush_underflow(Eigen::VectorXcd& v);

/// One multiplication per step, T^{n+1} = T^n T.
PowerTrace power_trace(const ComplexMatrix& op, Index n_max,
                       NormKind kind = NormKind::Spectral);

/// Least-squares fit of log ||T^n|| over the second half of the trace, with
/// C raised until the bound covers every recorded n. Empty when the trace is
/// not decaying (final norm >= 0.99 * max of the last quarter, or r >= 1).
std::optional<GeometricFit> fit_geometric_decay(const PowerTrace& trace);

}  // namespace ergolab
