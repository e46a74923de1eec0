#pragma once

// Averaging operators: Cesaro means M_n, (C, alpha) means built from the
// binomial weights A_n^beta, Abel means, the ergodic projection and the
// averaged double sums that converge to (I - T)^{-1}.

#include <optional>
#include <vector>

#include "ergolab/operator.hpp"

namespace ergolab {

/// M_n(T) = (1/n) sum_{k=1}^n T^k.
ComplexMatrix cesaro_mean(const ComplexMatrix& op, Index n);

/// A_0^beta .. A_{n_max}^beta from A_n = A_{n-1} (beta + n) / n.
struct BinomialCoeffSeq {
  double beta = 0.0;
  bool is_signed = false;  ///< beta <= -1: terms may change sign
  std::vector<double> values;

  double at(Index n) const { return values.at(static_cast<std::size_t>(n)); }
};

/// Rejects beta in {-1, -2, ...}.
BinomialCoeffSeq binom_coeffs(double beta, Index n_max);

/// S_n^alpha = sum_{k=0}^n A_{n-k}^{alpha-1} T^k, for every n = 0..n_max.
std::vector<Eigen::MatrixXcd> salpha_sequence(const ComplexMatrix& op, double alpha, Index n_max);

/// M_n^alpha = S_n^alpha / A_n^alpha, alpha in (0, 1].
ComplexMatrix calpha_mean(const ComplexMatrix& op, double alpha, Index n);

/// T^n = sum_{k=0}^n A_{n-k}^{-alpha-1} S_k^alpha, alpha in (0, 1).
ComplexMatrix powers_from_salpha(const ComplexMatrix& op, double alpha, Index n);

/// H_n = sum_{j=1}^n T^j / j for n = 1..n_max (index n - 1).
std::vector<Eigen::MatrixXcd> hilbert_partial_operators(const ComplexMatrix& op, Index n_max);

struct AbelMean {
  ComplexMatrix value;
  Index terms = 0;          ///< series truncated after T^terms
  double tail_bound = 0.0;  ///< guaranteed bound on the omitted tail
};

/// A_r(T) = (1 - r) sum_n r^n T^n truncated once the computable tail bound
/// (1 - r) r^{N+1} ||T^{N+1}|| B < tol, where B >= sum_m r^m ||T^m|| is
/// obtained from a block of the power trace. Throws PreconditionFailed when
/// r * r(T) >= 1 - 1e-9.
AbelMean abel_mean(const ComplexMatrix& op, double r, double tol);

/// Projection onto ker(I - T) along range(I - T); zero when 1 is not an
/// eigenvalue, empty when 1 is a non-semisimple eigenvalue.
std::optional<ComplexMatrix> ergodic_projection(const ComplexMatrix& op);

/// (1/N) sum_{n=1}^N sum_{k=0}^{n-1} T^k x.
VectorC averaged_double_sum(const ComplexMatrix& op, const VectorC& x, Index n);

struct UniformInverse {
  ComplexMatrix average;
  double distance_to_inverse = 0.0;  ///< against a direct LU solve of (I - T)^{-1}
};

/// The operator form of averaged_double_sum. Throws PreconditionFailed unless
/// ||M_n(T)|| -> 0 (1 outside the spectrum, T uniformly ergodic).
UniformInverse uniform_inverse_via_averages(const ComplexMatrix& op, Index n);

// ---------------------------------------------------------------------------
// Traces

/// Norms of a mean sequence, optionally measured against a reference E.
struct MeanTrace {
  double alpha = 1.0;                ///< 0 marks the plain mean M_n(T)
  NormKind norm = NormKind::Spectral;
  bool against_reference = false;
  std::vector<Index> n;              ///< increasing
  std::vector<double> value;         ///< ||M_n - E|| or ||M_n||
  Eigen::MatrixXcd final_mean;       ///< mean at the last recorded n
  /// Richardson estimate of the limit from the last checkpoint pair (n, 2n);
  /// cancels the O(1/n) term of the error.
  std::optional<Eigen::MatrixXcd> extrapolated_limit;
  std::optional<Index> first_below;  ///< smallest recorded n with value <= threshold
};

struct MeanTraceOptions {
  Index n_max = 10000;
  std::optional<ComplexMatrix> reference;
  NormKind norm = NormKind::Spectral;
  std::optional<double> threshold;  ///< record first_below
  bool stop_at_threshold = false;   ///< plain mean only: stop once below threshold
};

/// ||M_n(T) - E|| for every n = 1..n_max.
MeanTrace cesaro_trace(const ComplexMatrix& op, const MeanTraceOptions& options);

/// Dyadic checkpoints 1, 2, 4, ..., plus n_max and n_max / 2.
std::vector<Index> dyadic_checkpoints(Index n_max);

/// (C, alpha) traces for several orders from one shared power stream. Order
/// 1 is recorded at every n; orders below 1 at the dyadic checkpoints.
std::vector<MeanTrace> calpha_traces(const ComplexMatrix& op, const std::vector<double>& alphas,
                                     const MeanTraceOptions& options);

}  // namespace ergolab
