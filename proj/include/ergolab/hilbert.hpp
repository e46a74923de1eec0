#pragma once

// One-sided and rotated ergodic Hilbert transform partial sums, domain
// membership, fractional powers of I - T and mean decay rates.

#include <optional>
#include <vector>

#include "ergolab/operator.hpp"

namespace ergolab {

enum class EhtVerdict { Converged, Diverging, Undecided };

const char* to_string(EhtVerdict v);

/// Finite-horizon decision parameters.
///
/// Diverging: over the last two dyadic blocks the increment
/// d1 = ||H_N x - H_{N/2} x|| exceeds tol and d1 >= d0 / 1.5 with
/// d0 = ||H_{N/2} x - H_{N/4} x|| (harmonic or faster growth).
/// Converged: not diverging, every pair among the last W partials lies within
/// tol, and the last term ||lambda^N T^N x|| / N < tol.
/// Otherwise undecided.
struct EhtParams {
  Index n_max = 10000;
  Index window = 50;
  double tol = 1e-8;
};

struct EhtTrace {
  Complex lambda;
  EhtParams params;
  std::vector<double> partial_norms;  ///< ||H_n x||, n = index + 1
  Eigen::VectorXcd final_partial;     ///< H_N x
  double last_term_norm = 0.0;        ///< ||lambda^N T^N x|| / N
  double window_spread = 0.0;         ///< max pairwise distance over the last W partials
  double sup_partial_norm = 0.0;
  EhtVerdict verdict = EhtVerdict::Undecided;

  /// ||H_N x|| when converged.
  std::optional<double> limit_norm() const;
};

/// Partial sums H_n x = sum_{k<=n} lambda^k T^k x / k, accumulated with
/// compensated summation. The rotated case iterates with scale(lambda, T),
/// so it agrees exactly with eht_partial(scale(lambda, T), 1, ...).
EhtTrace eht_partial(const ComplexMatrix& op, Complex lambda, const VectorC& x,
                     const EhtParams& params = {});

struct DomainMembership {
  EhtTrace trace;          ///< lambda = 1
  double range_residual;   ///< min_y ||(I - T) y - x||
};

DomainMembership domain_membership(const ComplexMatrix& op, const VectorC& x,
                                   const EhtParams& params = {});

/// Taylor coefficients of (1 - t)^alpha = 1 - sum_j a_j t^j, j = 1..J.
struct FracCoeffSeq {
  double alpha = 0.0;
  std::vector<double> values;  ///< a_1 .. a_J

  double at(Index j) const { return values.at(static_cast<std::size_t>(j - 1)); }
};

FracCoeffSeq frac_coeffs(double alpha, Index terms);

struct FractionalPower {
  ComplexMatrix value;
  Index terms = 0;           ///< truncation J
  double tail_bound = 0.0;   ///< guaranteed bound on the omitted tail
  double power_bound = 0.0;  ///< K used in the bound
};

/// (I - T)^alpha = I - sum_{j<=J} a_j T^j with J chosen from the tail bound
/// K ||T^{J+1}|| (1 - sum_{j<=J} a_j) < tol, K >= sup_m ||T^m||.
/// Throws PreconditionFailed when T is not power-bounded, and Error when the
/// tolerance cannot be met within `max_terms`.
FractionalPower fractional_power(const ComplexMatrix& op, double alpha, double tol,
                                 Index max_terms = 20'000'000);

/// Log-log slope beta of ||M_n y|| ~ n^{-beta} over the second half of the
/// horizon, fitted on block maxima of geometrically growing blocks so that
/// periodic zeros of M_n y do not bias the fit. Empty when the norms are not
/// decreasing or y = 0.
std::optional<double> mn_decay_exponent(const ComplexMatrix& op, const VectorC& y, Index n_max);

}  // namespace ergolab
