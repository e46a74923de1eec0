#pragma once

// Eigenstructure and the spectral characterizations of ergodic behaviour.

#include <optional>
#include <string>
#include <vector>

#include "ergolab/hilbert.hpp"
#include "ergolab/operator.hpp"

namespace ergolab {

/// Tolerances of the eigenstructure analysis. Defaults scale with the
/// operand: eps_unim = 1e-8 * dim, delta_cluster = 1e-7 * ||M||,
/// rank threshold = dim * ||M|| * 1e-12.
struct SpectralTolerances {
  double unimodular_per_dim = 1e-8;
  double cluster_rel = 1e-7;
  double rank_rel = 1e-12;
};

/// One eigenvalue cluster. `value` is the cluster centroid, which stays
/// accurate even when a defective eigenvalue splits under rounding.
struct EigenCluster {
  Complex value;
  Index algebraic = 0;
  Index geometric = 0;
  Index pole_order = 0;  ///< index of the eigenvalue (size of the largest Jordan block)
  bool semisimple = false;
  bool unimodular = false;
};

struct SpectralReport {
  Index dim = 0;
  double norm = 0.0;
  std::vector<EigenCluster> eigenvalues;
  double spectral_radius = 0.0;
  std::vector<Complex> unimodular_set;  ///< Lambda = sigma(T) on the unit circle
  double unimodular_tol = 0.0;
  double cluster_tol = 0.0;
  bool flagged = false;  ///< ambiguous clustering; spectral verdicts are undecided
  std::string flag_reason;

  /// Cluster within max(unimodular_tol, cluster_tol) of z, if any.
  const EigenCluster* find(Complex z) const;
  /// r(T) > 1 + unimodular_tol.
  bool outside_unit_disk() const;
  /// Every unimodular eigenvalue is semisimple.
  bool unimodular_semisimple() const;
  /// Lambda is contained in {1}.
  bool unimodular_subset_of_one() const;
};

SpectralReport eigen_decompose(const ComplexMatrix& m, const SpectralTolerances& tol = {});

/// Numerical rank of m with singular-value threshold `threshold`.
Index numerical_rank(const Eigen::MatrixXcd& m, double threshold);

/// Spectral projection onto ker(lambda I - T) along range(lambda I - T).
/// Returns the zero matrix when lambda is not an eigenvalue and nothing when
/// lambda is a non-semisimple eigenvalue.
std::optional<ComplexMatrix> spectral_projection(const ComplexMatrix& op, Complex lambda,
                                                 const SpectralTolerances& tol = {});

// ---------------------------------------------------------------------------
// Classifier

/// A predicate decided from the spectrum and cross-checked against traces.
struct Predicate {
  std::optional<bool> value;     ///< spectral decision; empty when undecided
  std::optional<bool> spectral;  ///< empty when the spectral report is flagged
  bool trace = false;            ///< evidence from the power / mean traces
  bool discordant = false;       ///< spectral and trace sources disagree
};

/// Trace quantities the verdict rests on.
struct TraceEvidence {
  Index n_max = 0;
  double power_norm = 0.0;        ///< ||T^N||_F
  double mean_norm = 0.0;         ///< ||M_N||_F
  double kt_norm = 0.0;           ///< ||T^N (I-T)||_F
  double mean_increment = 0.0;    ///< ||M_N - M_{N-1}||_F
  double kalton_estimate = 0.0;   ///< max over the last dyadic block of n ||T^n (I-T)||
};

struct ErgodicVerdict {
  Predicate norm_powers_vanish;
  Predicate power_bounded;
  Predicate cesaro_bounded;
  Predicate powers_over_n_vanish;
  Predicate uniformly_ergodic;
  Predicate rotationally_ue;
  Predicate powers_converge;
  Predicate kt_condition;
  Predicate kalton_pass;
  SpectralReport spectrum;
  TraceEvidence evidence;

  bool discordant() const;
};

struct ClassifyOptions {
  Index n_max = 4096;
  SpectralTolerances tolerances{};
};

ErgodicVerdict classify(const ComplexMatrix& op, const ClassifyOptions& options = {});

struct KaltonResult {
  double limsup_estimate = 0.0;
  bool pass = false;
};

/// max over n in (n_max/2, n_max] of n ||T^n (I - T)||, compared with 1/e - 1e-6.
KaltonResult kalton_test(const ComplexMatrix& op, Index n_max);

struct KtResult {
  bool value = false;       ///< trace verdict ||T^n (I - T)|| -> 0
  bool spectral = false;    ///< Lambda contained in {1}
  bool discordant = false;
};

/// Throws PreconditionFailed when the power trace is not bounded over the horizon.
KtResult kt_check(const ComplexMatrix& op, Index n_max, const SpectralTolerances& tol = {});

struct UnimodularComponent {
  Complex lambda;
  ComplexMatrix projection;
};

struct UnimodularDecomposition {
  std::vector<UnimodularComponent> components;
  /// Orthonormal basis (columns) of range(prod_j (lambda_j I - T)).
  Eigen::MatrixXcd complement_basis;
  double idempotence_error = 0.0;   ///< max_j ||E_j^2 - E_j||
  double orthogonality_error = 0.0; ///< max_{j != l} ||E_j E_l||
  bool rank_count_ok = false;       ///< sum rank E_j + rank complement == dim
};

/// Throws PreconditionFailed unless T is rotationally uniformly ergodic.
UnimodularDecomposition decompose_unimodular(const ComplexMatrix& op,
                                             const SpectralTolerances& tol = {});

struct ProfilePoint {
  Complex lambda;
  EhtVerdict verdict = EhtVerdict::Undecided;
  double sup_partial_norm = 0.0;
  bool conjugate_in_spectrum = false;  ///< conj(lambda) is in Lambda
};

struct RotatedProfile {
  std::vector<ProfilePoint> points;
  bool range_member = false;  ///< x lies in every range(lambda_j I - T)
  std::vector<std::string> violations;
  bool consistent() const { return violations.empty(); }
};

struct ProfileOptions {
  Index grid_points = 64;
  EhtParams eht{100000, 50, 1e-3};
};

/// Default grid: `grid_points` equispaced points followed by conj(lambda_j)
/// for every lambda_j in Lambda.
std::vector<Complex> default_profile_grid(const SpectralReport& report, Index grid_points);

RotatedProfile rotated_series_profile(const ComplexMatrix& op, const VectorC& x,
                                      const std::vector<Complex>& grid,
                                      const ProfileOptions& options = {});
RotatedProfile rotated_series_profile(const ComplexMatrix& op, const VectorC& x,
                                      const ProfileOptions& options = {});

}  // namespace ergolab
