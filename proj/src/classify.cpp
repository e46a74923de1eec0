#include <algorithm>
#include <cmath>
#include <numbers>

#include "ergolab/spectral.hpp"

namespace ergolab {

namespace {

constexpr double kKaltonThreshold = 1.0 / std::numbers::e - 1e-6;

/// Maxima of a sequence (index n - 1) over (N/4, N/2] and (N/2, N].
struct BlockMaxima {
  double prev = 0.0;
  double last = 0.0;
  double overall = 0.0;
};

BlockMaxima block_maxima(const std::vector<double>& values) {
  const auto n_max = static_cast<Index>(values.size());
  BlockMaxima b;
  for (Index n = 1; n <= n_max; ++n) {
    const double v = values[static_cast<std::size_t>(n - 1)];
    b.overall = std::max(b.overall, v);
    if (n > n_max / 2) {
      b.last = std::max(b.last, v);
    } else if (n > n_max / 4) {
      b.prev = std::max(b.prev, v);
    }
  }
  return b;
}

bool bounded(const std::vector<double>& values) {
  const auto b = block_maxima(values);
  return b.last <= 1.5 * b.prev;
}

bool decaying(const std::vector<double>& values) {
  const auto b = block_maxima(values);
  return b.last <= 0.75 * b.prev || b.last <= 1e-14 * std::max(1.0, b.overall);
}

bool vanishing(const std::vector<double>& values) {
  const auto b = block_maxima(values);
  return b.last <= 1e-6 * std::max(1.0, b.overall);
}

/// Frobenius traces of T^n, M_n, T^n (I - T) and M_n - M_{n-1}, plus the
/// spectral-norm maximum of n ||T^n (I - T)|| over (N/2, N].
struct Traces {
  std::vector<double> power;
  std::vector<double> mean;
  std::vector<double> kt;
  std::vector<double> increment;
  double kalton = 0.0;
  bool overflow = false;
};

Traces run_traces(const ComplexMatrix& op, Index n_max, bool want_kalton) {
  const Index dim = op.dim();
  Traces t;
  Eigen::MatrixXcd power = op.matrix();
  Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(dim, dim);
  Eigen::MatrixXcd previous_mean = Eigen::MatrixXcd::Zero(dim, dim);
  for (Index n = 1; n <= n_max; ++n) {
    Eigen::MatrixXcd next = power * op.matrix();
    flush_underflow(next);
    sum += power;
    Eigen::MatrixXcd mean = sum / static_cast<double>(n);
    const Eigen::MatrixXcd difference = power - next;
    const double p = frobenius_norm(power);
    if (!std::isfinite(p) || p > kNormOverflow) {
      t.overflow = true;
      break;
    }
    t.power.push_back(p);
    t.mean.push_back(frobenius_norm(mean));
    const double k = frobenius_norm(difference);
    t.kt.push_back(k);
    t.increment.push_back(n == 1 ? frobenius_norm(mean) : frobenius_norm(mean - previous_mean));
    // ||A||_2 <= ||A||_F prunes most spectral evaluations.
    if (want_kalton && n > n_max / 2) {
      const double nd = static_cast<double>(n);
      if (nd * k > t.kalton) {
        t.kalton = std::max(t.kalton, dim == 1 ? nd * k : nd * operator_norm(difference));
      }
    }
    previous_mean = std::move(mean);
    power = std::move(next);
  }
  return t;
}

Predicate make_predicate(std::optional<bool> spectral, bool trace) {
  Predicate p;
  p.spectral = spectral;
  p.value = spectral;
  p.trace = trace;
  p.discordant = spectral.has_value() && *spectral != trace;
  return p;
}

}  // namespace

bool ErgodicVerdict::discordant() const {
  for (const Predicate* p :
       {&norm_powers_vanish, &power_bounded, &cesaro_bounded, &powers_over_n_vanish,
        &uniformly_ergodic, &rotationally_ue, &powers_converge, &kt_condition, &kalton_pass}) {
    if (p->discordant) return true;
  }
  return false;
}

ErgodicVerdict classify(const ComplexMatrix& op, const ClassifyOptions& options) {
  if (options.n_max < 8) throw InvalidArgument("classify: n_max must be >= 8");
  ErgodicVerdict v;
  v.spectrum = eigen_decompose(op, options.tolerances);
  const SpectralReport& s = v.spectrum;

  std::optional<bool> vanish, bounded_powers, bounded_means, converge, kt;
  if (!s.flagged) {
    const bool inside = !s.outside_unit_disk();
    const Complex one(1.0, 0.0);
    const EigenCluster* at_one = s.find(one);
    vanish = s.spectral_radius < 1.0 - s.unimodular_tol;
    bounded_powers = inside && s.unimodular_semisimple();
    bool means_ok = inside && (at_one == nullptr || at_one->semisimple);
    for (const auto& c : s.eigenvalues) {
      if (c.unimodular && &c != at_one && c.pole_order > 2) means_ok = false;
    }
    bounded_means = means_ok;
    converge = *bounded_powers && s.unimodular_subset_of_one();
    kt = inside && s.unimodular_subset_of_one() && (at_one == nullptr || at_one->semisimple);
  }

  const auto t = run_traces(op, options.n_max, true);
  TraceEvidence& e = v.evidence;
  e.n_max = options.n_max;
  if (!t.power.empty()) {
    e.power_norm = t.power.back();
    e.mean_norm = t.mean.back();
    e.kt_norm = t.kt.back();
    e.mean_increment = t.increment.back();
  }
  e.kalton_estimate = t.overflow ? kNormOverflow : t.kalton;

  bool tr_vanish = false, tr_bounded = false, tr_means = false, tr_over_n = false, tr_ue = false,
       tr_kt = false, tr_kalton = false;
  if (!t.overflow) {
    std::vector<double> over_n(t.power.size());
    for (std::size_t k = 0; k < over_n.size(); ++k) {
      over_n[k] = t.power[k] / static_cast<double>(k + 1);
    }
    tr_vanish = vanishing(t.power);
    tr_bounded = bounded(t.power);
    tr_means = bounded(t.mean);
    tr_over_n = decaying(over_n);
    tr_ue = decaying(t.increment);
    tr_kt = vanishing(t.kt);
    tr_kalton = t.kalton < kKaltonThreshold;
  }

  v.norm_powers_vanish = make_predicate(vanish, tr_vanish);
  v.power_bounded = make_predicate(bounded_powers, tr_bounded);
  v.cesaro_bounded = make_predicate(bounded_means, tr_means);
  v.powers_over_n_vanish = make_predicate(bounded_powers, tr_over_n);
  v.uniformly_ergodic = make_predicate(bounded_powers, tr_ue);
  v.rotationally_ue = make_predicate(bounded_powers, tr_over_n);
  v.powers_converge = make_predicate(converge, tr_bounded && tr_kt);
  v.kt_condition = make_predicate(kt, tr_kt);
  v.kalton_pass = make_predicate(converge, tr_kalton);
  return v;
}

KaltonResult kalton_test(const ComplexMatrix& op, Index n_max) {
  if (n_max < 100) throw InvalidArgument("kalton_test: n_max must be >= 100");
  const auto t = run_traces(op, n_max, true);
  KaltonResult r;
  r.limsup_estimate = t.overflow ? kNormOverflow : t.kalton;
  r.pass = !t.overflow && t.kalton < kKaltonThreshold;
  return r;
}

KtResult kt_check(const ComplexMatrix& op, Index n_max, const SpectralTolerances& tol) {
  if (n_max < 8) throw InvalidArgument("kt_check: n_max must be >= 8");
  const auto t = run_traces(op, n_max, false);
  if (t.overflow || !bounded(t.power)) {
    throw PreconditionFailed("kt_check: powers are not bounded over the horizon");
  }
  const auto report = eigen_decompose(op, tol);
  KtResult r;
  r.value = vanishing(t.kt);
  r.spectral = report.unimodular_subset_of_one();
  r.discordant = report.flagged || r.value != r.spectral;
  return r;
}

}  // namespace ergolab
