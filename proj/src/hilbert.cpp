#include "ergolab/hilbert.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "ergolab/spectral.hpp"
#include "ergolab/summation.hpp"

namespace ergolab {

const char* to_string(EhtVerdict v) {
  switch (v) {
    case EhtVerdict::Converged:
      return "converged";
    case EhtVerdict::Diverging:
      return "diverging";
    case EhtVerdict::Undecided:
      return "undecided";
  }
  return "undecided";
}

std::optional<double> EhtTrace::limit_norm() const {
  if (verdict != EhtVerdict::Converged) return std::nullopt;
  return final_partial.norm();
}

EhtTrace eht_partial(const ComplexMatrix& op, Complex lambda, const VectorC& x,
                     const EhtParams& params) {
  if (op.dim() != x.dim()) throw InvalidArgument("eht_partial: dimension mismatch");
  if (params.n_max < 4) throw InvalidArgument("eht_partial: n_max must be >= 4");
  if (params.window < 2 || params.window > params.n_max) {
    throw InvalidArgument("eht_partial: window must lie in [2, n_max]");
  }
  if (!(params.tol > 0.0)) throw InvalidArgument("eht_partial: tol must be positive");
  if (std::abs(std::abs(lambda) - 1.0) > 1e-12) {
    throw InvalidArgument("eht_partial: lambda must be unimodular");
  }

  const ComplexMatrix rotated = lambda == Complex(1.0, 0.0) ? op : scale(lambda, op);
  const Index n_max = params.n_max;
  const Index half = n_max / 2;
  const Index quarter = n_max / 4;

  EhtTrace trace;
  trace.lambda = lambda;
  trace.params = params;
  trace.partial_norms.reserve(static_cast<std::size_t>(n_max));

  CompensatedVector sum(x.dim());
  Eigen::VectorXcd term = x.vector();
  Eigen::VectorXcd at_half;
  Eigen::VectorXcd at_quarter;
  std::deque<Eigen::VectorXcd> window;
  for (Index n = 1; n <= n_max; ++n) {
    term = rotated.matrix() * term;
    flush_underflow(term);
    sum.add(term / static_cast<double>(n));
    Eigen::VectorXcd partial = sum.value();
    const double norm = partial.norm();
    if (!std::isfinite(norm)) throw ArithmeticOverflow("eht_partial: partial sums overflowed");
    trace.partial_norms.push_back(norm);
    trace.sup_partial_norm = std::max(trace.sup_partial_norm, norm);
    if (n == quarter) at_quarter = partial;
    if (n == half) at_half = partial;
    if (n > n_max - params.window) window.push_back(partial);
    if (n == n_max) trace.final_partial = std::move(partial);
  }
  trace.last_term_norm = term.norm() / static_cast<double>(n_max);
  for (std::size_t a = 0; a < window.size(); ++a) {
    for (std::size_t b = a + 1; b < window.size(); ++b) {
      trace.window_spread = std::max(trace.window_spread, (window[a] - window[b]).norm());
    }
  }

  const double d1 = (trace.final_partial - at_half).norm();
  const double d0 = (at_half - at_quarter).norm();
  if (d1 > params.tol && d1 >= d0 / 1.5) {
    trace.verdict = EhtVerdict::Diverging;
  } else if (trace.window_spread < params.tol && trace.last_term_norm < params.tol) {
    trace.verdict = EhtVerdict::Converged;
  } else {
    trace.verdict = EhtVerdict::Undecided;
  }
  return trace;
}

DomainMembership domain_membership(const ComplexMatrix& op, const VectorC& x,
                                   const EhtParams& params) {
  auto trace = eht_partial(op, Complex(1.0, 0.0), x, params);
  const Index dim = op.dim();
  const Eigen::MatrixXcd a = Eigen::MatrixXcd::Identity(dim, dim) - op.matrix();
  const Eigen::VectorXcd y = a.completeOrthogonalDecomposition().solve(x.vector());
  const double residual = (a * y - x.vector()).norm();
  return DomainMembership{std::move(trace), residual};
}

FracCoeffSeq frac_coeffs(double alpha, Index terms) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("frac_coeffs: alpha must lie in (0, 1)");
  if (terms < 1) throw InvalidArgument("frac_coeffs: J must be >= 1");
  FracCoeffSeq seq;
  seq.alpha = alpha;
  seq.values.reserve(static_cast<std::size_t>(terms));
  double a = alpha;
  for (Index j = 1; j <= terms; ++j) {
    seq.values.push_back(a);
    a *= (static_cast<double>(j) - alpha) / static_cast<double>(j + 1);
  }
  return seq;
}

FractionalPower fractional_power(const ComplexMatrix& op, double alpha, double tol,
                                 Index max_terms) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw InvalidArgument("fractional_power: alpha must lie in (0, 1)");
  }
  if (!(tol > 0.0)) throw InvalidArgument("fractional_power: tol must be positive");
  const auto report = eigen_decompose(op);
  if (report.flagged || report.outside_unit_disk() || !report.unimodular_semisimple()) {
    throw PreconditionFailed("fractional_power: T is not power-bounded");
  }

  const Index dim = op.dim();
  Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(dim, dim);
  Eigen::MatrixXcd power = op.matrix();  // T^j
  CompensatedSum taken;                  // sum_{j<=J} a_j
  double a = alpha;
  // K = max_{i<=k} ||T^i|| bounds every power once ||T^k|| <= 1; before that
  // the running maximum is the best available estimate.
  double k_bound = 1.0;
  for (Index j = 1; j <= max_terms; ++j) {
    sum += a * power;
    taken += a;
    a *= (static_cast<double>(j) - alpha) / static_cast<double>(j + 1);
    power = power * op.matrix();  // T^{J+1}
    const double next = frobenius_norm(power);
    if (!std::isfinite(next)) throw ArithmeticOverflow("fractional_power: powers overflowed");
    k_bound = std::max(k_bound, next);
    const double remaining = std::max(0.0, 1.0 - taken.value());
    const double tail = k_bound * next * remaining;
    if (tail < tol || next == 0.0) {
      Eigen::MatrixXcd value = Eigen::MatrixXcd::Identity(dim, dim) - sum;
      return FractionalPower{ComplexMatrix(std::move(value)), j, tail, k_bound};
    }
  }
  throw Error("fractional_power: tolerance not reached within " + std::to_string(max_terms) +
              " terms");
}

std::optional<double> mn_decay_exponent(const ComplexMatrix& op, const VectorC& y, Index n_max) {
  if (op.dim() != y.dim()) throw InvalidArgument("mn_decay_exponent: dimension mismatch");
  if (n_max < 100) throw InvalidArgument("mn_decay_exponent: n_max must be >= 100");
  if (y.norm() == 0.0) return std::nullopt;

  std::vector<double> norms;
  norms.reserve(static_cast<std::size_t>(n_max));
  Eigen::VectorXcd term = y.vector();
  CompensatedVector sum(y.dim());
  for (Index n = 1; n <= n_max; ++n) {
    term = op.matrix() * term;
    flush_underflow(term);
    sum.add(term);
    norms.push_back(sum.value().norm() / static_cast<double>(n));
  }

  // Blocks [b, b * ratio) covering (n_max / 2, n_max].
  constexpr int kBlocks = 8;
  const double start = static_cast<double>(n_max) / 2.0;
  const double ratio = std::pow(2.0, 1.0 / kBlocks);
  std::vector<double> xs;
  std::vector<double> ys;
  double lo = start;
  for (int b = 0; b < kBlocks; ++b) {
    const double hi = lo * ratio;
    const auto first = static_cast<Index>(std::floor(lo)) + 1;
    const auto last = std::min<Index>(static_cast<Index>(std::floor(hi)), n_max);
    double peak = 0.0;
    Index where = first;
    for (Index n = first; n <= last; ++n) {
      if (norms[static_cast<std::size_t>(n - 1)] > peak) {
        peak = norms[static_cast<std::size_t>(n - 1)];
        where = n;
      }
    }
    if (peak > 0.0) {
      xs.push_back(std::log(static_cast<double>(where)));
      ys.push_back(std::log(peak));
    }
    lo = hi;
  }
  if (xs.size() < 3) return std::nullopt;
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxy += (xs[k] - mx) * (ys[k] - my);
    sxx += (xs[k] - mx) * (xs[k] - mx);
  }
  if (sxx == 0.0) return std::nullopt;
  const double slope = sxy / sxx;
  if (!(slope < 0.0)) return std::nullopt;
  return -slope;
}

}  // namespace ergolab
