#include "ergolab/cesaro.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ergolab/spectral.hpp"

namespace ergolab {

namespace {

std::vector<Eigen::MatrixXcd> power_list(const ComplexMatrix& op, Index n_max) {
  std::vector<Eigen::MatrixXcd> powers;
  powers.reserve(static_cast<std::size_t>(n_max + 1));
  powers.push_back(Eigen::MatrixXcd::Identity(op.dim(), op.dim()));
  for (Index k = 1; k <= n_max; ++k) powers.push_back(powers.back() * op.matrix());
  return powers;
}

void require_order(double alpha, bool allow_one, const char* what) {
  const bool ok = alpha > 0.0 && (allow_one ? alpha <= 1.0 : alpha < 1.0);
  if (!ok) {
    throw InvalidArgument(std::string(what) + ": order alpha must lie in (0, " +
                          (allow_one ? "1]" : "1)"));
  }
}

double distance(const Eigen::MatrixXcd& m, const std::optional<ComplexMatrix>& reference,
                NormKind kind) {
  if (reference) return matrix_norm(m - reference->matrix(), kind);
  return matrix_norm(m, kind);
}

/// E ~ ((N + s) M_N - (m + s) M_m) / (N - m) when (n + s)(M_n - E) -> B.
Eigen::MatrixXcd richardson(const Eigen::MatrixXcd& mean_m, Index m, const Eigen::MatrixXcd& mean_n,
                            Index n, double shift) {
  const double wn = static_cast<double>(n) + shift;
  const double wm = static_cast<double>(m) + shift;
  return (wn * mean_n - wm * mean_m) / static_cast<double>(n - m);
}

}  // namespace

ComplexMatrix cesaro_mean(const ComplexMatrix& op, Index n) {
  if (n < 1) throw InvalidArgument("cesaro_mean: n must be >= 1");
  Eigen::MatrixXcd power = op.matrix();
  Eigen::MatrixXcd sum = power;
  for (Index k = 2; k <= n; ++k) {
    power = power * op.matrix();
    sum += power;
  }
  return ComplexMatrix(sum / static_cast<double>(n));
}

BinomialCoeffSeq binom_coeffs(double beta, Index n_max) {
  if (n_max < 0) throw InvalidArgument("binom_coeffs: n_max must be >= 0");
  if (!std::isfinite(beta)) throw InvalidArgument("binom_coeffs: beta must be finite");
  if (beta <= -1.0 && beta == std::floor(beta)) {
    throw InvalidArgument("binom_coeffs: beta must not be a negative integer");
  }
  BinomialCoeffSeq seq;
  seq.beta = beta;
  seq.is_signed = beta <= -1.0;
  seq.values.resize(static_cast<std::size_t>(n_max + 1));
  seq.values[0] = 1.0;
  for (Index n = 1; n <= n_max; ++n) {
    const auto k = static_cast<std::size_t>(n);
    seq.values[k] = seq.values[k - 1] * (beta + static_cast<double>(n)) / static_cast<double>(n);
  }
  return seq;
}

std::vector<Eigen::MatrixXcd> salpha_sequence(const ComplexMatrix& op, double alpha, Index n_max) {
  if (n_max < 0) throw InvalidArgument("salpha_sequence: n_max must be >= 0");
  const auto powers = power_list(op, n_max);
  const auto weights = binom_coeffs(alpha - 1.0, n_max);
  std::vector<Eigen::MatrixXcd> s;
  s.reserve(powers.size());
  for (Index m = 0; m <= n_max; ++m) {
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(op.dim(), op.dim());
    for (Index k = 0; k <= m; ++k) acc += weights.at(m - k) * powers[static_cast<std::size_t>(k)];
    s.push_back(std::move(acc));
  }
  return s;
}

ComplexMatrix calpha_mean(const ComplexMatrix& op, double alpha, Index n) {
  require_order(alpha, true, "calpha_mean");
  if (n < 0) throw InvalidArgument("calpha_mean: n must be >= 0");
  const auto weights = binom_coeffs(alpha - 1.0, n);
  const auto norm = binom_coeffs(alpha, n).at(n);
  Eigen::MatrixXcd power = Eigen::MatrixXcd::Identity(op.dim(), op.dim());
  Eigen::MatrixXcd acc = weights.at(n) * power;
  for (Index k = 1; k <= n; ++k) {
    power = power * op.matrix();
    acc += weights.at(n - k) * power;
  }
  return ComplexMatrix(acc / norm);
}

ComplexMatrix powers_from_salpha(const ComplexMatrix& op, double alpha, Index n) {
  require_order(alpha, false, "powers_from_salpha");
  if (n < 0) throw InvalidArgument("powers_from_salpha: n must be >= 0");
  const auto s = salpha_sequence(op, alpha, n);
  const auto inverse_weights = binom_coeffs(-alpha - 1.0, n);
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(op.dim(), op.dim());
  for (Index k = 0; k <= n; ++k) acc += inverse_weights.at(n - k) * s[static_cast<std::size_t>(k)];
  return ComplexMatrix(std::move(acc));
}

std::vector<Eigen::MatrixXcd> hilbert_partial_operators(const ComplexMatrix& op, Index n_max) {
  std::vector<Eigen::MatrixXcd> h;
  h.reserve(static_cast<std::size_t>(std::max<Index>(n_max, 0)));
  Eigen::MatrixXcd power = Eigen::MatrixXcd::Identity(op.dim(), op.dim());
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(op.dim(), op.dim());
  for (Index j = 1; j <= n_max; ++j) {
    power = power * op.matrix();
    acc += power / static_cast<double>(j);
    h.push_back(acc);
  }
  return h;
}

AbelMean abel_mean(const ComplexMatrix& op, double r, double tol) {
  if (!(r > 0.0 && r < 1.0)) throw InvalidArgument("abel_mean: r must lie in (0, 1)");
  if (!(tol > 0.0)) throw InvalidArgument("abel_mean: tol must be positive");
  const auto report = eigen_decompose(op);
  if (r * report.spectral_radius >= 1.0 - 1e-9) {
    throw PreconditionFailed("abel_mean: series not summable at r = " + std::to_string(r) +
                             " (r * r(T) >= 1)");
  }

  const Index dim = op.dim();
  constexpr Index kMaxTerms = 50'000'000;
  Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(dim, dim);
  Eigen::MatrixXcd power = Eigen::MatrixXcd::Identity(dim, dim);
  double weight = 1.0;  // r^n

  // Sum_m r^m ||T^m|| <= (sum_{i<k} r^i ||T^i||) / (1 - r^k ||T^k||) once r^k ||T^k|| < 1.
  std::optional<double> series_bound;
  double head = 0.0;

  for (Index n = 0; n < kMaxTerms; ++n) {
    const double norm = frobenius_norm(power);  // upper bound of the operator norm
    const double weighted = weight * norm;
    if (!series_bound && n > 0 && weighted <= 0.5) series_bound = head / (1.0 - weighted);
    if (series_bound) {
      const double tail = (1.0 - r) * weighted * *series_bound;
      if (tail < tol) {
        return AbelMean{ComplexMatrix((1.0 - r) * sum), n - 1, tail};
      }
    }
    if (!std::isfinite(weighted)) throw ArithmeticOverflow("abel_mean: power sequence overflowed");
    head += weighted;
    sum += weight * power;
    power = power * op.matrix();
    flush_underflow(power);
    weight *= r;
  }
  throw Error("abel_mean: tolerance not reached within the term limit");
}

std::optional<ComplexMatrix> ergodic_projection(const ComplexMatrix& op) {
  return spectral_projection(op, Complex(1.0, 0.0));
}

VectorC averaged_double_sum(const ComplexMatrix& op, const VectorC& x, Index n) {
  if (n < 1) throw InvalidArgument("averaged_double_sum: N must be >= 1");
  if (op.dim() != x.dim()) throw InvalidArgument("averaged_double_sum: dimension mismatch");
  // (1/N) sum_{n=1}^N sum_{k<n} T^k x = (1/N) sum_{k=0}^{N-1} (N - k) T^k x.
  Eigen::VectorXcd term = x.vector();
  Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(x.dim());
  for (Index k = 0; k < n; ++k) {
    acc += static_cast<double>(n - k) * term;
    term = op.matrix() * term;
  }
  return VectorC(acc / static_cast<double>(n));
}

UniformInverse uniform_inverse_via_averages(const ComplexMatrix& op, Index n) {
  if (n < 1) throw InvalidArgument("uniform_inverse_via_averages: N must be >= 1");
  const auto report = eigen_decompose(op);
  if (report.flagged || report.outside_unit_disk() || !report.unimodular_semisimple() ||
      report.find(Complex(1.0, 0.0)) != nullptr) {
    throw PreconditionFailed(
        "uniform_inverse_via_averages: ||M_n(T)|| does not tend to 0 (1 in the spectrum or T not "
        "uniformly ergodic)");
  }
  const Index dim = op.dim();
  Eigen::MatrixXcd power = Eigen::MatrixXcd::Identity(dim, dim);
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(dim, dim);
  for (Index k = 0; k < n; ++k) {
    acc += static_cast<double>(n - k) * power;
    power = power * op.matrix();
  }
  acc /= static_cast<double>(n);
  const Eigen::MatrixXcd inverse =
      (Eigen::MatrixXcd::Identity(dim, dim) - op.matrix()).fullPivLu().inverse();
  return UniformInverse{ComplexMatrix(acc), operator_norm(Eigen::MatrixXcd(acc - inverse))};
}

// ---------------------------------------------------------------------------

MeanTrace cesaro_trace(const ComplexMatrix& op, const MeanTraceOptions& options) {
  if (options.n_max < 1) throw InvalidArgument("cesaro_trace: n_max must be >= 1");
  if (options.reference && options.reference->dim() != op.dim()) {
    throw InvalidArgument("cesaro_trace: reference dimension mismatch");
  }
  MeanTrace trace;
  trace.alpha = 0.0;
  trace.norm = options.norm;
  trace.against_reference = options.reference.has_value();

  const Index half = options.n_max / 2;
  Eigen::MatrixXcd power = op.matrix();
  Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(op.dim(), op.dim());
  Eigen::MatrixXcd half_mean;
  for (Index n = 1; n <= options.n_max; ++n) {
    if (n > 1) {
      power = power * op.matrix();
      flush_underflow(power);
    }
    sum += power;
    Eigen::MatrixXcd mean = sum / static_cast<double>(n);
    const double value = distance(mean, options.reference, options.norm);
    if (!std::isfinite(value)) throw ArithmeticOverflow("cesaro_trace: mean overflowed");
    trace.n.push_back(n);
    trace.value.push_back(value);
    if (options.threshold && !trace.first_below && value <= *options.threshold) {
      trace.first_below = n;
    }
    if (n == half) half_mean = mean;
    trace.final_mean = std::move(mean);
    if (options.stop_at_threshold && trace.first_below) break;
  }
  const Index last = trace.n.back();
  if (last == options.n_max && half >= 1 && half < last) {
    trace.extrapolated_limit = richardson(half_mean, half, trace.final_mean, last, 0.0);
  }
  return trace;
}

std::vector<Index> dyadic_checkpoints(Index n_max) {
  std::vector<Index> points;
  for (Index c = 1; c <= n_max; c *= 2) points.push_back(c);
  if (n_max / 2 >= 1) points.push_back(n_max / 2);
  points.push_back(n_max);
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  return points;
}

std::vector<MeanTrace> calpha_traces(const ComplexMatrix& op, const std::vector<double>& alphas,
                                     const MeanTraceOptions& options) {
  if (options.n_max < 1) throw InvalidArgument("calpha_traces: n_max must be >= 1");
  if (options.reference && options.reference->dim() != op.dim()) {
    throw InvalidArgument("calpha_traces: reference dimension mismatch");
  }
  for (double a : alphas) require_order(a, true, "calpha_traces");

  const Index dim = op.dim();
  const Index n_max = options.n_max;
  const auto checkpoints = dyadic_checkpoints(n_max);

  struct OrderState {
    double alpha;
    BinomialCoeffSeq lower;  // A^{alpha-1}
    BinomialCoeffSeq norm;   // A^{alpha}
    std::map<Index, Eigen::MatrixXcd> pending;  // checkpoint -> partial S
    std::map<Index, Eigen::MatrixXcd> means;    // finished checkpoints, kept for extrapolation
    Eigen::MatrixXcd running;                   // order 1: sum_{k<=n} T^k
    MeanTrace trace;
  };
  std::vector<OrderState> states;
  states.reserve(alphas.size());
  for (double a : alphas) {
    OrderState st{a, binom_coeffs(a - 1.0, n_max), binom_coeffs(a, n_max), {}, {}, {}, {}};
    st.trace.alpha = a;
    st.trace.norm = options.norm;
    st.trace.against_reference = options.reference.has_value();
    if (a == 1.0) {
      st.running = Eigen::MatrixXcd::Zero(dim, dim);
    } else {
      for (Index c : checkpoints) st.pending.emplace(c, Eigen::MatrixXcd::Zero(dim, dim));
    }
    states.push_back(std::move(st));
  }

  auto record = [&](OrderState& st, Index n, Eigen::MatrixXcd mean) {
    const double value = distance(mean, options.reference, options.norm);
    if (!std::isfinite(value)) throw ArithmeticOverflow("calpha_traces: mean overflowed");
    st.trace.n.push_back(n);
    st.trace.value.push_back(value);
    if (options.threshold && !st.trace.first_below && value <= *options.threshold) {
      st.trace.first_below = n;
    }
    if (n == n_max / 2 || n == n_max) st.means[n] = mean;
    st.trace.final_mean = std::move(mean);
  };

  // Shared power stream, one multiplication per step; T^0 = I opens the stream.
  Eigen::MatrixXcd power = Eigen::MatrixXcd::Identity(dim, dim);
  for (Index k = 0; k <= n_max; ++k) {
    if (k > 0) {
      power = power * op.matrix();
      flush_underflow(power);
    }
    for (auto& st : states) {
      if (st.alpha == 1.0) {
        st.running += power;
        if (k >= 1) record(st, k, st.running / static_cast<double>(k + 1));
        continue;
      }
      for (auto it = st.pending.lower_bound(k); it != st.pending.end(); ++it) {
        it->second += st.lower.at(it->first - k) * power;
      }
      auto done = st.pending.find(k);
      if (done != st.pending.end()) {
        if (k >= 1) record(st, k, done->second / st.norm.at(k));
        st.pending.erase(done);
      }
    }
  }

  std::vector<MeanTrace> out;
  out.reserve(states.size());
  for (auto& st : states) {
    const Index half = n_max / 2;
    if (half >= 1 && half < n_max && st.means.count(half) && st.means.count(n_max)) {
      st.trace.extrapolated_limit =
          richardson(st.means[half], half, st.means[n_max], n_max, st.alpha);
    }
    out.push_back(std::move(st.trace));
  }
  return out;
}

}  // namespace ergolab
