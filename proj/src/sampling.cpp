#include "ergolab/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/QR>

namespace ergolab {

namespace {

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Index uniform_index(Rng& rng, Index lo, Index hi) {
  return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

/// Uniform in the disk of radius r.
Complex in_disk(Rng& rng, double r) {
  const double rho = r * std::sqrt(uniform(rng, 0.0, 1.0));
  const double theta = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  return std::polar(rho, theta);
}

Index pick(Rng& rng, std::initializer_list<double> weights) {
  double u = uniform(rng, 0.0, 1.0);
  Index k = 0;
  for (double w : weights) {
    if (u < w) return k;
    u -= w;
    ++k;
  }
  return k - 1;
}

}  // namespace

ComplexMatrix random_unitary(Index dim, Rng& rng) {
  if (dim < 1) throw InvalidArgument("random_unitary: dim must be >= 1");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXcd g(dim, dim);
  for (Index c = 0; c < dim; ++c) {
    for (Index r = 0; r < dim; ++r) g(r, c) = Complex(gauss(rng), gauss(rng));
  }
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
  Eigen::MatrixXcd q = qr.householderQ();
  const Eigen::MatrixXcd& r = qr.matrixQR();
  for (Index k = 0; k < dim; ++k) {
    const Complex d = r(k, k);
    const double mag = std::abs(d);
    if (mag > 0.0) q.col(k) *= d / mag;
  }
  return ComplexMatrix(std::move(q));
}

ComplexMatrix random_dense(Index dim, double radius, Rng& rng) {
  if (dim < 1) throw InvalidArgument("random_dense: dim must be >= 1");
  Eigen::MatrixXcd m(dim, dim);
  for (Index c = 0; c < dim; ++c) {
    for (Index r = 0; r < dim; ++r) m(r, c) = in_disk(rng, radius);
  }
  return ComplexMatrix(std::move(m));
}

SampledOperator sample_operator(Rng& rng, const SamplerOptions& options) {
  if (options.min_dim < 1 || options.max_dim < options.min_dim) {
    throw InvalidArgument("sample_operator: invalid dimension range");
  }
  const Index dim = uniform_index(rng, options.min_dim, options.max_dim);
  std::vector<JordanPiece> pieces;
  Index used = 0;

  if (options.unimodular) {
    const Index count = pick(rng, {0.4, 0.3, 0.2, 0.1});
    const std::vector<Complex> catalog = {
        {1.0, 0.0}, {-1.0, 0.0}, {0.0, 1.0}, {0.0, -1.0},
        std::polar(1.0, 2.0 * std::numbers::pi / 3.0)};
    std::vector<Complex> chosen;
    for (Index k = 0; k < count; ++k) {
      Complex lambda;
      for (int attempt = 0; attempt < 64; ++attempt) {
        const Index which = uniform_index(rng, 0, static_cast<Index>(catalog.size()));
        lambda = which < static_cast<Index>(catalog.size())
                     ? catalog[static_cast<std::size_t>(which)]
                     : std::polar(1.0, uniform(rng, -std::numbers::pi, std::numbers::pi));
        const bool clear = std::all_of(chosen.begin(), chosen.end(), [&](Complex mu) {
          return std::abs(std::arg(lambda / mu)) >= 0.1;
        });
        if (clear) break;
        lambda = Complex(0.0, 0.0);
      }
      if (lambda == Complex(0.0, 0.0)) continue;
      const Index size = std::min<Index>(pick(rng, {0.75, 0.2, 0.05}) + 1, dim - used);
      if (size < 1) break;
      chosen.push_back(lambda);
      pieces.push_back({lambda, size});
      used += size;
    }
  }
  while (used < dim) {
    const Index size =
        std::min<Index>(uniform_index(rng, 1, std::max<Index>(options.max_interior_block, 1)),
                        dim - used);
    pieces.push_back({in_disk(rng, options.interior_radius), size});
    used += size;
  }

  Eigen::MatrixXcd j = Eigen::MatrixXcd::Zero(dim, dim);
  Index at = 0;
  for (const auto& p : pieces) {
    for (Index k = 0; k < p.size; ++k) {
      j(at + k, at + k) = p.lambda;
      if (k + 1 < p.size) j(at + k, at + k + 1) = 1.0;
    }
    at += p.size;
  }
  const ComplexMatrix q = random_unitary(dim, rng);
  Eigen::MatrixXcd op = q.matrix() * j * q.matrix().adjoint();
  return SampledOperator{ComplexMatrix(std::move(op)), std::move(pieces)};
}

}  // namespace ergolab
