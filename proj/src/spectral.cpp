#include "ergolab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace ergolab {

namespace {

constexpr Index kMaxMergeGroup = 8;

Eigen::VectorXd singular_values(const Eigen::MatrixXcd& m) {
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(m);
  return svd.singularValues();
}

/// Nullities nu_k = dim - rank((M - mu I)^k), k = 1.. until they stabilize or
/// k reaches max_k + 1. Thresholds scale with ||M - mu I||^k.
std::vector<Index> nullity_profile(const Eigen::MatrixXcd& m, Complex mu, Index max_k,
                                   double rank_rel) {
  const Index dim = m.rows();
  const Eigen::MatrixXcd shifted = m - mu * Eigen::MatrixXcd::Identity(dim, dim);
  const double base = std::max(operator_norm(shifted), std::numeric_limits<double>::min());
  std::vector<Index> nullities;
  Eigen::MatrixXcd power = shifted;
  for (Index k = 1; k <= std::min(max_k + 1, dim + 1); ++k) {
    if (k > 1) power = power * shifted;
    const double threshold = static_cast<double>(dim) * std::pow(base, static_cast<double>(k)) *
                             rank_rel;
    const Index nu = dim - numerical_rank(power, threshold);
    nullities.push_back(nu);
    if (k > 1 && nu == nullities[nullities.size() - 2]) break;
  }
  return nullities;
}

struct Group {
  std::vector<Index> members;  // indices into the raw eigenvalue list
  Complex centroid;
  Index algebraic = 0;
  Index geometric = 0;
  Index pole_order = 0;
  bool verified = false;
};

Complex centroid_of(const std::vector<Index>& members, const Eigen::VectorXcd& raw) {
  Complex sum = 0.0;
  for (Index k : members) sum += raw(k);
  return sum / static_cast<double>(members.size());
}

double diameter_of(const std::vector<Index>& members, const Eigen::VectorXcd& raw) {
  double d = 0.0;
  for (std::size_t a = 0; a < members.size(); ++a) {
    for (std::size_t b = a + 1; b < members.size(); ++b) {
      d = std::max(d, std::abs(raw(members[a]) - raw(members[b])));
    }
  }
  return d;
}

bool is_triangular(const Eigen::MatrixXcd& m) {
  bool lower = true;
  bool upper = true;
  for (Index c = 0; c < m.cols(); ++c) {
    for (Index r = 0; r < m.rows(); ++r) {
      if (m(r, c) == Complex(0.0, 0.0)) continue;
      if (r < c) lower = false;
      if (r > c) upper = false;
    }
  }
  return lower || upper;
}

}  // namespace

Index numerical_rank(const Eigen::MatrixXcd& m, double threshold) {
  if (m.size() == 0) return 0;
  const Eigen::VectorXd s = singular_values(m);
  Index rank = 0;
  for (Index k = 0; k < s.size(); ++k) {
    if (s(k) > threshold) ++rank;
  }
  return rank;
}

const EigenCluster* SpectralReport::find(Complex z) const {
  const double radius = std::max(unimodular_tol, cluster_tol);
  const EigenCluster* best = nullptr;
  double best_distance = radius;
  for (const auto& c : eigenvalues) {
    const double d = std::abs(c.value - z);
    if (d <= best_distance) {
      best = &c;
      best_distance = d;
    }
  }
  return best;
}

bool SpectralReport::outside_unit_disk() const { return spectral_radius > 1.0 + unimodular_tol; }

bool SpectralReport::unimodular_semisimple() const {
  return std::all_of(eigenvalues.begin(), eigenvalues.end(),
                     [](const EigenCluster& c) { return !c.unimodular || c.semisimple; });
}

bool SpectralReport::unimodular_subset_of_one() const {
  const double radius = std::max(unimodular_tol, cluster_tol);
  return std::all_of(unimodular_set.begin(), unimodular_set.end(),
                     [&](Complex z) { return std::abs(z - 1.0) <= radius; });
}

SpectralReport eigen_decompose(const ComplexMatrix& op, const SpectralTolerances& tol) {
  const Eigen::MatrixXcd& m = op.matrix();
  const Index dim = op.dim();
  SpectralReport report;
  report.dim = dim;
  report.norm = operator_norm(m);
  report.unimodular_tol = tol.unimodular_per_dim * static_cast<double>(dim);
  report.cluster_tol = tol.cluster_rel * report.norm;

  // Triangular input carries its eigenvalues on the diagonal exactly; the
  // general solver would scatter a long Jordan chain over a circle.
  const bool triangular = is_triangular(m);
  Eigen::VectorXcd raw;
  if (triangular) {
    raw = m.diagonal();
  } else {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(m, false);
    if (solver.info() != Eigen::Success) throw Error("eigen_decompose: eigensolver did not converge");
    raw = solver.eigenvalues();
  }

  // Single-linkage clustering at cluster_tol.
  std::vector<Index> parent(static_cast<std::size_t>(dim));
  std::iota(parent.begin(), parent.end(), Index{0});
  auto root = [&](Index k) {
    while (parent[static_cast<std::size_t>(k)] != k) {
      parent[static_cast<std::size_t>(k)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(k)])];
      k = parent[static_cast<std::size_t>(k)];
    }
    return k;
  };
  for (Index a = 0; a < dim; ++a) {
    for (Index b = a + 1; b < dim; ++b) {
      if (std::abs(raw(a) - raw(b)) <= report.cluster_tol) {
        parent[static_cast<std::size_t>(root(b))] = root(a);
      }
    }
  }
  std::vector<Group> groups;
  {
    std::vector<Index> slot(static_cast<std::size_t>(dim), -1);
    for (Index k = 0; k < dim; ++k) {
      const Index r = root(k);
      if (slot[static_cast<std::size_t>(r)] < 0) {
        slot[static_cast<std::size_t>(r)] = static_cast<Index>(groups.size());
        groups.emplace_back();
      }
      groups[static_cast<std::size_t>(slot[static_cast<std::size_t>(r)])].members.push_back(k);
    }
  }

  auto verify = [&](Group& g) {
    g.centroid = centroid_of(g.members, raw);
    const auto size = static_cast<Index>(g.members.size());
    if (size == 1) {
      g.algebraic = g.geometric = g.pole_order = 1;
      g.verified = true;
      return;
    }
    const auto nu = nullity_profile(m, g.centroid, size, tol.rank_rel);
    g.geometric = nu.front();
    g.pole_order = static_cast<Index>(nu.size());
    if (nu.size() >= 2 && nu.back() == nu[nu.size() - 2]) g.pole_order -= 1;
    g.pole_order = std::clamp<Index>(g.pole_order, 1, dim);
    g.algebraic = nu[static_cast<std::size_t>(g.pole_order - 1)];
    g.verified = g.geometric >= 1 && g.algebraic == size;
  };
  for (auto& g : groups) verify(g);

  // Defective eigenvalues split under rounding by ~ (eps ||M||)^{1/m}; regroup
  // nearby clusters when the rank profile at the joint centroid confirms a
  // generalized eigenspace of exactly the joint size.
  const double eps = std::numeric_limits<double>::epsilon();
  auto merge_radius = [&](Index size) {
    return 10.0 * std::max(report.norm, std::numeric_limits<double>::min()) *
           std::pow(static_cast<double>(dim) * eps, 1.0 / static_cast<double>(size));
  };
  // Normal matrices have perfectly conditioned eigenvalues; nothing to regroup.
  const double normality_defect =
      (m.adjoint() * m - m * m.adjoint()).norm() /
      std::max(report.norm * report.norm, std::numeric_limits<double>::min());
  const bool may_split = !triangular && normality_defect > 1e-10;
  for (bool merged = may_split; merged && groups.size() > 1;) {
    merged = false;
    for (std::size_t seed = 0; seed < groups.size() && !merged; ++seed) {
      std::vector<std::size_t> order;
      for (std::size_t other = 0; other < groups.size(); ++other) {
        if (other != seed) order.push_back(other);
      }
      const Complex c0 = centroid_of(groups[seed].members, raw);
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(centroid_of(groups[a].members, raw) - c0) <
               std::abs(centroid_of(groups[b].members, raw) - c0);
      });
      Group candidate = groups[seed];
      std::vector<std::size_t> absorbed;
      std::optional<std::pair<Group, std::vector<std::size_t>>> best;
      for (std::size_t other : order) {
        candidate.members.insert(candidate.members.end(), groups[other].members.begin(),
                                 groups[other].members.end());
        absorbed.push_back(other);
        const auto size = static_cast<Index>(candidate.members.size());
        if (size > kMaxMergeGroup) break;
        const double diameter = diameter_of(candidate.members, raw);
        if (diameter > merge_radius(size)) {
          if (diameter > merge_radius(kMaxMergeGroup)) break;
          continue;
        }
        Group trial = candidate;
        verify(trial);
        if (trial.verified) best.emplace(trial, absorbed);
      }
      if (best) {
        groups[seed] = best->first;
        auto gone = best->second;
        std::sort(gone.rbegin(), gone.rend());
        for (std::size_t idx : gone) groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(idx));
        merged = true;
      }
    }
  }

  for (const auto& g : groups) {
    if (!g.verified) {
      report.flagged = true;
      report.flag_reason = "cluster at " + std::to_string(g.centroid.real()) + "+" +
                           std::to_string(g.centroid.imag()) +
                           "i: rank profile does not match its multiplicity";
    }
  }
  for (std::size_t a = 0; a < groups.size(); ++a) {
    for (std::size_t b = a + 1; b < groups.size(); ++b) {
      if (std::abs(groups[a].centroid - groups[b].centroid) < 2.0 * report.cluster_tol) {
        report.flagged = true;
        report.flag_reason = "two eigenvalue clusters closer than twice the cluster radius";
      }
    }
  }

  std::sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) {
    if (a.centroid.real() != b.centroid.real()) return a.centroid.real() < b.centroid.real();
    return a.centroid.imag() < b.centroid.imag();
  });
  for (const auto& g : groups) {
    EigenCluster c;
    c.value = g.centroid;
    c.algebraic = static_cast<Index>(g.members.size());
    c.geometric = std::min(g.geometric, c.algebraic);
    c.pole_order = g.verified ? g.pole_order : std::max<Index>(g.pole_order, 1);
    c.semisimple = c.pole_order == 1 && c.geometric == c.algebraic;
    if (!c.semisimple && c.pole_order == 1) c.pole_order = 2;
    c.unimodular = std::abs(std::abs(c.value) - 1.0) < report.unimodular_tol;
    report.spectral_radius = std::max(report.spectral_radius, std::abs(c.value));
    if (c.unimodular) report.unimodular_set.push_back(c.value);
    report.eigenvalues.push_back(c);
  }
  return report;
}

std::optional<ComplexMatrix> spectral_projection(const ComplexMatrix& op, Complex lambda,
                                                 const SpectralTolerances& tol) {
  const Index dim = op.dim();
  const Eigen::MatrixXcd a = lambda * Eigen::MatrixXcd::Identity(dim, dim) - op.matrix();
  const double scale = std::max({operator_norm(op.matrix()), std::abs(lambda),
                                 std::numeric_limits<double>::min()});
  const double threshold = static_cast<double>(dim) * scale * tol.rank_rel;

  Eigen::BDCSVD<Eigen::MatrixXcd> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd& s = svd.singularValues();
  Index rank = 0;
  for (Index k = 0; k < s.size(); ++k) {
    if (s(k) > threshold) ++rank;
  }
  if (rank == dim) return ComplexMatrix::zero(dim);
  // Semisimple iff rank(A^2) = rank(A).
  const Index rank2 = numerical_rank(a * a, static_cast<double>(dim) * scale * scale * tol.rank_rel);
  if (rank2 != rank) return std::nullopt;

  const Index nullity = dim - rank;
  Eigen::MatrixXcd basis(dim, dim);
  basis.leftCols(nullity) = svd.matrixV().rightCols(nullity);
  basis.rightCols(rank) = svd.matrixU().leftCols(rank);
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(basis);
  if (!lu.isInvertible()) return std::nullopt;
  const Eigen::MatrixXcd inverse = lu.inverse();
  Eigen::MatrixXcd projection = basis.leftCols(nullity) * inverse.topRows(nullity);
  return ComplexMatrix(std::move(projection));
}

UnimodularDecomposition decompose_unimodular(const ComplexMatrix& op,
                                             const SpectralTolerances& tol) {
  const auto report = eigen_decompose(op, tol);
  if (report.flagged) throw PreconditionFailed("decompose_unimodular: " + report.flag_reason);
  if (report.outside_unit_disk() || !report.unimodular_semisimple()) {
    throw PreconditionFailed("decompose_unimodular: operator is not rotationally uniformly ergodic");
  }
  const Index dim = op.dim();
  UnimodularDecomposition out;
  Eigen::MatrixXcd product = Eigen::MatrixXcd::Identity(dim, dim);
  Index projected_rank = 0;
  // Rank threshold relative to the product of factor norms: the product itself
  // may be pure rounding noise (T = cyclic shift gives exactly zero).
  double factor_scale = 1.0;
  for (Complex lambda : report.unimodular_set) {
    auto e = spectral_projection(op, lambda, tol);
    if (!e) throw PreconditionFailed("decompose_unimodular: unimodular eigenvalue is not semisimple");
    const Index rank = static_cast<Index>(std::lround(e->matrix().trace().real()));
    projected_rank += rank;
    out.components.push_back(UnimodularComponent{lambda, std::move(*e)});
    const Eigen::MatrixXcd factor = lambda * Eigen::MatrixXcd::Identity(dim, dim) - op.matrix();
    factor_scale *= std::max(1.0, operator_norm(factor));
    product = product * factor;
  }
  for (std::size_t j = 0; j < out.components.size(); ++j) {
    const auto& ej = out.components[j].projection.matrix();
    out.idempotence_error = std::max(out.idempotence_error, operator_norm(Eigen::MatrixXcd(ej * ej - ej)));
    for (std::size_t l = 0; l < out.components.size(); ++l) {
      if (l == j) continue;
      const auto& el = out.components[l].projection.matrix();
      out.orthogonality_error = std::max(out.orthogonality_error, operator_norm(Eigen::MatrixXcd(ej * el)));
    }
  }
  const double scale = std::max(operator_norm(product), factor_scale);
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(product, Eigen::ComputeFullU);
  const double threshold = static_cast<double>(dim) * scale * tol.rank_rel;
  Index rank = 0;
  for (Index k = 0; k < svd.singularValues().size(); ++k) {
    if (svd.singularValues()(k) > threshold) ++rank;
  }
  out.complement_basis = svd.matrixU().leftCols(rank);
  out.rank_count_ok = projected_rank + rank == dim;
  return out;
}

std::vector<Complex> default_profile_grid(const SpectralReport& report, Index grid_points) {
  std::vector<Complex> grid;
  for (Index k = 0; k < grid_points; ++k) {
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(k) /
                         static_cast<double>(grid_points);
    grid.push_back(std::polar(1.0, theta));
  }
  for (Complex lambda : report.unimodular_set) grid.push_back(std::conj(lambda / std::abs(lambda)));
  return grid;
}

RotatedProfile rotated_series_profile(const ComplexMatrix& op, const VectorC& x,
                                      const ProfileOptions& options) {
  const auto report = eigen_decompose(op);
  return rotated_series_profile(op, x, default_profile_grid(report, options.grid_points), options);
}

RotatedProfile rotated_series_profile(const ComplexMatrix& op, const VectorC& x,
                                      const std::vector<Complex>& grid,
                                      const ProfileOptions& options) {
  if (op.dim() != x.dim()) throw InvalidArgument("rotated_series_profile: dimension mismatch");
  const auto report = eigen_decompose(op);
  const Index dim = op.dim();
  const double radius = std::max({report.unimodular_tol, report.cluster_tol, 1e-12});

  RotatedProfile profile;
  // x in the range of every lambda_j I - T, by least-squares residual.
  profile.range_member = true;
  for (Complex lambda : report.unimodular_set) {
    const Eigen::MatrixXcd a = lambda * Eigen::MatrixXcd::Identity(dim, dim) - op.matrix();
    const Eigen::VectorXcd y = a.completeOrthogonalDecomposition().solve(x.vector());
    if ((a * y - x.vector()).norm() > 1e-8 * std::max(1.0, x.norm())) profile.range_member = false;
  }

  // ||T^n|| / n -> 0 in finite dimension: no spectrum outside the disk and
  // semisimple peripheral spectrum.
  const bool powers_over_n = !report.flagged && !report.outside_unit_disk() &&
                             report.unimodular_semisimple();

  for (Complex lambda : grid) {
    if (std::abs(std::abs(lambda) - 1.0) > 1e-12) {
      throw InvalidArgument("rotated_series_profile: grid point off the unit circle");
    }
    const auto trace = eht_partial(op, lambda, x, options.eht);
    ProfilePoint point;
    point.lambda = lambda;
    point.verdict = trace.verdict;
    point.sup_partial_norm = trace.sup_partial_norm;
    point.conjugate_in_spectrum = std::any_of(
        report.unimodular_set.begin(), report.unimodular_set.end(),
        [&](Complex mu) { return std::abs(std::conj(lambda) - mu) <= radius; });
    profile.points.push_back(point);

    const bool must_converge =
        powers_over_n && (!point.conjugate_in_spectrum || profile.range_member);
    if (must_converge && point.verdict != EhtVerdict::Converged) {
      profile.violations.push_back("lambda = " + std::to_string(lambda.real()) + "+" +
                                   std::to_string(lambda.imag()) + "i: expected convergence, got " +
                                   to_string(point.verdict));
    }
  }
  return profile;
}

}  // namespace ergolab
