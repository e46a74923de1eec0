#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ergolab/cesaro.hpp"
#include "ergolab/hilbert.hpp"
#include "ergolab/sampling.hpp"
#include "ergolab/spectral.hpp"
#include "helpers.hpp"

using namespace ergolab;
using namespace ergolab::testing;

namespace {

VectorC random_vector(Index dim, Rng& rng) {
  std::normal_distribution<double> g;
  Eigen::VectorXcd v(dim);
  for (Index k = 0; k < dim; ++k) v(k) = Complex(g(rng), g(rng));
  return VectorC(v / v.norm());
}

std::vector<ComplexMatrix> catalog() {
  Eigen::MatrixXd p(3, 3);
  p << 0.5, 0.5, 0.0, 0.0, 0.5, 0.5, 0.5, 0.0, 0.5;
  return {
      build({spec::CyclicShift{5}}),
      build({spec::Permutation{{1, 0, 3, 4, 2}}}),
      build({spec::DiagonalUnitary{{0.0, 1.0, 2.5}}}),
      build({spec::JordanBlock{1.0, 2}}),
      build({spec::JordanBlock{Complex(0, 1), 3}}),
      build({spec::JordanBlock{0.5, 3}}),
      build({spec::IMinusVolterra{16}}),
      build({spec::VolterraDiscretization{6}}),
      build({spec::WeightedShift{{1.0, 2.0, 0.5}}}),
      build({spec::Stochastic{p}}),
      build(OperatorSpec::scaled(Complex(0, 1), {spec::CyclicShift{3}})),
      build({spec::BlockDiag{{OperatorSpec{spec::CyclicShift{2}}, OperatorSpec{spec::JordanBlock{-1.0, 2}}}}}),
      diag({0.5, 1.0, Complex(0, 1)}),
  };
}

bool decided(const Predicate& p) { return p.value.has_value(); }

}  // namespace

TEST_CASE("eigen decomposition examples") {
  const auto jordan = eigen_decompose(build({spec::JordanBlock{1.0, 2}}));
  REQUIRE(jordan.eigenvalues.size() == 1);
  const auto& j = jordan.eigenvalues.front();
  CHECK(std::abs(j.value - 1.0) < 1e-12);
  CHECK(j.algebraic == 2);
  CHECK(j.geometric == 1);
  CHECK(j.pole_order == 2);
  CHECK_FALSE(j.semisimple);
  CHECK_FALSE(jordan.flagged);

  const auto d = eigen_decompose(diag({1.0, Complex(0, 1), -1.0}));
  CHECK(d.unimodular_set.size() == 3);
  for (const auto& c : d.eigenvalues) {
    CHECK(c.semisimple);
    CHECK(c.unimodular);
  }

  const auto cyc = eigen_decompose(build({spec::CyclicShift{4}}));
  REQUIRE(cyc.eigenvalues.size() == 4);
  for (Complex z : {Complex(1, 0), Complex(0, 1), Complex(-1, 0), Complex(0, -1)}) {
    const auto* c = cyc.find(z);
    REQUIRE(c);
    CHECK(c->semisimple);
    CHECK(c->pole_order == 1);
  }
}

TEST_CASE("volterra discretization eigenvalues sit on the diagonal") {
  const auto report = eigen_decompose(build({spec::IMinusVolterra{16}}));
  REQUIRE(report.eigenvalues.size() == 1);
  CHECK(std::abs(report.eigenvalues.front().value - (1.0 - 1.0 / 32.0)) < 1e-12);
  CHECK(report.eigenvalues.front().algebraic == 16);
  CHECK(report.unimodular_set.empty());
}

TEST_CASE("spectral report invariants on sampled operators") {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto sampled = sample_operator(rng);
    const auto report = eigen_decompose(sampled.op);
    if (report.flagged) continue;
    Index total = 0;
    double radius = 0.0;
    for (const auto& c : report.eigenvalues) {
      total += c.algebraic;
      CHECK(c.geometric <= c.algebraic);
      CHECK(c.geometric >= 1);
      CHECK(c.semisimple == (c.pole_order == 1));
      CHECK(c.semisimple == (c.geometric == c.algebraic));
      radius = std::max(radius, std::abs(c.value));
    }
    CHECK(total == sampled.op.dim());
    CHECK(std::abs(radius - report.spectral_radius) < 1e-8);
    // Sampled Jordan structure is recovered on the circle.
    for (const auto& piece : sampled.pieces) {
      if (std::abs(std::abs(piece.lambda) - 1.0) > 1e-12) continue;
      const auto* c = report.find(piece.lambda);
      REQUIRE(c);
      CHECK(c->unimodular);
      CHECK(c->pole_order >= piece.size);
    }
  }
}

TEST_CASE("spectral projection") {
  const auto p = spectral_projection(diag({1.0, 0.5}), 1.0);
  REQUIRE(p);
  CHECK(p->approx_equal(diag({1.0, 0.0}), 1e-12));
  const auto none = spectral_projection(diag({1.0, 0.5}), -1.0);
  REQUIRE(none);
  CHECK(none->approx_equal(ComplexMatrix::zero(2), 0.0));
  CHECK_FALSE(spectral_projection(build({spec::JordanBlock{1.0, 2}}), 1.0));
  CHECK(numerical_rank(Eigen::MatrixXcd::Identity(3, 3), 1e-12) == 3);
}

TEST_CASE("classifier examples") {
  const auto half = classify(diag({0.5}));
  for (const auto* p : {&half.norm_powers_vanish, &half.power_bounded, &half.cesaro_bounded,
                        &half.powers_over_n_vanish, &half.uniformly_ergodic, &half.rotationally_ue,
                        &half.powers_converge, &half.kt_condition, &half.kalton_pass}) {
    REQUIRE(p->value);
    CHECK(*p->value);
    CHECK(p->trace);
  }
  CHECK_FALSE(half.discordant());

  const auto jordan = classify(build({spec::JordanBlock{1.0, 2}}));
  CHECK(jordan.uniformly_ergodic.value == std::optional<bool>(false));
  CHECK(jordan.powers_over_n_vanish.value == std::optional<bool>(false));
  CHECK_FALSE(jordan.uniformly_ergodic.trace);
  CHECK_FALSE(jordan.discordant());

  const auto cyc = classify(build({spec::CyclicShift{3}}));
  CHECK(cyc.uniformly_ergodic.value == std::optional<bool>(true));
  CHECK(cyc.rotationally_ue.value == std::optional<bool>(true));
  CHECK(cyc.powers_converge.value == std::optional<bool>(false));
  CHECK(cyc.uniformly_ergodic.trace);
  CHECK_FALSE(cyc.powers_converge.trace);
  CHECK_FALSE(cyc.discordant());
  CHECK(cyc.evidence.n_max == 4096);
}

TEST_CASE("verdict implications hold on the catalog") {
  for (const auto& t : catalog()) {
    const auto v = classify(t, {1024});
    REQUIRE(decided(v.powers_converge));
    if (*v.powers_converge.value) CHECK(*v.uniformly_ergodic.value);
    if (*v.uniformly_ergodic.value) CHECK(*v.powers_over_n_vanish.value);
    CHECK(*v.uniformly_ergodic.value == *v.powers_over_n_vanish.value);
    CHECK(*v.rotationally_ue.value ==
          (!v.spectrum.outside_unit_disk() && v.spectrum.unimodular_semisimple()));
  }
}

TEST_CASE("finite-dimensional collapse of the three notions") {
  // I - V on 16 points decays like 0.97^n n^15, so 1024 steps are too few
  // for the trace evidence; the default horizon resolves it.
  for (const auto& t : catalog()) {
    const auto v = classify(t);
    CAPTURE(t.dim());
    CHECK(v.uniformly_ergodic.value == v.rotationally_ue.value);
    CHECK(v.rotationally_ue.value == v.power_bounded.value);
    CHECK_FALSE(v.discordant());
  }
}

TEST_CASE("one-point chain on sampled operators") {
  Rng rng(2);
  int decided_count = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto t = sample_operator(rng).op;
    const auto v = classify(t, {256});
    if (v.spectrum.flagged) continue;
    ++decided_count;
    const bool chain = *v.uniformly_ergodic.value && v.spectrum.unimodular_subset_of_one();
    CHECK(*v.powers_converge.value == chain);
  }
  CHECK(decided_count >= 190);
}

TEST_CASE("all-circle chain") {
  Rng rng(3);
  SamplerOptions options;
  options.max_dim = 6;
  ProfileOptions profile;
  profile.grid_points = 16;
  profile.eht = {20000, 50, 1e-3};
  int vanishing = 0;
  for (int trial = 0; trial < 12; ++trial) {
    const auto t = sample_operator(rng, options).op;
    const auto v = classify(t, {1024});
    REQUIRE_FALSE(v.spectrum.flagged);
    const bool spectral = !v.spectrum.outside_unit_disk() && v.spectrum.unimodular_set.empty();
    CHECK(*v.norm_powers_vanish.value == spectral);
    const auto grid = default_profile_grid(v.spectrum, profile.grid_points);
    bool all_converged = true;
    for (int k = 0; k < 5; ++k) {
      const auto p = rotated_series_profile(t, random_vector(t.dim(), rng), grid, profile);
      CHECK(p.consistent());
      for (const auto& point : p.points) all_converged &= point.verdict == EhtVerdict::Converged;
    }
    CHECK(all_converged == spectral);
    vanishing += spectral ? 1 : 0;
  }
  CHECK(vanishing > 0);
  CHECK(vanishing < 12);
}

TEST_CASE("vanishing means iff powers over n vanish and every basis vector is in the domain") {
  Rng rng(4);
  SamplerOptions options;
  options.max_dim = 6;
  options.interior_radius = 0.5;
  const EhtParams params{100000, 50, 1e-3};
  int vanishing = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto t = sample_operator(rng, options).op;
    const auto v = classify(t, {4096});
    REQUIRE_FALSE(v.spectrum.flagged);
    MeanTraceOptions means;
    means.n_max = 4096;
    const auto trace = cesaro_trace(t, means);
    double earlier = 0.0;
    for (std::size_t k = 1024; k < 2048; ++k) earlier = std::max(earlier, trace.value[k]);
    const bool means_vanish = trace.value.back() <= 0.75 * earlier;
    bool all_members = true;
    for (Index k = 0; k < t.dim(); ++k) {
      all_members &= domain_membership(t, VectorC::basis(t.dim(), k), params).trace.verdict ==
                     EhtVerdict::Converged;
    }
    CAPTURE(trial);
    CHECK(means_vanish == (*v.powers_over_n_vanish.value && all_members));
    vanishing += means_vanish ? 1 : 0;
  }
  CHECK(vanishing > 0);
}

TEST_CASE("powers of rotationally uniformly ergodic operators stay so") {
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const auto t = sample_operator(rng).op;
    const auto v = classify(t, {256});
    if (v.spectrum.flagged || !*v.rotationally_ue.value) continue;
    const auto t2 = t * t;
    const auto t3 = t2 * t;
    for (const auto& p : {t2, t3}) {
      const auto w = classify(p, {256});
      if (w.spectrum.flagged) continue;
      CHECK(*w.rotationally_ue.value);
    }
  }
}

TEST_CASE("growth criteria with domain convergence imply uniform ergodicity") {
  Rng rng(6);
  SamplerOptions options;
  options.max_dim = 6;
  options.interior_radius = 0.5;
  const EhtParams params{20000, 50, 1e-3};
  const Index horizon = 2048;
  int accepted = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto t = sample_operator(rng, options).op;
    const Eigen::MatrixXcd gap = Eigen::MatrixXcd::Identity(t.dim(), t.dim()) - t.matrix();
    const auto trace = power_trace(t, horizon);
    // ||T^n|| (log n)^2 / n and ||T^n (I - T)|| (log n)^2 must not grow from N/2 to N.
    auto growth = [&](Index n) {
      return trace.at(n) * std::pow(std::log(static_cast<double>(n)), 2) / static_cast<double>(n);
    };
    Eigen::MatrixXcd half_power = Eigen::MatrixXcd::Identity(t.dim(), t.dim());
    for (Index k = 0; k < horizon / 2; ++k) half_power = half_power * t.matrix();
    const Eigen::MatrixXcd full_power = half_power * half_power;
    auto kt = [&](const Eigen::MatrixXcd& p, Index n) {
      return operator_norm(Eigen::MatrixXcd(p * gap)) * std::pow(std::log(static_cast<double>(n)), 2);
    };
    if (growth(horizon) > growth(horizon / 2) * 1.01) continue;
    if (kt(full_power, horizon) > kt(half_power, horizon / 2) * 1.01 + 1e-12) continue;
    bool members = true;
    for (Index k = 0; k < t.dim(); ++k) {
      members &= domain_membership(t, VectorC(gap.col(k)), params).trace.verdict == EhtVerdict::Converged;
    }
    if (!members) continue;
    ++accepted;
    CHECK(*classify(t, {1024}).uniformly_ergodic.value);
  }
  CHECK(accepted > 0);
}

TEST_CASE("kalton test examples") {
  const auto half = kalton_test(diag({0.5}), 1000);
  CHECK(half.pass);
  CHECK(half.limsup_estimate < 1e-100);
  const auto id = kalton_test(ComplexMatrix::identity(2), 1000);
  CHECK(id.pass);
  CHECK(id.limsup_estimate == 0.0);
  const auto flip = kalton_test(diag({-1.0}), 1000);
  CHECK_FALSE(flip.pass);
  CHECK(flip.limsup_estimate == doctest::Approx(2000.0).epsilon(1e-12));
  CHECK_THROWS_AS(kalton_test(diag({0.5}), 50), InvalidArgument);
}

TEST_CASE("kalton pass implies converging powers") {
  Rng rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const auto t = sample_operator(rng).op;
    const auto k = kalton_test(t, 1024);
    if (!k.pass) continue;
    const auto v = classify(t, {1024});
    CHECK(v.powers_converge.trace);
    if (!v.spectrum.flagged) CHECK(*v.powers_converge.value);
  }
}

TEST_CASE("Katznelson-Tzafriri examples") {
  const auto volterra = kt_check(build({spec::IMinusVolterra{16}}), 4096);
  CHECK(volterra.value);
  CHECK(volterra.spectral);
  CHECK_FALSE(volterra.discordant);
  const auto d = kt_check(diag({1.0, 0.5}), 1024);
  CHECK(d.value);
  CHECK(d.spectral);
  const auto rot = kt_check(diag({Complex(0, 1)}), 1024);
  CHECK_FALSE(rot.value);
  CHECK_FALSE(rot.spectral);
  CHECK_FALSE(rot.discordant);
  CHECK_THROWS_AS(kt_check(build({spec::JordanBlock{1.0, 2}}), 1024), PreconditionFailed);
}

TEST_CASE("unimodular decomposition examples") {
  const auto two = decompose_unimodular(build({spec::CyclicShift{2}}));
  REQUIRE(two.components.size() == 2);
  for (const auto& c : two.components) {
    const double s = c.lambda.real() > 0 ? 1.0 : -1.0;
    CHECK(c.projection.approx_equal(dense({{0.5, 0.5 * s}, {0.5 * s, 0.5}}), 1e-12));
  }
  CHECK(two.complement_basis.cols() == 0);
  CHECK(two.rank_count_ok);
  CHECK(two.idempotence_error < 1e-9);
  CHECK(two.orthogonality_error < 1e-9);

  const auto id = decompose_unimodular(ComplexMatrix::identity(3));
  REQUIRE(id.components.size() == 1);
  CHECK(id.components.front().projection.approx_equal(ComplexMatrix::identity(3), 1e-12));
  CHECK(id.complement_basis.cols() == 0);

  const auto d = decompose_unimodular(diag({1.0, Complex(0, 1), 0.5}));
  REQUIRE(d.components.size() == 2);
  for (const auto& c : d.components) {
    if (std::abs(c.lambda - 1.0) < 1e-12) CHECK(c.projection.approx_equal(diag({1.0, 0.0, 0.0}), 1e-12));
    else CHECK(c.projection.approx_equal(diag({0.0, 1.0, 0.0}), 1e-12));
  }
  REQUIRE(d.complement_basis.cols() == 1);
  CHECK(std::abs(std::abs(d.complement_basis(2, 0)) - 1.0) < 1e-12);
  CHECK(d.rank_count_ok);

  CHECK_THROWS_AS(decompose_unimodular(build({spec::JordanBlock{-1.0, 2}})), PreconditionFailed);
}

TEST_CASE("unimodular decomposition on sampled operators") {
  Rng rng(8);
  for (int trial = 0; trial < 40; ++trial) {
    const auto t = sample_operator(rng).op;
    const auto v = classify(t, {256});
    if (v.spectrum.flagged || !*v.rotationally_ue.value) continue;
    const auto d = decompose_unimodular(t);
    CHECK(d.idempotence_error < 1e-9);
    CHECK(d.orthogonality_error < 1e-9);
    CHECK(d.rank_count_ok);
    CHECK(d.components.size() == v.spectrum.unimodular_set.size());
  }
}

TEST_CASE("rotated profile examples") {
  ProfileOptions options;
  const auto half = rotated_series_profile(diag({0.5}), vec({1.0}), options);
  CHECK(half.points.size() == 64);
  for (const auto& p : half.points) CHECK(p.verdict == EhtVerdict::Converged);
  CHECK(half.consistent());

  const auto cyc = build({spec::CyclicShift{2}});
  const auto e0 = rotated_series_profile(cyc, vec({1.0, 0.0}), options);
  CHECK(e0.points.size() == 66);
  for (const auto& p : e0.points) {
    const bool special = std::abs(p.lambda - 1.0) < 1e-9 || std::abs(p.lambda + 1.0) < 1e-9;
    CAPTURE(p.lambda);
    CHECK((p.verdict == EhtVerdict::Diverging) == special);
    if (!special) CHECK(p.verdict == EhtVerdict::Converged);
  }
  CHECK(e0.consistent());

  const auto flip = rotated_series_profile(cyc, vec({1.0, -1.0}), options);
  for (const auto& p : flip.points) {
    const bool minus_one = std::abs(p.lambda + 1.0) < 1e-9;
    CHECK((p.verdict == EhtVerdict::Diverging) == minus_one);
  }
  CHECK(flip.consistent());
}

TEST_CASE("profile grid appends conjugates of the unimodular spectrum") {
  const auto report = eigen_decompose(diag({Complex(0, 1), 0.5}));
  const auto grid = default_profile_grid(report, 8);
  REQUIRE(grid.size() == 9);
  CHECK(std::abs(grid.back() - Complex(0, -1)) < 1e-12);
  for (const auto& z : grid) CHECK(std::abs(std::abs(z) - 1.0) < 1e-12);
}
