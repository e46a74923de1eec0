#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "ergolab/operator.hpp"
#include "ergolab/operator_json.hpp"
#include "ergolab/sampling.hpp"
#include "ergolab/spectral.hpp"
#include "helpers.hpp"

using namespace ergolab;
using namespace ergolab::testing;

TEST_CASE("cyclic shift of size 2 swaps the basis vectors") {
  const auto m = build({spec::CyclicShift{2}});
  CHECK(m.approx_equal(dense({{0, 1}, {1, 0}}), 0.0));
}

TEST_CASE("cyclic shift maps e_k to e_{k+1 mod d}") {
  const auto m = build({spec::CyclicShift{4}});
  for (Index k = 0; k < 4; ++k) {
    const auto image = apply(m, VectorC::basis(4, k));
    CHECK(image.vector().isApprox(VectorC::basis(4, (k + 1) % 4).vector()));
  }
}

TEST_CASE("jordan block is lambda on the diagonal with ones above") {
  CHECK(build({spec::JordanBlock{1.0, 2}}).approx_equal(dense({{1, 1}, {0, 1}}), 0.0));
  const auto j = build({spec::JordanBlock{Complex(0.5, 0.5), 3}});
  CHECK(j(0, 0) == Complex(0.5, 0.5));
  CHECK(j(1, 2) == Complex(1.0, 0.0));
  CHECK(j(2, 1) == Complex(0.0, 0.0));
}

TEST_CASE("i minus volterra has eigenvalues near one inside the disk") {
  const auto t = build({spec::IMinusVolterra{4}});
  const auto report = eigen_decompose(t);
  for (const auto& c : report.eigenvalues) {
    CHECK(std::abs(c.value - 1.0) < 0.2);
    CHECK(std::abs(c.value) < 1.0);
    CHECK(std::abs(c.value - 0.875) < 1e-12);
  }
  CHECK(report.eigenvalues.size() == 1);
  CHECK(report.eigenvalues.front().algebraic == 4);
}

TEST_CASE("volterra discretization uses trapezoid weights") {
  const auto v = build({spec::VolterraDiscretization{4}});
  CHECK(v(0, 0) == Complex(0.125));
  CHECK(v(3, 1) == Complex(0.25));
  CHECK(v(1, 3) == Complex(0.0));
}

TEST_CASE("diagonal unitary, permutation, block diag and weighted shift build") {
  const auto d = build({spec::DiagonalUnitary{{0.0, std::numbers::pi / 2}}});
  CHECK(std::abs(d(1, 1) - Complex(0, 1)) < 1e-15);
  const auto p = build({spec::Permutation{{2, 0, 1}}});
  CHECK(p(2, 0) == Complex(1.0));
  CHECK(p(0, 1) == Complex(1.0));
  OperatorSpec blocks{spec::BlockDiag{{OperatorSpec{spec::JordanBlock{1.0, 2}},
                                       OperatorSpec{spec::CyclicShift{2}}}}};
  const auto b = build(blocks);
  CHECK(b.dim() == 4);
  CHECK(b(2, 3) == Complex(1.0));
  CHECK(b(0, 2) == Complex(0.0));
  const auto w = build({spec::WeightedShift{{2.0, 3.0}}});
  CHECK(w.dim() == 3);
  CHECK(w(1, 0) == Complex(2.0));
  CHECK(w(2, 1) == Complex(3.0));
}

TEST_CASE("catalog invariants are enforced") {
  CHECK_THROWS_AS(build({spec::Permutation{{0, 0}}}), InvalidArgument);
  Eigen::MatrixXd bad(2, 2);
  bad << 0.5, 0.4, 0.0, 1.0;
  CHECK_THROWS_AS(build({spec::Stochastic{bad}}), InvalidArgument);
  bad << 1.5, -0.5, 0.0, 1.0;
  CHECK_THROWS_AS(build({spec::Stochastic{bad}}), InvalidArgument);
  CHECK_THROWS_AS(build(OperatorSpec::scaled(Complex(0.5, 0.0), {spec::CyclicShift{2}})),
                  InvalidArgument);
  CHECK_THROWS_AS(build({spec::CyclicShift{0}}), InvalidArgument);
  CHECK_THROWS_AS(build({spec::CyclicShift{kMaxDimension + 1}}), InvalidArgument);
  Eigen::MatrixXcd nan = Eigen::MatrixXcd::Identity(2, 2);
  nan(0, 1) = Complex(std::nan(""), 0.0);
  CHECK_THROWS_AS(ComplexMatrix{nan}, InvalidArgument);
  CHECK_THROWS_AS(ComplexMatrix{Eigen::MatrixXcd(2, 3)}, InvalidArgument);
}

TEST_CASE("scaled build equals lambda times the inner build exactly") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const double theta = std::uniform_real_distribution<double>(-3.0, 3.0)(rng);
    const Complex lambda = std::polar(1.0, theta);
    const auto inner = random_dense(5, 1.0, rng);
    const OperatorSpec s = OperatorSpec::scaled(lambda, {spec::Dense{inner.matrix()}});
    const auto built = build(s);
    for (Index j = 0; j < 5; ++j) {
      for (Index i = 0; i < 5; ++i) CHECK(built(i, j) == lambda * inner(i, j));
    }
  }
}

TEST_CASE("operator norm examples") {
  CHECK(operator_norm(ComplexMatrix::identity(5)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(operator_norm(diag({Complex(0, 2)})) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(operator_norm(dense({{0, 1}, {0, 0}})) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(operator_norm(ComplexMatrix::zero(3)) == 0.0);
}

TEST_CASE("operator norm agrees with a full SVD to 1e-10") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_dense(8, 3.0, rng);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m.matrix());
    CHECK(std::abs(operator_norm(m) - svd.singularValues()(0)) <= 1e-10 * svd.singularValues()(0));
  }
}

TEST_CASE("operator norm is submultiplicative") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_dense(8, 1.0, rng);
    const auto b = random_dense(8, 1.0, rng);
    CHECK(operator_norm(a * b) <= operator_norm(a) * operator_norm(b) * (1 + 1e-9));
  }
}

TEST_CASE("isometries have norm one") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> angles(9);
    for (auto& a : angles) a = std::uniform_real_distribution<double>(0, 6.28)(rng);
    CHECK(std::abs(operator_norm(build({spec::DiagonalUnitary{angles}})) - 1.0) < 1e-10);
    std::vector<Index> sigma(9);
    std::iota(sigma.begin(), sigma.end(), Index{0});
    std::shuffle(sigma.begin(), sigma.end(), rng);
    CHECK(std::abs(operator_norm(build({spec::Permutation{sigma}})) - 1.0) < 1e-10);
  }
}

TEST_CASE("power trace examples") {
  const auto id = power_trace(ComplexMatrix::identity(3), 50);
  for (double v : id.norms) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

  const auto j = power_trace(build({spec::JordanBlock{1.0, 2}}), 400);
  CHECK(j.at(400) / 400.0 == doctest::Approx(1.0).epsilon(0.01));
  for (Index n = 1; n <= 200; ++n) {
    Eigen::Matrix2cd p;
    p << 1.0, static_cast<double>(n), 0.0, 1.0;
    Eigen::JacobiSVD<Eigen::Matrix2cd> svd(p);
    CHECK(j.at(n) == doctest::Approx(svd.singularValues()(0)).epsilon(1e-10));
  }

  const auto half = power_trace(diag({0.5}), 40);
  for (Index n = 1; n <= 40; ++n) CHECK(half.at(n) == doctest::Approx(std::pow(0.5, n)).epsilon(1e-12));
}

TEST_CASE("power trace of a permutation is constantly one") {
  const auto t = power_trace(build({spec::Permutation{{3, 0, 4, 1, 2}}}), 100);
  for (double v : t.norms) CHECK(std::abs(v - 1.0) < 1e-10);
}

TEST_CASE("power trace truncates on overflow") {
  const auto t = power_trace(diag({10.0}), 1000);
  CHECK(t.truncated);
  // 10^300 lands within rounding of the threshold.
  CHECK(t.size() >= 299);
  CHECK(t.size() <= 300);
  for (double v : t.norms) CHECK(v <= kNormOverflow);
}

TEST_CASE("power trace is submultiplicative at recorded pairs") {
  Rng rng(17);
  const auto t = power_trace(random_dense(6, 0.6, rng), 40);
  for (Index m = 1; m <= 20; ++m) {
    for (Index n = 1; n <= 20; ++n) CHECK(t.at(m + n) <= t.at(m) * t.at(n) * (1 + 1e-9));
  }
}

TEST_CASE("geometric decay fit") {
  const auto a = fit_geometric_decay(power_trace(diag({0.5}), 50));
  REQUIRE(a);
  CHECK(std::abs(a->rate - 0.5) < 1e-6);
  CHECK_FALSE(fit_geometric_decay(power_trace(ComplexMatrix::identity(2), 50)));
  const auto trace = power_trace(diag({0.9, 0.5}), 200);
  const auto b = fit_geometric_decay(trace);
  REQUIRE(b);
  CHECK(std::abs(b->rate - 0.9) < 1e-3);
  for (Index n = 1; n <= trace.size(); ++n) CHECK(trace.at(n) <= b->bound(n));
}

TEST_CASE("geometric decay bound covers every recorded n for sampled operators") {
  Rng rng(23);
  SamplerOptions options;
  options.unimodular = false;
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = sample_operator(rng, options);
    const auto trace = power_trace(s.op, 300);
    const auto fit = fit_geometric_decay(trace);
    if (!fit) continue;
    CHECK(fit->rate < 1.0);
    for (Index n = 1; n <= trace.size(); ++n) CHECK(trace.at(n) <= fit->bound(n));
  }
}

TEST_CASE("nilpotent traces fit and zero norms are floored") {
  const auto trace = power_trace(dense({{0, 1}, {0, 0}}), 20);
  const auto fit = fit_geometric_decay(trace);
  REQUIRE(fit);
  for (Index n = 1; n <= trace.size(); ++n) CHECK(trace.at(n) <= fit->bound(n));
  CHECK(power_trace(build({spec::JordanBlock{0.0, 3}}), 5).at(3) == 0.0);
}

TEST_CASE("operator specs round-trip through JSON") {
  Eigen::MatrixXd p(2, 2);
  p << 0.25, 0.75, 1.0, 0.0;
  const std::vector<OperatorSpec> specs = {
      {spec::CyclicShift{3}},
      {spec::JordanBlock{Complex(0.5, -0.25), 3}},
      {spec::DiagonalUnitary{{0.1, 0.2}}},
      {spec::Permutation{{1, 2, 0}}},
      {spec::IMinusVolterra{5}},
      {spec::WeightedShift{{Complex(1, 1), 2.0}}},
      {spec::Stochastic{p}},
      OperatorSpec::scaled(Complex(0, 1), {spec::CyclicShift{2}}),
      {spec::BlockDiag{{OperatorSpec{spec::CyclicShift{2}}, OperatorSpec{spec::VolterraDiscretization{3}}}}},
  };
  for (const auto& s : specs) {
    const auto j = spec_to_json(s);
    const auto back = spec_from_json(j);
    CHECK(spec_to_json(back) == j);
    CHECK(build(back).approx_equal(build(s), 0.0));
  }
}

TEST_CASE("operator document parsing reports the field path") {
  const auto doc = nlohmann::json::parse(
      R"({"kind": "block_diag", "blocks": [{"kind": "cyclic_shift", "dim": 2}, {"kind": "jordan", "lambda": [1, 0]}]})");
  try {
    spec_from_json(doc);
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.path() == "operator.blocks[1].size");
  }
  CHECK_THROWS_AS(spec_from_json(nlohmann::json::parse(R"({"kind": "nope"})")), ConfigError);
}

TEST_CASE("golden angles and Koopman maps") {
  const auto angles = golden_angles(3);
  CHECK(angles[0] == 0.0);
  CHECK(angles[1] == doctest::Approx(2 * std::numbers::pi * (std::numbers::phi - 1)));
  const auto k = build(spec_from_json(nlohmann::json::parse(R"({"kind": "stochastic", "map": [1, 2, 0]})")));
  CHECK(k(0, 1) == Complex(1.0));
  CHECK(k(2, 0) == Complex(1.0));
}
