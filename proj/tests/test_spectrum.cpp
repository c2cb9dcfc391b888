#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>
#include <sstream>

#include "heislab/error.hpp"
#include "heislab/forms.hpp"
#include "heislab/spectrum.hpp"

using namespace heislab;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::vector<double> dense_oracle(const QuadraticFormPair& q) {
  const MatrixXd S(q.stiffness);
  const MatrixXd M = q.mass.asDiagonal();
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(S, M);
  return {es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size()};
}

Spectrum synthetic(std::vector<double> values) {
  Spectrum s;
  s.values = std::move(values);
  s.residuals.assign(s.values.size(), 0.0);
  return s;
}

}  // namespace

TEST_CASE("iterative solver matches the dense oracle on an 8 x 8 x 9 grid") {
  const double h = 1.0 / 7.0;
  DomainConfig cfg = DomainConfig::unit_box(1, h);
  cfg.lower = {-3 * h, -3 * h, 0.0};
  cfg.upper = {4 * h, 4 * h, 8 * 2 * h * h};
  LatticeDomain d(cfg);
  CHECK(d.extent(0) == 8);
  CHECK(d.extent(2) == 9);
  HorizontalGraph g(d);
  for (auto spec : {KappaSpec::constant(1.0), KappaSpec::fourier(5, 6, 1.0)}) {
    const auto q = assemble_forms(d, g, make_kappa(d, spec));
    const auto oracle = dense_oracle(q);
    SolverOptions o;
    o.count = 20;
    o.block = 4;
    o.method = SolverOptions::Method::iterative;
    const auto it = solve_generalized(q, o);
    o.method = SolverOptions::Method::dense;
    const auto de = solve_generalized(q, o);
    for (int k = 1; k < 20; ++k) {
      CHECK(it.values[k] == doctest::Approx(oracle[k]).epsilon(1e-8));
      CHECK(de.values[k] == doctest::Approx(oracle[k]).epsilon(1e-8));
    }
    REQUIRE(q.components == 1);
    CHECK(std::abs(it.values[0]) <= 1e-10 * it.values[1]);
  }
}

TEST_CASE("iterative solver on a larger grid: oracle, residuals, orthonormality, determinism") {
  LatticeDomain d(DomainConfig::centered(1, 1.0, 0.25, 1.0 / 12.0));
  HorizontalGraph g(d);
  REQUIRE(d.size() <= 2000);
  const auto q = assemble_forms(d, g, make_kappa(d, KappaSpec::fourier(8, 8, 1.2)));
  const auto oracle = dense_oracle(q);
  SolverOptions o;
  o.count = 20;
  o.method = SolverOptions::Method::iterative;
  const auto s = solve_generalized(q, o);
  for (int k = 1; k < 20; ++k) CHECK(s.values[k] == doctest::Approx(oracle[k]).epsilon(1e-8));
  for (std::size_t k = 0; k < s.size(); ++k) CHECK(s.residuals[k] <= o.tol * s.residual_scale);
  const MatrixXd gram = s.vectors.transpose() * q.mass.asDiagonal() * s.vectors;
  CHECK((gram - MatrixXd::Identity(20, 20)).cwiseAbs().maxCoeff() <= 1e-10);
  for (std::size_t k = 1; k < s.size(); ++k) CHECK(s.values[k] >= s.values[k - 1]);
  CHECK(s.cutoff > s.values.back());
  CHECK(s.cutoff <= oracle.back() * (1 + 1e-9));
  const auto again = solve_generalized(q, o);
  CHECK(again.values == s.values);
}

TEST_CASE("thick restart reaches convergence in a small subspace") {
  LatticeDomain d(DomainConfig::centered(1, 1.0, 0.25, 1.0 / 12.0));
  HorizontalGraph g(d);
  const auto q = assemble_forms(d, g, make_kappa(d, KappaSpec::constant(1.0)));
  const auto oracle = dense_oracle(q);
  SolverOptions o;
  o.count = 30;
  o.block = 4;
  o.max_subspace = 48;
  o.max_restarts = 200;
  o.method = SolverOptions::Method::iterative;
  const auto s = solve_generalized(q, o);
  for (int k = 1; k < 30; ++k) CHECK(s.values[k] == doctest::Approx(oracle[k]).epsilon(1e-8));
  o.max_restarts = 0;
  try {
    solve_generalized(q, o);
    FAIL("expected non-convergence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::solver);
  }
}

TEST_CASE("kernel and dilation of the spectrum") {
  const DomainConfig cfg = DomainConfig::centered(1, 1.0, 0.5, 0.0625);
  LatticeDomain d(cfg), d2(dilate(cfg, 2.0));
  HorizontalGraph g(d), g2(d2);
  const auto k1 = make_kappa(d, KappaSpec::constant(1.0));
  const auto k2 = make_kappa(d2, KappaSpec::constant(1.0));
  const auto q = assemble_forms(d, g, k1);
  const auto q2 = assemble_forms(d2, g2, k2);
  SolverOptions o;
  o.count = 40;
  const auto s = solve_generalized(q, o);
  const auto s2 = solve_generalized(q2, o);
  CHECK(std::abs(s.values[0]) <= 1e-10 * s.values[1]);
  VectorXd c = s.vectors.col(0);
  c /= c[0];
  CHECK((c - VectorXd::Ones(c.size())).cwiseAbs().maxCoeff() <= 1e-8);
  for (int k = 1; k < 40; ++k) CHECK(s2.values[k] == doctest::Approx(s.values[k] / 4.0).epsilon(1e-12));
  const auto r = bound_ratio(s, volume_total(d, k1), 40, 1);
  const auto r2 = bound_ratio(s2, volume_total(d2, k2), 40, 1);
  CHECK(r.ratios[0] == 0.0);
  for (int k = 1; k < 40; ++k) CHECK(r2.ratios[k] == doctest::Approx(r.ratios[k]).epsilon(1e-10));
}

TEST_CASE("counting function") {
  const auto s = synthetic({-1e-14, 1.0, 1.0 + 1e-12, 2.0, 3.0, 3.0, 3.0, 5.0});
  const CountingFunction nf(s);
  CHECK(nf(0.0).value == 0);
  CHECK(nf(1e-300).value == 1);
  CHECK(nf(1.0).value == 1);
  CHECK(nf(1.0 + 1e-13).value == 3);  // the cluster counts as one level
  CHECK(nf(3.0).value == 4);
  CHECK(nf(4.0).value == 7);
  CHECK_FALSE(nf(4.0).lower_bound_only);
  CHECK(nf(6.0).value == 8);
  CHECK(nf(6.0).lower_bound_only);
  CHECK(nf.eigenvalue(1) == 0.0);
  CHECK(nf.eigenvalue(3) == 1.0);
  CHECK(nf.eigenvalue(7) == 3.0);
  bool lb = false;
  CHECK(counting(s, 5.5, &lb) == 8);
  CHECK(lb);
}

TEST_CASE("counting and eigenvalue recovery are mutual inverses") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v{0.0};
    const int m = 5 + static_cast<int>(rng() % 60);
    for (int i = 1; i < m; ++i) v.push_back(v.back() + (u(rng) < 0.3 ? 0.0 : 0.1 + u(rng)));
    const CountingFunction nf(synthetic(v));
    for (std::size_t k = 1; k <= nf.resolved(); ++k) {
      const double lk = nf.eigenvalue(k);
      // lambda_k = inf{lambda : N(lambda) >= k}: N just above lambda_k reaches k,
      // N at lambda_k does not.
      CHECK(nf(std::nextafter(lk, 1e300)).value >= k);
      CHECK(nf(lk).value < k);
      CHECK(lk == v[k - 1]);
    }
    for (int i = 0; i < 20; ++i) {
      const double lam = u(rng) * v.back();
      const std::size_t c = nf(lam).value;
      if (c > 0) CHECK(nf.eigenvalue(c) < lam);
      if (c < nf.resolved()) CHECK(nf.eigenvalue(c + 1) >= lam);
    }
  }
}

TEST_CASE("Weyl fit") {
  std::vector<double> v{0.0};
  for (int k = 2; k <= 300; ++k) v.push_back(std::pow(k / 3.0, 0.5));
  auto s = synthetic(v);
  const auto f = weyl_fit_ranks(s, 20, 300);
  CHECK(f.slope == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-10));
  CHECK(f.r2 == doctest::Approx(1.0));
  CHECK(f.points == 281);
  CHECK_THROWS_AS(weyl_fit_ranks(s, 20, 30), Error);  // 11 points
  CHECK_THROWS_AS(weyl_fit_ranks(s, 20, 400), Error);
  s.cutoff = 20.0;
  CHECK_THROWS_AS(weyl_fit(s, 1.0, 5.0), Error);  // above 0.2 cutoff
  CHECK_NOTHROW(weyl_fit(s, 1.0, 4.0));
}

TEST_CASE("Weyl fit stability under a doubled window" * doctest::may_fail()) {
  LatticeDomain d(DomainConfig::centered(1, 1.0, 0.5, 0.0625));
  HorizontalGraph g(d);
  const auto q = assemble_forms(d, g, make_kappa(d, KappaSpec::constant(1.0)));
  SolverOptions o;
  o.count = 200;
  const auto s = solve_generalized(q, o);
  const CountingFunction nf(s);
  const double lo = nf.eigenvalue(20), hi = nf.eigenvalue(90);
  const auto a = weyl_fit(s, lo, hi);
  const auto b = weyl_fit(s, 2 * lo, 2 * hi);
  MESSAGE("slopes " << a.slope << " " << b.slope);
  CHECK(std::abs(a.slope - b.slope) < 0.15);
}

TEST_CASE("CSV export") {
  auto s = synthetic({0.0, 1.5, 1.5, 2.25});
  std::ostringstream a, b;
  s.write_csv(a);
  CHECK(a.str() == "k,lambda,residual\n1,0,0\n2,1.5,0\n3,1.5,0\n4,2.25,0\n");
  CountingFunction(s).write_csv(b);
  CHECK(b.str() == "lambda,N\n0,1\n1.5,3\n2.25,4\n");
}

TEST_CASE("solver preconditions") {
  LatticeDomain d(DomainConfig::centered(1, 0.5, 0.125, 0.125));
  HorizontalGraph g(d);
  const auto q = assemble_forms(d, g, make_kappa(d, KappaSpec::constant(1.0)));
  SolverOptions o;
  o.count = static_cast<int>(d.size()) + 1;
  CHECK_THROWS_AS(solve_generalized(q, o), Error);
  o.count = 0;
  CHECK_THROWS_AS(solve_generalized(q, o), Error);
  o.count = 4;
  VectorXd bad = q.mass;
  bad[0] = -1.0;
  CHECK_THROWS_AS(solve_generalized(q.stiffness, bad, o), Error);
}
