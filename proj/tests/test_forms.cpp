#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
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

// Independent stencil oracle for n = 1: target indices by integer shear
// arithmetic, weights from the closed-form rule, dense accumulation.
MatrixXd dense_stiffness_oracle(const LatticeDomain& d, const std::vector<double>& kappa) {
  const std::size_t N = d.size();
  MatrixXd S = MatrixXd::Zero(N, N);
  const double w0 = (4.0 / 4.0) * d.cell_volume() / (2.0 * d.h() * d.h());
  for (std::size_t v = 0; v < N; ++v) {
    const long I = d.index(v, 0), J = d.index(v, 1), K = d.index(v, 2);
    const long moves[4][3] = {{1, 0, J}, {-1, 0, -J}, {0, 1, -I}, {0, -1, I}};
    for (const auto& m : moves) {
      const long idx[3] = {I + m[0], J + m[1], K + m[2]};
      const auto t = d.ordinal(idx);
      if (!t) continue;
      const double w = w0 * std::sqrt(kappa[v] * kappa[*t]);
      S(v, v) += w;
      S(*t, *t) += w;
      S(v, *t) -= w;
      S(*t, v) -= w;
    }
  }
  return S;
}

double rel_max(const MatrixXd& a, const MatrixXd& b) { return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("stiffness matches the dense stencil oracle entrywise") {
  LatticeDomain d(DomainConfig::unit_box(1, 1.0 / 7.0));  // 8 x 8 horizontal levels
  HorizontalGraph g(d);
  CHECK(d.extent(0) == 8);
  const auto kappa = make_kappa(d, KappaSpec::from_expression("exp(0.4*sin(2*pi*x) + 0.3*cos(3*y + t))"));
  const auto q = assemble_forms(d, g, kappa);
  const MatrixXd oracle = dense_stiffness_oracle(d, kappa.values);
  CHECK(rel_max(MatrixXd(q.stiffness), oracle) <= 1e-14);
  for (std::size_t v = 0; v < d.size(); ++v)
    CHECK(q.mass[v] == doctest::Approx(4.0 * kappa.values[v] * kappa.values[v] * d.cell_volume()).epsilon(1e-14));
}

TEST_CASE("kernel, symmetry and positivity") {
  for (int n = 1; n <= 2; ++n) {
    LatticeDomain d(DomainConfig::centered(n, n == 1 ? 1.0 : 0.5, 0.25, 0.125));
    HorizontalGraph g(d);
    const auto kappa = make_kappa(d, KappaSpec::fourier(3, 6, 1.0));
    const auto q = assemble_forms(d, g, kappa);
    const VectorXd ones = VectorXd::Ones(q.size());
    const double scale = q.stiffness.diagonal().maxCoeff();
    CHECK((q.stiffness * ones).cwiseAbs().maxCoeff() <= 1e-12 * scale);
    const Eigen::SparseMatrix<double> t = q.stiffness.transpose();
    CHECK((q.stiffness - t).norm() == 0.0);
    CHECK(q.mass.minCoeff() > 0.0);
    CHECK(q.components == 1);
  }
}

TEST_CASE("Green identity") {
  LatticeDomain d(DomainConfig::centered(1, 1.0, 0.5, 0.125));
  HorizontalGraph g(d);
  const auto q = assemble_forms(d, g, make_kappa(d, KappaSpec::fourier(9, 8, 1.2)));
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 5; ++trial) {
    VectorXd u(q.size()), v(q.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      u[i] = z(rng);
      v[i] = z(rng);
    }
    double sum = 0.0;
    const auto edges = g.edges();
    for (std::size_t e = 0; e < edges.size(); ++e)
      sum += q.edge_weights[e] * (u[edges[e].tgt] - u[edges[e].src]) * (v[edges[e].tgt] - v[edges[e].src]);
    CHECK(u.dot(q.stiffness * v) == doctest::Approx(sum).epsilon(1e-12));
    CHECK(q.energy(u) >= 0.0);
  }
}

TEST_CASE("constant kappa scaling") {
  LatticeDomain d(DomainConfig::centered(1, 1.0, 0.5, 0.125));
  HorizontalGraph g(d);
  const auto q1 = assemble_forms(d, g, make_kappa(d, KappaSpec::constant(1.0)));
  const auto q3 = assemble_forms(d, g, make_kappa(d, KappaSpec::constant(3.0)));
  CHECK(rel_max(MatrixXd(q3.stiffness), MatrixXd(3.0 * q1.stiffness)) <= 1e-15);
  CHECK((q3.mass - 9.0 * q1.mass).cwiseAbs().maxCoeff() <= 1e-15 * q3.mass.maxCoeff());
  SolverOptions o;
  o.count = 12;
  o.method = SolverOptions::Method::dense;
  const auto s1 = solve_generalized(q1, o), s3 = solve_generalized(q3, o);
  for (std::size_t k = 1; k < s1.size(); ++k)
    CHECK(s3.values[k] == doctest::Approx(s1.values[k] / 3.0).epsilon(1e-12));
}

TEST_CASE("exact dilation covariance of the assembly") {
  for (int n = 1; n <= 2; ++n) {
    const DomainConfig cfg = DomainConfig::centered(n, n == 1 ? 1.0 : 0.5, 0.25, 0.125);
    LatticeDomain d(cfg), d2(dilate(cfg, 2.0));
    HorizontalGraph g(d), g2(d2);
    REQUIRE(d2.size() == d.size());
    const auto q = assemble_forms(d, g, make_kappa(d, KappaSpec::constant(1.0)));
    const auto q2 = assemble_forms(d2, g2, make_kappa(d2, KappaSpec::constant(1.0)));
    const double sn = std::pow(2.0, 2 * n), mn = std::pow(2.0, 2 * n + 2);
    CHECK(rel_max(MatrixXd(q2.stiffness), MatrixXd(sn * q.stiffness)) <= 1e-15);
    CHECK((q2.mass - mn * q.mass).cwiseAbs().maxCoeff() <= 1e-15 * q2.mass.maxCoeff());
    const auto one = make_kappa(d, KappaSpec::constant(1.0));
    const auto one2 = make_kappa(d2, KappaSpec::constant(1.0));
    CHECK(volume_total(d2, one2) == doctest::Approx(mn * volume_total(d, one)).epsilon(1e-14));
  }
}

TEST_CASE("interior consistency with the sub-Laplacian on polynomials") {
  // M^{-1} S u = -(1/c_f) sum (X_j^2 + Y_j^2) u, exact for these polynomials.
  LatticeDomain d(DomainConfig::centered(1, 1.0, 0.5, 0.0625));
  HorizontalGraph g(d);
  const auto q = assemble_forms(d, g, make_kappa(d, KappaSpec::constant(1.0)));
  VectorXd u1(q.size()), u2(q.size()), u3(q.size());
  for (std::size_t v = 0; v < d.size(); ++v) {
    const double x = d.coord(v, 0), y = d.coord(v, 1), t = d.coord(v, 2);
    u1[v] = x * x;
    u2[v] = t * t;
    u3[v] = x * y * t;
  }
  const VectorXd r1 = q.stiffness * u1, r2 = q.stiffness * u2, r3 = q.stiffness * u3;
  std::size_t interior = 0;
  for (std::size_t v = 0; v < d.size(); ++v) {
    if (g.is_boundary(v)) continue;
    ++interior;
    const double x = d.coord(v, 0), y = d.coord(v, 1);
    // X^2 x^2 = 2; (X^2 + Y^2) t^2 = 8(x^2 + y^2); (X^2 + Y^2) xyt = 4y^2 - 4x^2
    CHECK(r1[v] / q.mass[v] == doctest::Approx(-2.0 / 4.0).epsilon(1e-9));
    CHECK(r2[v] / q.mass[v] == doctest::Approx(-8.0 * (x * x + y * y) / 4.0).epsilon(1e-9).scale(1.0));
    CHECK(r3[v] / q.mass[v] == doctest::Approx(-(4.0 * y * y - 4.0 * x * x) / 4.0).epsilon(1e-9).scale(1.0));
  }
  CHECK(interior > 1000);
}

TEST_CASE("conformal factors") {
  LatticeDomain d(DomainConfig::centered(1, 1.0, 0.5, 0.125));
  const auto one = make_kappa(d, KappaSpec::from_expression("1"));
  CHECK(std::all_of(one.values.begin(), one.values.end(), [](double v) { return v == 1.0; }));
  const auto flat = make_kappa(d, KappaSpec::from_expression("exp(0*sin(2*pi*x))"));
  CHECK(std::all_of(flat.values.begin(), flat.values.end(), [](double v) { return v == 1.0; }));
  const auto a = make_kappa(d, KappaSpec::fourier(17, 8, 1.4));
  const auto b = make_kappa(d, KappaSpec::fourier(17, 8, 1.4));
  CHECK(a.values == b.values);
  CHECK(a.ratio() <= std::exp(2.8) * (1 + 1e-12));
  CHECK(a.ratio() > 1.5);
  const auto c = make_kappa(d, KappaSpec::fourier(18, 8, 1.4));
  CHECK(a.values != c.values);
  CHECK_THROWS_AS(make_kappa(d, KappaSpec::from_expression("x")), Error);
  CHECK_THROWS_AS(make_kappa(d, KappaSpec::constant(-1.0)), Error);
}

TEST_CASE("volume") {
  LatticeDomain d(DomainConfig::unit_box(1, 1.0 / 32.0));
  const auto one = make_kappa(d, KappaSpec::constant(1.0));
  // cells centered on nodes of the coset: (1 + h)^2 (1 + h_t) of box volume
  const double v = volume_total(d, one);
  CHECK(v == doctest::Approx(4.0).epsilon(3.0 / 32.0));
  CHECK(volume_total(d, make_kappa(d, KappaSpec::constant(2.0))) == doctest::Approx(4.0 * v).epsilon(1e-14));
}

TEST_CASE("measures") {
  LatticeDomain d(DomainConfig::centered(1, 1.0, 0.5, 0.125));
  HorizontalGraph g(d);
  const auto kappa = make_kappa(d, KappaSpec::fourier(2, 8, 1.0));
  const auto q = assemble_forms(d, g, kappa);
  const auto vol = volume_measure(d, kappa);
  CHECK((assemble_measure_mass(d, vol) - q.mass).cwiseAbs().maxCoeff() <= 1e-15 * q.mass.maxCoeff());
  const auto uniform = measure_from_expression(d, "2.5");
  const VectorXd mu = assemble_measure_mass(d, uniform);
  CHECK((mu.array() == 2.5 * d.cell_volume()).all());

  std::vector<double> atom(d.size(), 0.0);
  atom[0] = 9.0;
  for (std::size_t v = 1; v < d.size(); ++v) atom[v] = 1.0 / static_cast<double>(d.size());
  CHECK_THROWS_AS(make_measure(d, atom, "atom"), Error);
  CHECK_THROWS_AS(make_measure(d, std::vector<double>(d.size(), 0.0), "zero"), Error);
  std::vector<double> neg(d.size(), 1.0);
  neg[3] = -1.0;
  CHECK_THROWS_AS(make_measure(d, neg, "negative"), Error);
}

TEST_CASE("half-supported measure restricts the eigenproblem to its support") {
  LatticeDomain d(DomainConfig::centered(1, 0.5, 0.125, 0.125));
  HorizontalGraph g(d);
  const auto q = assemble_forms(d, g, make_kappa(d, KappaSpec::constant(1.0)));
  const auto half = measure_from_expression(d, "(abs(x) + x) / 2");
  const VectorXd m = assemble_measure_mass(d, half);
  REQUIRE((m.array() == 0.0).count() > 0);
  REQUIRE((m.array() > 0.0).count() > 0);
  SolverOptions o;
  o.count = 10;
  o.method = SolverOptions::Method::dense;
  const auto s = solve_generalized(q.stiffness, m, o);

  // Oracle: finite generalized eigenvalues of the singular pencil by QZ.
  const MatrixXd S(q.stiffness);
  const MatrixXd M = m.asDiagonal();
  Eigen::GeneralizedEigenSolver<MatrixXd> qz(S, M);
  std::vector<double> finite;
  for (Eigen::Index i = 0; i < S.rows(); ++i) {
    const double beta = qz.betas()[i];
    if (std::abs(beta) > 1e-10 * M.maxCoeff()) finite.push_back(qz.alphas()[i].real() / beta);
  }
  std::sort(finite.begin(), finite.end());
  REQUIRE(finite.size() == static_cast<std::size_t>((m.array() > 0.0).count()));
  for (std::size_t k = 1; k < 10; ++k) CHECK(s.values[k] == doctest::Approx(finite[k]).epsilon(1e-8));
  CHECK(std::abs(s.values[0]) <= 1e-10 * s.values[1]);
}

TEST_CASE("Euclidean control fixture") {
  LatticeDomain d(DomainConfig::centered(1, 1.0, 0.5, 0.125));
  const auto q = assemble_euclidean_control(d);
  CHECK(q.provenance == "euclidean-control");
  const VectorXd ones = VectorXd::Ones(q.size());
  CHECK((q.stiffness * ones).cwiseAbs().maxCoeff() <= 1e-12 * q.stiffness.diagonal().maxCoeff());
  const Eigen::SparseMatrix<double> t = q.stiffness.transpose();
  CHECK((q.stiffness - t).norm() == 0.0);
}

TEST_CASE("coordinate export") {
  LatticeDomain d(DomainConfig::centered(1, 0.25, 0.0625, 0.125));
  HorizontalGraph g(d);
  const auto q = assemble_forms(d, g, make_kappa(d, KappaSpec::constant(1.0)));
  std::ostringstream os;
  q.write_coo(os);
  const std::string text = os.str();
  CHECK(text.rfind("# stiffness\nrow,col,value\n", 0) == 0);
  CHECK(text.find("# mass\n") != std::string::npos);
  const auto lines = std::count(text.begin(), text.end(), '\n');
  CHECK(lines == static_cast<long>(q.stiffness.nonZeros() + q.size() + 4));
}
