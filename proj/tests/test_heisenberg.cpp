#include <doctest.h>

#include <random>

#include "heislab/error.hpp"
#include "heislab/heisenberg.hpp"
#include "support.hpp"

using namespace heislab;
using heislab::testing::coord_error;
using heislab::testing::random_point;

TEST_CASE("group law on hand-evaluated pairs") {
  const Point a = Point::h1(1, 0, 0), b = Point::h1(0, 1, 0);
  CHECK(group_mul(a, b) == Point::h1(1, 1, -2));
  CHECK(group_mul(b, a) == Point::h1(1, 1, 2));
  const Point p = Point::h1(0.3, -1.2, 0.7);
  CHECK(group_mul(p, Point::identity(1)) == p);
  CHECK(group_mul(Point::identity(1), p) == p);
}

TEST_CASE("twist follows 2 Im<z,w> with <z,w> = sum z conj(w)") {
  // z = x + iy, w = u + iv: Im(z conj w) = y u - x v
  const Point p({0.5, 2.0}, {-1.0, 3.0}, 0.0), q({4.0, -1.0}, {0.25, 2.0}, 0.0);
  const double expect = 2.0 * ((-1.0 * 4.0 - 0.5 * 0.25) + (3.0 * -1.0 - 2.0 * 2.0));
  CHECK(symplectic_twist(p, q) == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("inverse") {
  CHECK(inverse(Point::identity(1)) == Point::identity(1));
  CHECK(inverse(Point::h1(1, 1, -2)) == Point::h1(-1, -1, 2));
  std::mt19937_64 rng(11);
  for (int n = 1; n <= 3; ++n)
    for (int i = 0; i < 100; ++i) {
      const Point p = random_point(rng, n);
      CHECK(group_mul(p, inverse(p)) == Point::identity(n));
      CHECK(inverse(inverse(p)) == p);
    }
}

TEST_CASE("associativity on random triples") {
  std::mt19937_64 rng(12);
  for (int n = 1; n <= 3; ++n)
    for (int i = 0; i < 500; ++i) {
      const Point p = random_point(rng, n), q = random_point(rng, n), r = random_point(rng, n);
      const Point lhs = group_mul(group_mul(p, q), r), rhs = group_mul(p, group_mul(q, r));
      CHECK(coord_error(lhs, rhs) <= 1e-12 * (1.0 + gauge_norm(lhs) * gauge_norm(lhs)));
    }
}

TEST_CASE("dimension mismatch is rejected") {
  CHECK_THROWS_AS(group_mul(Point::identity(1), Point::identity(2)), Error);
  CHECK_THROWS_AS(gauge_distance(Point::identity(1), Point::identity(2)), Error);
}

TEST_CASE("gauge norm specializations") {
  CHECK(gauge_norm(Point::h1(0, 0, -16)) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(gauge_norm(Point::h1(3, 4, 0)) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(gauge_norm(Point::identity(2)) == 0.0);
  CHECK(gauge_norm(Point::h1(1e-3, 0, 0)) > 0.0);
}

TEST_CASE("dilations") {
  std::mt19937_64 rng(13);
  const Point p = random_point(rng, 2);
  CHECK(dilate(1.0, p) == p);
  CHECK_THROWS_AS(dilate(0.0, p), Error);
  CHECK_THROWS_AS(dilate(-1.0, p), Error);
  for (int i = 0; i < 200; ++i) {
    const Point a = random_point(rng, 2), b = random_point(rng, 2);
    const double e = 0.1 + 3.0 * std::uniform_real_distribution<double>()(rng);
    const double f = 0.1 + 3.0 * std::uniform_real_distribution<double>()(rng);
    CHECK(coord_error(dilate(e, dilate(f, a)), dilate(e * f, a)) <= 1e-13 * 100);
    CHECK(coord_error(dilate(e, group_mul(a, b)), group_mul(dilate(e, a), dilate(e, b))) <= 1e-12 * 100);
    CHECK(gauge_norm(dilate(e, a)) == doctest::Approx(e * gauge_norm(a)).epsilon(1e-13));
  }
}

TEST_CASE("gauge distance: zero, symmetry, left invariance, homogeneity") {
  std::mt19937_64 rng(14);
  for (int n = 1; n <= 2; ++n)
    for (int i = 0; i < 300; ++i) {
      const Point g = random_point(rng, n), p = random_point(rng, n), q = random_point(rng, n);
      CHECK(gauge_distance(p, p) == 0.0);
      const double d = gauge_distance(p, q);
      CHECK(gauge_distance(q, p) == doctest::Approx(d).epsilon(1e-13));
      CHECK(gauge_distance(group_mul(g, p), group_mul(g, q)) == doctest::Approx(d).epsilon(1e-11));
      CHECK(gauge_distance(dilate(2.5, p), dilate(2.5, q)) == doctest::Approx(2.5 * d).epsilon(1e-13));
    }
}

TEST_CASE("quasi-triangle constant is measured and finite") {
  std::mt19937_64 rng(15);
  double k_t = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Point p = random_point(rng, 1), q = random_point(rng, 1), r = random_point(rng, 1);
    const double s = gauge_distance(p, r) + gauge_distance(r, q);
    if (s > 0.0) k_t = std::max(k_t, gauge_distance(p, q) / s);
  }
  MESSAGE("measured quasi-triangle constant " << k_t);
  CHECK(k_t > 0.0);
  CHECK(k_t <= 1.0 + 1e-12);  // the Koranyi gauge is a true metric
}

namespace {

// theta0 at (x, y, t) applied to a coordinate vector v = (vx, vy, vt), n = 1.
double theta0(const double* p, const double* v) { return v[2] + 2.0 * (p[0] * v[1] - p[1] * v[0]); }

// d theta(U, V) = U theta(V) - V theta(U) for constant fields, by central differences.
double dtheta0(const double* p, const double* u, const double* v) {
  const double h = 1e-4;
  auto along = [&](const double* dir, const double* arg) {
    double a[3], b[3];
    for (int i = 0; i < 3; ++i) {
      a[i] = p[i] + h * dir[i];
      b[i] = p[i] - h * dir[i];
    }
    return (theta0(a, arg) - theta0(b, arg)) / (2.0 * h);
  };
  return along(u, v) - along(v, u);
}

}  // namespace

TEST_CASE("wedge and frame constants from a numerical exterior-derivative oracle") {
  const double p[3] = {0.3, -0.7, 0.2};
  const double ex[3] = {1, 0, 0}, ey[3] = {0, 1, 0}, et[3] = {0, 0, 1};
  // (theta ^ dtheta)(ex, ey, et) by the alternating sum.
  const double wedge = theta0(p, ex) * dtheta0(p, ey, et) - theta0(p, ey) * dtheta0(p, ex, et) +
                       theta0(p, et) * dtheta0(p, ex, ey);
  CHECK(wedge == doctest::Approx(wedge_constant(1)).epsilon(1e-9));
  const double Xv[3] = {1, 0, 2 * p[1]};   // d/dx + 2y d/dt
  const double Yv[3] = {0, 1, -2 * p[0]};  // d/dy - 2x d/dt
  CHECK(theta0(p, Xv) == doctest::Approx(0.0));
  CHECK(theta0(p, Yv) == doctest::Approx(0.0));
  CHECK(dtheta0(p, Xv, Yv) == doctest::Approx(kFrameNormalization).epsilon(1e-9));
}

TEST_CASE("convention constants") {
  // theta0 ^ dtheta0 for theta0 = dt + 2(x dy - y dx): dtheta0 = 4 dx^dy, so
  // theta0 ^ dtheta0 = 4 dt^dx^dy = 4 dx^dy^dt.  In general 4^n n!.
  CHECK(wedge_constant(1) == 4.0);
  CHECK(wedge_constant(2) == 32.0);
  CHECK(wedge_constant(3) == 384.0);
  // dtheta0(X, Y) for X = d/dx + 2y d/dt, Y = d/dy - 2x d/dt: 4.
  CHECK(kFrameNormalization == 4.0);
  CHECK(HorizontalFrame(2).c_f == 4.0);
}
