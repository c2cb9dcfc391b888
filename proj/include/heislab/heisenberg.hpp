#pragma once

// Group algebra and Koranyi gauge geometry of the Heisenberg group H_n.
//
// A point is (z, t) with z = x + i y in C^n. The group law is
//   (z,t)(w,s) = (z + w, t + s + 2 Im<z,w>),   <z,w> = sum_j z^j conj(w^j),
// so that 2 Im<z,w> = 2 sum_j (y^j u^j - x^j v^j) for w = u + i v.
// The standard contact form is theta_0 = dt + 2 sum_j (x^j dy^j - y^j dx^j)
// with horizontal frame X_j = d/dx^j + 2y^j d/dt, Y_j = d/dy^j - 2x^j d/dt.

#include <cstddef>
#include <vector>

namespace heislab {

class Point {
 public:
  Point() = default;
  Point(std::vector<double> x, std::vector<double> y, double t);

  /// Convenience constructor for H_1.
  static Point h1(double x, double y, double t);
  static Point identity(int n);

  int n() const noexcept { return static_cast<int>(x_.size()); }
  const std::vector<double>& x() const noexcept { return x_; }
  const std::vector<double>& y() const noexcept { return y_; }
  double t() const noexcept { return t_; }

  bool operator==(const Point&) const = default;

 private:
  std::vector<double> x_;
  std::vector<double> y_;
  double t_ = 0.0;
};

/// Webster-orthonormality factor: g_theta0(X_j, X_j) = dtheta0(X_j, Y_j) = 4,
/// so {X_j/2, Y_j/2} is orthonormal. Independent of n.
inline constexpr double kFrameNormalization = 4.0;

/// theta0 ^ (dtheta0)^n = 4^n n! dx^1 ^ dy^1 ^ ... ^ dx^n ^ dy^n ^ dt.
double wedge_constant(int n);

struct HorizontalFrame {
  int n = 1;
  double c_f = kFrameNormalization;

  explicit HorizontalFrame(int dim);
};

/// 2 Im<z,w> with the convention documented above.
double symplectic_twist(const Point& p, const Point& q);

Point group_mul(const Point& p, const Point& q);
Point inverse(const Point& p);
double gauge_norm(const Point& p);
Point dilate(double eps, const Point& p);
double gauge_distance(const Point& p, const Point& q);

}  // namespace heislab
