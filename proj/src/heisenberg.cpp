#include "heislab/heisenberg.hpp"

#include <cmath>
#include <string>

#include "heislab/error.hpp"

namespace heislab {

namespace {

void require_same_dim(const Point& p, const Point& q) {
  if (p.n() != q.n()) {
    throw Error(ErrorKind::precondition, "heisenberg",
                "dimension mismatch: n=" + std::to_string(p.n()) + " vs n=" +
                    std::to_string(q.n()));
  }
}

}  // namespace

Point::Point(std::vector<double> x, std::vector<double> y, double t)
    : x_(std::move(x)), y_(std::move(y)), t_(t) {
  if (x_.size() != y_.size() || x_.empty()) {
    throw Error(ErrorKind::precondition, "heisenberg",
                "x and y must be nonempty and of equal length");
  }
  bool finite = std::isfinite(t_);
  for (std::size_t j = 0; j < x_.size(); ++j) {
    finite = finite && std::isfinite(x_[j]) && std::isfinite(y_[j]);
  }
  if (!finite) {
    throw Error(ErrorKind::precondition, "heisenberg", "non-finite coordinate");
  }
}

Point Point::h1(double x, double y, double t) { return Point({x}, {y}, t); }

Point Point::identity(int n) {
  return Point(std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0.0);
}

double wedge_constant(int n) {
  double c = 1.0;
  for (int j = 1; j <= n; ++j) c *= 4.0 * j;
  return c;
}

HorizontalFrame::HorizontalFrame(int dim) : n(dim) {
  if (dim < 1) {
    throw Error(ErrorKind::precondition, "heisenberg", "n must be positive");
  }
}

double symplectic_twist(const Point& p, const Point& q) {
  require_same_dim(p, q);
  double s = 0.0;
  for (int j = 0; j < p.n(); ++j) {
    s += p.y()[j] * q.x()[j] - p.x()[j] * q.y()[j];
  }
  return 2.0 * s;
}

Point group_mul(const Point& p, const Point& q) {
  require_same_dim(p, q);
  std::vector<double> x(p.n()), y(p.n());
  for (int j = 0; j < p.n(); ++j) {
    x[j] = p.x()[j] + q.x()[j];
    y[j] = p.y()[j] + q.y()[j];
  }
  return Point(std::move(x), std::move(y), p.t() + q.t() + symplectic_twist(p, q));
}

Point inverse(const Point& p) {
  std::vector<double> x(p.n()), y(p.n());
  for (int j = 0; j < p.n(); ++j) {
    x[j] = -p.x()[j];
    y[j] = -p.y()[j];
  }
  return Point(std::move(x), std::move(y), -p.t());
}

double gauge_norm(const Point& p) {
  double r2 = 0.0;
  for (int j = 0; j < p.n(); ++j) r2 += p.x()[j] * p.x()[j] + p.y()[j] * p.y()[j];
  return std::sqrt(std::sqrt(r2 * r2 + p.t() * p.t()));
}

Point dilate(double eps, const Point& p) {
  if (!(eps > 0.0)) {
    throw Error(ErrorKind::precondition, "heisenberg",
                "dilation factor must be positive");
  }
  std::vector<double> x(p.n()), y(p.n());
  for (int j = 0; j < p.n(); ++j) {
    x[j] = eps * p.x()[j];
    y[j] = eps * p.y()[j];
  }
  return Point(std::move(x), std::move(y), eps * eps * p.t());
}

double gauge_distance(const Point& p, const Point& q) {
  return gauge_norm(group_mul(inverse(p), q));
}

}  // namespace heislab
