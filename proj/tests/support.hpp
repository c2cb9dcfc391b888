#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "heislab/heisenberg.hpp"

namespace heislab::testing {

inline Point random_point(std::mt19937_64& rng, int n, double scale = 2.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> x(n), y(n);
  for (int a = 0; a < n; ++a) {
    x[a] = u(rng);
    y[a] = u(rng);
  }
  return Point(x, y, u(rng));
}

inline double coord_error(const Point& p, const Point& q) {
  double e = std::abs(p.t() - q.t());
  for (int a = 0; a < p.n(); ++a) e = std::max({e, std::abs(p.x()[a] - q.x()[a]), std::abs(p.y()[a] - q.y()[a])});
  return e;
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

}  // namespace heislab::testing
