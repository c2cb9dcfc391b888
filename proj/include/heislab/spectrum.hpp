#pragma once

// Generalized symmetric eigenproblems S u = lambda M u (M diagonal, possibly
// with zero entries), counting functions, Weyl-exponent fits and the
// scale-invariant eigenvalue bound ratios.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "heislab/forms.hpp"

namespace heislab {

struct SolverOptions {
  enum class Method { automatic, iterative, dense };

  int count = 20;
  // Each pair is certified with ||S u - lambda M u|| / ||M u|| <= tol * scale,
  // scale = lambda_count (see Spectrum::residual_scale).
  double tol = 1e-9;
  std::uint64_t seed = 1;
  int block = 8;
  Method method = Method::automatic;
  int max_subspace = 0;  // 0 picks max(4 count, count + 40 block)
  int max_restarts = 20;
  // Problems up to this size are solved densely under Method::automatic.
  std::size_t dense_limit = 2000;
};

struct Spectrum {
  std::vector<double> values;     // ascending
  std::vector<double> residuals;  // ||S u - lambda M u|| / ||M u||
  Eigen::MatrixXd vectors;        // M-orthonormal eigenvectors, one per column
  double residual_scale = 1.0;
  double cutoff = 0.0;  // estimate of the largest discrete eigenvalue
  int iterations = 0;   // block steps (0 for dense)
  std::string provenance;

  std::size_t size() const { return values.size(); }
  void write_csv(std::ostream& os) const;
};

Spectrum solve_generalized(const Eigen::SparseMatrix<double>& stiffness,
                           const Eigen::VectorXd& mass, const SolverOptions& opts);

inline Spectrum solve_generalized(const QuadraticFormPair& q, const SolverOptions& opts) {
  Spectrum s = solve_generalized(q.stiffness, q.mass, opts);
  s.provenance = q.provenance;
  return s;
}

/// Power-iteration estimate of the largest eigenvalue on the support of M.
double estimate_lambda_max(const Eigen::SparseMatrix<double>& stiffness,
                           const Eigen::VectorXd& mass, int iterations = 200,
                           std::uint64_t seed = 7);

/// Relative tolerance under which neighbouring eigenvalues count as one
/// degenerate level.
inline constexpr double kClusterTolerance = 1e-9;

/// N(lambda) = #{k : lambda_k < lambda}, with clustered levels snapped to
/// their smallest member and tiny negative values read as 0.
class CountingFunction {
 public:
  explicit CountingFunction(const Spectrum& s);

  struct Count {
    std::size_t value = 0;
    bool lower_bound_only = false;  // lambda beyond the resolved range
  };

  Count operator()(double lambda) const;

  /// inf { lambda >= 0 : N(lambda) >= k }, k = 1..size().
  double eigenvalue(std::size_t k) const;

  std::size_t resolved() const { return levels_.size(); }

  /// Step function sampled at every jump: (lambda, N just above lambda).
  void write_csv(std::ostream& os) const;

 private:
  std::vector<double> levels_;
};

std::size_t counting(const Spectrum& s, double lambda, bool* lower_bound_only = nullptr);

struct WeylFit {
  double slope = 0.0;
  double intercept = 0.0;  // log N ~ slope log lambda + intercept
  double r2 = 0.0;
  double lambda_lo = 0.0, lambda_hi = 0.0;
  std::size_t points = 0;
};

/// Least squares of log k against log lambda_k over lambda_k in the window.
WeylFit weyl_fit(const Spectrum& s, double lambda_lo, double lambda_hi,
                 std::size_t min_points = 20);

/// Window [lambda_{k_lo}, lambda_{k_hi}] by rank (1-based).
WeylFit weyl_fit_ranks(const Spectrum& s, std::size_t k_lo, std::size_t k_hi,
                       std::size_t min_points = 20);

struct BoundRatios {
  std::vector<double> ratios;  // k = 1..k_max
  double sup = 0.0;
};

/// lambda_k Vol^{1/(n+1)} / k^{1/(n+1)} for k = 1..k_max.
BoundRatios bound_ratio(const Spectrum& s, double volume, std::size_t k_max, int n);

}  // namespace heislab
