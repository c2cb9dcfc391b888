#pragma once

// Conformal factors and the energy/mass quadratic-form pair of the Neumann
// sub-Laplacian for theta = kappa * theta_0.
//
// With L_{kappa theta} = kappa L_theta the horizontal energy density picks up
// kappa^{-1} and the volume theta ^ (dtheta)^n picks up kappa^{n+1}, so the
// stiffness carries kappa^n and the mass kappa^{n+1}. Only in-domain edges are
// assembled; the Neumann condition is the natural boundary condition of the
// variational form.

#include <Eigen/Sparse>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "heislab/lattice.hpp"

namespace heislab {

struct KappaSpec {
  enum class Kind { constant, expression, fourier };
  Kind kind = Kind::constant;
  double value = 1.0;
  std::string expression;
  // Random log-Fourier field: log kappa = amplitude * f / max|f| with f a
  // sum of `modes` random cosines of integer wavenumber <= max_wavenumber.
  std::uint64_t seed = 0;
  int modes = 8;
  int max_wavenumber = 2;
  double amplitude = 1.0;

  static KappaSpec constant(double v);
  static KappaSpec from_expression(std::string text);
  static KappaSpec fourier(std::uint64_t seed, int modes, double amplitude);

  std::string describe() const;
};

struct ConformalFactor {
  std::vector<double> values;
  std::string provenance;

  double min() const;
  double max() const;
  double ratio() const { return max() / min(); }
};

ConformalFactor make_kappa(const LatticeDomain& d, const KappaSpec& spec);

/// Nonnegative node density sigma; mass of a node is sigma * cell volume.
struct MeasureField {
  std::vector<double> density;
  double total_mass = 0.0;
  std::string provenance;
};

/// Largest fraction of the total mass carried by one node for a measure to
/// count as non-atomic on the lattice.
inline constexpr double kAtomCap = 0.5;

/// Validates sigma >= 0, total mass > 0 and the single-node cap.
MeasureField make_measure(const LatticeDomain& d, std::vector<double> density,
                          std::string provenance);

/// sigma = c_n kappa^{n+1}: the volume measure of kappa * theta_0.
MeasureField volume_measure(const LatticeDomain& d, const ConformalFactor& kappa);

/// Measure density from an expression (values must be >= 0).
MeasureField measure_from_expression(const LatticeDomain& d, const std::string& text);

/// Vol_theta of the lattice domain: c_n sum kappa^{n+1} h^{2n} h_t.
double volume_total(const LatticeDomain& d, const ConformalFactor& kappa);

struct QuadraticFormPair {
  Eigen::SparseMatrix<double> stiffness;
  Eigen::VectorXd mass;              // diagonal of the mass matrix
  std::vector<double> edge_weights;  // per directed graph edge
  int n = 1;
  double c_f = kFrameNormalization;
  double c_n = 4.0;
  std::string provenance;
  std::size_t components = 1;

  std::size_t size() const { return static_cast<std::size_t>(mass.size()); }
  double energy(const Eigen::VectorXd& u) const { return u.dot(stiffness * u); }
  double mass_norm2(const Eigen::VectorXd& u) const {
    return u.cwiseProduct(mass).dot(u);
  }
  double rayleigh(const Eigen::VectorXd& u) const { return energy(u) / mass_norm2(u); }

  /// Coordinate (row, col, value) export of S followed by the mass diagonal.
  void write_coo(std::ostream& os) const;
};

/// Energy weight of a directed edge: (c_n/c_f) kappa_e^n h^{2n} h_t / (2 h^2)
/// with kappa_e the geometric mean of the endpoint values.
std::vector<double> edge_weights(const LatticeDomain& d, const HorizontalGraph& g,
                                 std::span<const double> kappa);

QuadraticFormPair assemble_forms(const LatticeDomain& d, const HorizontalGraph& g,
                                 const ConformalFactor& kappa);

/// Mass diagonal sigma * cell volume for a measure field.
Eigen::VectorXd assemble_measure_mass(const LatticeDomain& d, const MeasureField& sigma);

/// Riemannian control: unsheared elliptic Laplacian on the same node set
/// (spacings h, h, 2 h_t), unit density. Elliptic Weyl exponent 3/2.
QuadraticFormPair assemble_euclidean_control(const LatticeDomain& d);

/// S = sum_e w_e (e_tgt - e_src)(e_tgt - e_src)^T.
Eigen::SparseMatrix<double> stiffness_from_edges(std::size_t nodes,
                                                 std::span<const HorizontalEdge> edges,
                                                 std::span<const double> weights);

}  // namespace heislab
