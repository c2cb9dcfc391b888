#pragma once

// Discrete sub-Riemannian p-capacities of capacitors (F, G), F inside G:
//
//   CAP_p(F, G) = min { sum_e W_e^(p) |u(tgt) - u(src)|^p : u = 1 on F, u = 0 off G }
//
// over undirected horizontal edges. The p-weight of an edge carries
// kappa_e^{n+1-p/2}; at p = 2 it is the stiffness weight (summed over both
// orientations) and at p = 2n+2 it does not depend on kappa at all.

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "heislab/forms.hpp"
#include "heislab/lattice.hpp"

namespace heislab {

/// Undirected weighted graph on which p-energies are evaluated.
class EnergyGraph {
 public:
  struct Edge {
    std::uint32_t a, b;
  };

  /// Lattice energy: edges of the horizontal graph, conformal factor kappa.
  EnergyGraph(const LatticeDomain& d, const HorizontalGraph& g, std::span<const double> kappa);

  /// Abstract graph whose weights do not depend on p (resistor networks).
  EnergyGraph(std::size_t nodes, std::vector<Edge> edges, std::vector<double> weights);

  std::size_t nodes() const noexcept { return nodes_; }
  std::span<const Edge> edges() const noexcept { return edges_; }
  int n() const noexcept { return n_; }

  /// W_e^(p) per undirected edge.
  std::vector<double> weights(double p) const;

  /// sum_e W_e^(p) |du|^p
  double energy(const Eigen::VectorXd& u, double p) const;

  /// Webster length of an edge (1 for abstract graphs).
  double edge_length() const noexcept { return edge_length_; }

  /// Volume (c_n kappa^{n+1} cell volume) of each node; 1 for abstract graphs.
  std::span<const double> node_volume() const noexcept { return node_volume_; }

 private:
  std::size_t nodes_ = 0;
  int n_ = 1;
  std::vector<Edge> edges_;
  // W^(p) = base * kappa_e^{n+1-p/2} * (2n)^{p/2-1} / (c_f^{p/2} h^p); abstract
  // graphs keep a fixed weight in base and set lattice_ = false.
  std::vector<double> base_;
  std::vector<double> kappa_e_;
  bool lattice_ = false;
  double h_ = 1.0;
  double c_f_ = 1.0;
  double edge_length_ = 1.0;
  std::vector<double> node_volume_;
};

struct Capacitor {
  std::vector<char> in_f;
  std::vector<char> in_g;

  /// Throws unless F is nonempty and F is contained in G.
  static Capacitor from_masks(std::vector<char> f, std::vector<char> g);
  static Capacitor from_nodes(std::size_t nodes, std::span<const std::size_t> f,
                              std::span<const std::size_t> g);
  /// F = {d < r}, G = {d < R}.
  static Capacitor balls(std::span<const double> distances, double r, double R);
  /// F = A = {r <= d < R}, G = 2A = {r/2 <= d < 2R}.
  static Capacitor annulus(std::span<const double> distances, double r, double R);

  std::size_t size() const { return in_f.size(); }
};

struct CapacityOptions {
  double tol = 1e-9;  // relative objective change
  int max_iterations = 200;
  double weight_floor = 1e-12;  // relative to the largest reweighting factor
};

struct CapacityResult {
  double p = 2.0;
  double value = 0.0;
  Eigen::VectorXd u;
  int iterations = 0;
  double residual = 0.0;  // last relative objective change
  double lipschitz = 0.0;  // sup |du| / edge length
  bool clipped = false;    // u left [0, 1] beyond roundoff
  bool disconnected = false;  // F cannot reach the complement of G
};

CapacityResult cap_2(const EnergyGraph& g, const Capacitor& c);

/// Damped Newton iteration on the p-energy; each step solves the reweighted
/// harmonic problem and line-searches the objective along it, so the
/// objective decreases monotonically. Throws Error(solver) at the cap.
CapacityResult cap_p(const EnergyGraph& g, const Capacitor& c, double p,
                     const CapacityOptions& opts = {});

/// 1 for d <= r + eps/2, linear in d down to 0 at 2r - eps/2, 0 beyond.
Eigen::VectorXd profile_test_function(std::span<const double> distances, double r, double eps);

struct Annulus {
  std::size_t center = 0;
  double r = 0.0;  // inner radius, 0 for a ball
  double R = 0.0;
};

/// profile(R, margin R) - profile(r/2, margin r/2): 1 on A, supported in 2A.
Eigen::VectorXd annulus_test_function(std::span<const double> distances, const Annulus& a,
                                      double margin = 0.25);

struct HolderReport {
  double cap2 = 0.0;
  double cap_top = 0.0;  // CAP_{2n+2}
  double volume = 0.0;   // Vol(2A)
  double rhs = 0.0;
  double margin = 0.0;  // (rhs - cap2) / rhs
  bool holds = false;
};

/// CAP_2(A, 2A) <= CAP_{2n+2}(A, 2A)^{1/(n+1)} Vol(2A)^{n/(n+1)}.
HolderReport check_holder_chain(const EnergyGraph& g, std::span<const double> distances,
                                const Annulus& a, const CapacityOptions& opts = {});

struct ProfileBoundReport {
  double p = 2.0;
  double r = 0.0;
  double eps = 0.0;
  double energy = 0.0;
  double bound = 0.0;  // (2n)^{p/2} Vol(B(2r)) (r - eps)^{-p}
  double discrete_c = 0.0;  // (energy / bound - 1) r / h_metric
};

/// Energy of the ball profile against the continuum gradient bound. `h_metric`
/// is the lattice step measured in the metric of `distances`.
ProfileBoundReport check_profile_bound(const EnergyGraph& g, std::span<const double> distances,
                                       double r, double eps, double p, double h_metric);

struct CapacityRow {
  double p, r, R, value;
  int iterations;
  double margin;
};

void write_capacity_csv(std::ostream& os, std::span<const CapacityRow> rows);

}  // namespace heislab
