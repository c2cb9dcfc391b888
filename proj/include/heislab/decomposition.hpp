#pragma once

// Annuli decompositions of the lattice metric-measure space, the constant
// chain of the eigenvalue lower bound, and counting-function lower bounds
// certified by disjointly supported test functions.

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "heislab/capacity.hpp"
#include "heislab/forms.hpp"
#include "heislab/lattice.hpp"
#include "heislab/spectrum.hpp"

namespace heislab {

struct PlacedAnnulus {
  Annulus annulus;
  double mass = 0.0;         // mu(A)
  double double_mass = 0.0;  // mu(2A)
  std::vector<std::uint32_t> nodes;         // A
  std::vector<std::uint32_t> double_nodes;  // 2A
};

struct Decomposition {
  std::size_t k = 0;
  std::vector<PlacedAnnulus> annuli;
  double achieved_c = 0.0;  // min_i mu(A_i) k / mu(X)
  double total_mass = 0.0;
  int target_halvings = 0;  // repairs applied to the per-annulus mass target
  Metric metric = Metric::gauge;
  std::string measure;

  /// Pairwise disjointness of the doubles, by node-set intersection.
  bool doubles_disjoint(std::size_t nodes) const;
  void write_csv(std::ostream& os) const;
};

struct DecompositionOptions {
  std::size_t candidates = 256;  // centres tried per placement
  int max_halvings = 20;
  // Upper bound on (candidates x nodes) kept in memory.
  std::size_t memory_budget = 40'000'000;
};

/// Greedy placement: for i = 1..k pick, over candidate centres and over the
/// radius gaps left by earlier doubles, the annulus reaching mass mu(X)/(2k)
/// whose double is lightest; if some placement fails the target is halved
/// and the construction restarts. Throws Error(infeasible) when no target
/// works. Distances from each candidate are computed once, so one search
/// serves many k.
class AnnulusSearch {
 public:
  AnnulusSearch(const LatticeDomain& d, const HorizontalGraph& g, Metric metric,
                std::span<const double> node_mass, std::string measure,
                const DecompositionOptions& opts = {});

  Decomposition decompose(std::size_t k) const;

  /// Distances from any node in the search metric.
  std::vector<double> distances(std::size_t center) const;

  double total_mass() const noexcept { return total_; }

 private:
  const LatticeDomain* domain_;
  const HorizontalGraph* graph_;
  Metric metric_;
  std::vector<double> mass_;
  std::string measure_;
  int max_halvings_ = 20;
  double total_ = 0.0;
  std::vector<std::size_t> centers_;
  std::vector<std::vector<std::uint32_t>> order_;  // nodes by distance, per centre
  std::vector<std::vector<double>> sorted_;        // matching distances

  std::optional<Decomposition> attempt(std::size_t k, double target) const;
};

Decomposition decompose_annuli(const LatticeDomain& d, const HorizontalGraph& g, Metric metric,
                               const MeasureField& measure, std::size_t k,
                               const DecompositionOptions& opts = {});

struct ConstantChain {
  int n = 1;
  double doubling = 0.0;      // C1 estimate (informational)
  double growth = 0.0;        // C2
  double c_dec = 0.0;         // achieved decomposition constant
  double cap1 = 0.0;          // (8n)^{n+1} C2: CAP_{2n+2}(B, 2B)
  double annulus_cap = 0.0;   // c(n, C2): CAP_{2n+2}(A, 2A)
  double c_bar = 0.0;         // annulus_cap^{1/(n+1)}
  double C = 0.0;             // (4 c_bar / c_dec)^{-(n+1)}
  double C_star = 0.0;        // C^{-1/(n+1)}
};

ConstantChain compute_constant_chain(int n, double c_dec, double growth, double doubling = 0.0);

enum class Witness { profile, capacity };

struct CertifyOptions {
  Witness witness = Witness::profile;
  double margin = 0.25;
  bool constant = true;  // append the constant function (domain is the whole lattice)
};

struct WitnessSet {
  Eigen::MatrixXd functions;   // one column per witness
  std::vector<double> quotients;  // Rayleigh quotient of each column
  std::vector<double> ritz;    // ascending Ritz values of the span
};

/// Witness functions of a decomposition and the Ritz values of their span.
WitnessSet build_witnesses(const QuadraticFormPair& forms, const Eigen::VectorXd& mass,
                           const AnnulusSearch& search, const Decomposition& dec,
                           const CertifyOptions& opts = {});

struct CertifiedBound {
  double lambda = 0.0;
  std::size_t certified = 0;
  std::vector<double> quotients;
};

/// Number of Ritz values of the witness span below lambda. By min-max this
/// never exceeds N(lambda) of the same discrete pencil.
CertifiedBound certify_counting_bound(const WitnessSet& w, double lambda);

CertifiedBound certify_counting_bound(const QuadraticFormPair& forms, const Eigen::VectorXd& mass,
                                      const AnnulusSearch& search, const Decomposition& dec,
                                      double lambda, const CertifyOptions& opts = {});

struct MotherRow {
  double lambda = 0.0;
  std::size_t certified = 0;
  std::size_t best_k = 0;
  std::size_t exact = 0;
  bool exact_lower_bound_only = false;
  double c_lambda = 0.0;  // certified / (V lambda^{n+1})
};

struct MotherReport {
  std::vector<MotherRow> rows;
  double volume = 0.0;  // V: Vol_theta, or sigma(M)^{n+1} / Vol_theta^n
  double c_emp = 0.0;   // min over the grid of c_lambda
  std::size_t violations = 0;  // rows with certified > exact
  void write_csv(std::ostream& os) const;
};

struct MotherOptions {
  std::vector<double> lambdas;  // empty: 12 log-spaced points over the fit window
  std::size_t k_max = 0;        // 0: up to twice the largest exact count
  CertifyOptions certify;
  DecompositionOptions decomposition;
};

/// Default lambda grid: 12 log-spaced points over [lambda_20, lambda_min(200, m)].
std::vector<double> default_lambda_grid(const Spectrum& s);

/// Certification over a lambda grid, trying k = 1, 2, 4, ... decompositions.
/// `measure` empty selects the volume measure of the forms.
MotherReport mother_bound_check(const LatticeDomain& d, const HorizontalGraph& g, Metric metric,
                                const QuadraticFormPair& forms, const Spectrum& spectrum,
                                const MeasureField* measure, double volume,
                                const MotherOptions& opts = {});

}  // namespace heislab
