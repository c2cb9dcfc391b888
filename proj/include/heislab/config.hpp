#pragma once

// Run configuration: a JSON document validated in full before any work
// starts. Unknown keys are rejected.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "heislab/decomposition.hpp"
#include "heislab/forms.hpp"
#include "heislab/lattice.hpp"
#include "heislab/spectrum.hpp"

namespace heislab {

struct RunConfig {
  DomainConfig domain;
  KappaSpec kappa = KappaSpec::constant(1.0);
  std::optional<std::string> sigma;  // density expression
  Metric metric = Metric::gauge;

  SolverOptions solver;
  std::size_t fit_lo = 20;
  std::size_t fit_hi = 200;  // clipped to the eigenpair count

  // capacity
  std::vector<double> capacity_p;      // empty: {2, 2n+2}
  std::vector<double> capacity_radii;  // inner radii; empty: 6h..16h
  double capacity_ratio = 2.0;         // R = ratio * r
  double profile_eps = 0.0;            // 0: h / 2

  // decomposition / certification
  std::size_t k = 4;
  DecompositionOptions decomposition;
  std::vector<double> lambdas;
  Witness witness = Witness::profile;
  std::size_t k_max = 0;

  // sweep
  int sweep_modes = 8;
  double sweep_amplitude = 1.4;
  std::size_t ratio_k_max = 100;

  std::string out_dir = "out";
  std::string canonical;  // normalized JSON text, the hash input

  /// FNV-1a 64 of the canonical text, as 16 hex digits.
  std::string hash() const;
};

/// Throws Error(config) with a diagnostic on any invalid field.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

/// FNV-1a 64-bit hash.
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace heislab
