#pragma once

// Shear-exact lattice domains in boxes of H_n and the horizontal graph.
//
// Horizontal coordinates live on h Z, the vertical coordinate on
// t_lo + h_t Z with h_t = 2 h^2. A horizontal step p -> p (+-h e_x) shifts
// t by +-2 y h = +-J h_t where y = J h, so every step of the left-invariant
// frame lands exactly on a grid point.
//
// The elementary loop X, Y, -X, -Y moves t by 2 h_t, so the horizontal steps
// preserve the parity of k - sum_j I_j J_j (k the t level, I, J the x, y
// indices). The domain keeps the grid points of one parity class, the coset
// of the discrete Heisenberg group through (0, 0, t_lo); the other class is a
// central translate and would only duplicate the spectrum.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "heislab/heisenberg.hpp"

namespace heislab {

enum class Metric { gauge, graph };

Metric parse_metric(const std::string& name);
std::string to_string(Metric m);

struct DomainConfig {
  int n = 1;
  // 2n+1 entries ordered x^1..x^n, y^1..y^n, t.
  std::vector<double> lower;
  std::vector<double> upper;
  double h = 0.125;
  std::size_t max_nodes = 4'000'000;

  /// Centered box [-a/2, a/2]^{2n} x [-b/2, b/2].
  static DomainConfig centered(int n, double horizontal_extent,
                               double vertical_extent, double h);
  static DomainConfig unit_box(int n, double h);
};

/// Box, spacing and node numbering obtained by applying D_eps to every
/// ingredient (h -> eps h, h_t -> eps^2 h_t).
DomainConfig dilate(const DomainConfig& cfg, double eps);

class LatticeDomain {
 public:
  explicit LatticeDomain(const DomainConfig& cfg);

  int n() const noexcept { return n_; }
  int axes() const noexcept { return 2 * n_ + 1; }
  double h() const noexcept { return h_; }
  double ht() const noexcept { return ht_; }
  /// Number of nodes (grid points of the active parity class).
  std::size_t size() const noexcept { return size_; }
  const DomainConfig& config() const noexcept { return cfg_; }

  /// Number of grid levels along an axis.
  long extent(int axis) const { return counts_[axis]; }
  /// Grid points of the full box, both parity classes.
  std::size_t grid_points() const noexcept { return grid_points_; }

  /// Absolute integer coordinate: x = index*h, y = index*h,
  /// t = t_lo + index*h_t.
  long index(std::size_t node, int axis) const;
  double coord(std::size_t node, int axis) const;
  Point point(std::size_t node) const;

  /// Dense ordinal of a node given absolute integer coordinates; nullopt
  /// outside the box or off the active parity class.
  std::optional<std::size_t> ordinal(std::span<const long> idx) const;

  /// Coordinate volume represented by one node, 2 h^{2n} h_t.
  double cell_volume() const noexcept { return cell_volume_; }

  /// Node closest to a point of the box (rounded per axis, clamped).
  std::size_t nearest_node(const Point& p) const;

 private:
  DomainConfig cfg_;
  int n_;
  double h_;
  double ht_;
  double t_lo_;
  std::vector<long> lo_;      // absolute index of first level per axis
  std::vector<long> counts_;  // levels per axis
  std::vector<std::int32_t> index_;  // absolute indices, axes() per node
  std::vector<std::size_t> column_start_;
  std::size_t size_ = 0;
  std::size_t grid_points_ = 0;

  long parity_offset(std::span<const long> idx) const;
  std::size_t column(std::span<const long> idx) const;
  double cell_volume_ = 0.0;
};

struct HorizontalEdge {
  std::uint32_t src;
  std::uint32_t tgt;
  std::uint16_t axis;  // 0..n-1: X_j, n..2n-1: Y_j
  std::int8_t sign;
};

/// Directed edges p -> p*(+-h e_a) for every in-domain target, sorted by
/// source. Both orientations of each geometric edge are present.
class HorizontalGraph {
 public:
  explicit HorizontalGraph(const LatticeDomain& d);

  std::size_t node_count() const noexcept { return offsets_.size() - 1; }
  std::span<const HorizontalEdge> edges() const noexcept { return edges_; }
  std::span<const HorizontalEdge> out_edges(std::size_t node) const {
    return std::span<const HorizontalEdge>(edges_).subspan(
        offsets_[node], offsets_[node + 1] - offsets_[node]);
  }
  int n() const noexcept { return n_; }
  double h() const noexcept { return h_; }

  /// Webster length of one edge, sqrt(c_f) h.
  double edge_length() const;

  bool is_boundary(std::size_t node) const {
    return offsets_[node + 1] - offsets_[node] <
           static_cast<std::size_t>(4 * n_);
  }

  /// Connected-component label per node, and the number of components.
  std::vector<std::uint32_t> components(std::size_t* count) const;

 private:
  int n_;
  double h_;
  std::vector<HorizontalEdge> edges_;
  std::vector<std::size_t> offsets_;
};

/// Gauge distances |c^{-1} p| from a node to every node.
std::vector<double> gauge_distances(const LatticeDomain& d, std::size_t center);

/// Shortest horizontal path lengths (Dijkstra, edge length sqrt(c_f) h).
/// Unreachable nodes get +infinity.
std::vector<double> graph_distances(const HorizontalGraph& g, std::size_t center);

std::vector<double> distances_from(const LatticeDomain& d,
                                   const HorizontalGraph& g, Metric metric,
                                   std::size_t center);

/// Throws if q is unreachable from p.
double cc_distance_graph(const HorizontalGraph& g, std::size_t p, std::size_t q);

struct BallVolume {
  double volume = 0.0;
  std::size_t cells = 0;
  bool exits_domain = false;  // ball contains a truncated (boundary) node
};

/// Volume of {d(center, .) < r} counted by cell centers, each cell weighted
/// c_n kappa^m h^{2n} h_t. `kappa` may be empty (kappa = 1).
BallVolume estimate_ball_volume(const LatticeDomain& d, const HorizontalGraph& g,
                                std::span<const double> distances, double r,
                                std::span<const double> kappa, int m);

BallVolume estimate_ball_volume(const LatticeDomain& d, const HorizontalGraph& g,
                                Metric metric, std::size_t center, double r,
                                std::span<const double> kappa, int m);

struct BallVolumeRow {
  std::size_t center;
  double r;
  double volume;
  double doubling_ratio;  // Vol(B(x, 2r)) / Vol(B(x, r))
  bool exits_domain;
};

struct BallVolumeTable {
  std::vector<BallVolumeRow> rows;
  double growth_exponent = 0.0;  // slope of log Vol vs log r, interior balls
  double growth_fit_r2 = 0.0;
  double doubling_constant = 0.0;  // C1 estimate
  double growth_constant = 0.0;    // C2 estimate, max Vol / r^{2n+2}

  void write_csv(std::ostream& os) const;
};

BallVolumeTable estimate_constants(const LatticeDomain& d,
                                   const HorizontalGraph& g, Metric metric,
                                   std::span<const double> kappa,
                                   std::span<const std::size_t> centers,
                                   std::span<const double> radii);

/// Deterministic sample of nodes whose coordinates lie in the central
/// `fraction` of the box along every axis.
std::vector<std::size_t> central_nodes(const LatticeDomain& d, std::size_t count,
                                       double fraction, std::uint64_t seed);

}  // namespace heislab
