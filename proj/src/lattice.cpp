#include "heislab/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <queue>
#include <random>

#include "heislab/error.hpp"

namespace heislab {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw Error(ErrorKind::precondition, "lattice", msg);
}

long integral_multiple(double value, double h, const char* what) {
  const double q = value / h;
  const double r = std::round(q);
  if (std::abs(q - r) > 1e-9 * std::max(1.0, std::abs(q))) {
    fail(std::string(what) + " is not an integer multiple of h");
  }
  return static_cast<long>(r);
}

}  // namespace

Metric parse_metric(const std::string& name) {
  if (name == "gauge") return Metric::gauge;
  if (name == "graph") return Metric::graph;
  throw Error(ErrorKind::config, "lattice", "unknown metric '" + name + "'");
}

std::string to_string(Metric m) { return m == Metric::gauge ? "gauge" : "graph"; }

DomainConfig DomainConfig::centered(int n, double horizontal_extent,
                                    double vertical_extent, double h) {
  DomainConfig cfg;
  cfg.n = n;
  cfg.h = h;
  cfg.lower.assign(2 * n + 1, -0.5 * horizontal_extent);
  cfg.upper.assign(2 * n + 1, 0.5 * horizontal_extent);
  cfg.lower[2 * n] = -0.5 * vertical_extent;
  cfg.upper[2 * n] = 0.5 * vertical_extent;
  return cfg;
}

DomainConfig DomainConfig::unit_box(int n, double h) {
  DomainConfig cfg;
  cfg.n = n;
  cfg.h = h;
  cfg.lower.assign(2 * n + 1, 0.0);
  cfg.upper.assign(2 * n + 1, 1.0);
  return cfg;
}

DomainConfig dilate(const DomainConfig& cfg, double eps) {
  if (!(eps > 0.0)) fail("dilation factor must be positive");
  DomainConfig out = cfg;
  const int t_axis = 2 * cfg.n;
  for (std::size_t a = 0; a < out.lower.size(); ++a) {
    const double s = static_cast<int>(a) == t_axis ? eps * eps : eps;
    out.lower[a] *= s;
    out.upper[a] *= s;
  }
  out.h *= eps;
  return out;
}

LatticeDomain::LatticeDomain(const DomainConfig& cfg) : cfg_(cfg), n_(cfg.n), h_(cfg.h) {
  if (n_ < 1) fail("n must be positive");
  const int na = 2 * n_ + 1;
  if (static_cast<int>(cfg.lower.size()) != na || static_cast<int>(cfg.upper.size()) != na) {
    fail("box corners must have 2n+1 coordinates");
  }
  if (!(h_ > 0.0) || !std::isfinite(h_)) fail("h must be positive");
  for (int a = 0; a < na; ++a) {
    if (!(cfg.upper[a] > cfg.lower[a])) fail("degenerate box along axis " + std::to_string(a));
  }
  ht_ = 2.0 * h_ * h_;
  t_lo_ = cfg.lower[na - 1];
  lo_.resize(na);
  counts_.resize(na);
  for (int a = 0; a < na - 1; ++a) {
    lo_[a] = integral_multiple(cfg.lower[a], h_, "lower corner");
    const long hi = integral_multiple(cfg.upper[a], h_, "upper corner");
    counts_[a] = hi - lo_[a] + 1;
  }
  // The t extent is rounded up to the next multiple of h_t.
  const double levels = (cfg.upper[na - 1] - cfg.lower[na - 1]) / ht_;
  lo_[na - 1] = 0;
  counts_[na - 1] = static_cast<long>(std::ceil(levels - 1e-9)) + 1;

  double total = 1.0;
  for (long c : counts_) total *= static_cast<double>(c);
  if (0.5 * total > static_cast<double>(cfg.max_nodes) ||
      total > static_cast<double>(std::numeric_limits<std::int32_t>::max())) {
    throw Error(ErrorKind::config, "lattice",
                "node count " + std::to_string(static_cast<long long>(0.5 * total)) +
                    " exceeds the configured cap " + std::to_string(cfg.max_nodes));
  }
  grid_points_ = static_cast<std::size_t>(total);

  // Lexicographic sweep over the grid keeping the active parity class.
  const std::size_t columns = grid_points_ / static_cast<std::size_t>(counts_[na - 1]);
  column_start_.reserve(columns + 1);
  index_.reserve(grid_points_ / 2 * na + na);
  std::vector<long> idx(lo_);
  for (std::size_t col = 0; col < columns; ++col) {
    column_start_.push_back(size_);
    const long first = parity_offset(idx);
    for (long k = first; k < counts_[na - 1]; k += 2) {
      idx[na - 1] = k;
      for (int a = 0; a < na; ++a) index_.push_back(static_cast<std::int32_t>(idx[a]));
      ++size_;
    }
    idx[na - 1] = 0;
    for (int a = na - 2; a >= 0; --a) {
      if (++idx[a] < lo_[a] + counts_[a]) break;
      idx[a] = lo_[a];
    }
  }
  column_start_.push_back(size_);
  if (size_ < 2) fail("domain must contain at least two nodes");
  cell_volume_ = 2.0 * std::pow(h_, 2 * n_) * ht_;
}

long LatticeDomain::parity_offset(std::span<const long> idx) const {
  long s = 0;
  for (int j = 0; j < n_; ++j) s += idx[j] * idx[n_ + j];
  return ((s % 2) + 2) % 2;
}

std::size_t LatticeDomain::column(std::span<const long> idx) const {
  std::size_t col = 0;
  for (int a = 0; a < axes() - 1; ++a) {
    col = col * static_cast<std::size_t>(counts_[a]) + static_cast<std::size_t>(idx[a] - lo_[a]);
  }
  return col;
}

long LatticeDomain::index(std::size_t node, int axis) const {
  return index_[node * static_cast<std::size_t>(axes()) + axis];
}

double LatticeDomain::coord(std::size_t node, int axis) const {
  const long i = index(node, axis);
  return axis == 2 * n_ ? t_lo_ + static_cast<double>(i) * ht_ : static_cast<double>(i) * h_;
}

Point LatticeDomain::point(std::size_t node) const {
  std::vector<double> x(n_), y(n_);
  for (int j = 0; j < n_; ++j) {
    x[j] = coord(node, j);
    y[j] = coord(node, n_ + j);
  }
  return Point(std::move(x), std::move(y), coord(node, 2 * n_));
}

std::optional<std::size_t> LatticeDomain::ordinal(std::span<const long> idx) const {
  for (int a = 0; a < axes(); ++a) {
    const long local = idx[a] - lo_[a];
    if (local < 0 || local >= counts_[a]) return std::nullopt;
  }
  const long k = idx[axes() - 1];
  const long off = parity_offset(idx);
  if (((k - off) % 2 + 2) % 2 != 0) return std::nullopt;
  return column_start_[column(idx)] + static_cast<std::size_t>((k - off) / 2);
}

std::size_t LatticeDomain::nearest_node(const Point& p) const {
  std::vector<long> idx(axes());
  for (int a = 0; a < axes(); ++a) {
    double v;
    if (a < n_) {
      v = p.x()[a] / h_;
    } else if (a < 2 * n_) {
      v = p.y()[a - n_] / h_;
    } else {
      v = (p.t() - t_lo_) / ht_;
    }
    idx[a] = std::clamp(static_cast<long>(std::lround(v)), lo_[a], lo_[a] + counts_[a] - 1);
  }
  if (auto ord = ordinal(idx)) return *ord;
  // Off-parity grid point: move one t level towards the interior.
  const int ta = axes() - 1;
  idx[ta] += idx[ta] + 1 < counts_[ta] ? 1 : -1;
  return *ordinal(idx);
}

HorizontalGraph::HorizontalGraph(const LatticeDomain& d)
    : n_(d.n()), h_(d.h()), offsets_(d.size() + 1, 0) {
  const int n = d.n();
  const int ta = 2 * n;
  edges_.reserve(d.size() * 4 * n);
  std::vector<long> idx(d.axes()), tgt(d.axes());
  for (std::size_t v = 0; v < d.size(); ++v) {
    for (int a = 0; a < d.axes(); ++a) idx[a] = d.index(v, a);
    for (int j = 0; j < 2 * n; ++j) {
      for (int s : {+1, -1}) {
        tgt = idx;
        tgt[j] += s;
        // X_j: t += 2 y h = J h_t; Y_j: t -= 2 x h = -I h_t (J, I absolute).
        const long shear = j < n ? s * idx[n + j] : -s * idx[j - n];
        tgt[ta] += shear;
        if (auto w = d.ordinal(tgt)) {
          edges_.push_back(HorizontalEdge{static_cast<std::uint32_t>(v),
                                          static_cast<std::uint32_t>(*w),
                                          static_cast<std::uint16_t>(j),
                                          static_cast<std::int8_t>(s)});
        }
      }
    }
    offsets_[v + 1] = edges_.size();
  }
}

double HorizontalGraph::edge_length() const { return std::sqrt(kFrameNormalization) * h_; }

std::vector<std::uint32_t> HorizontalGraph::components(std::size_t* count) const {
  const std::size_t nv = node_count();
  constexpr auto unset = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> label(nv, unset);
  std::vector<std::size_t> stack;
  std::uint32_t next = 0;
  for (std::size_t s = 0; s < nv; ++s) {
    if (label[s] != unset) continue;
    label[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      for (const auto& e : out_edges(v)) {
        if (label[e.tgt] == unset) {
          label[e.tgt] = next;
          stack.push_back(e.tgt);
        }
      }
    }
    ++next;
  }
  if (count) *count = next;
  return label;
}

std::vector<double> gauge_distances(const LatticeDomain& d, std::size_t center) {
  const int n = d.n();
  std::vector<double> cz(2 * n);
  for (int a = 0; a < 2 * n; ++a) cz[a] = d.coord(center, a);
  const double ct = d.coord(center, 2 * n);
  std::vector<double> out(d.size());
  for (std::size_t v = 0; v < d.size(); ++v) {
    // c^{-1} v = (w - z, s - t - 2 Im<z, w>)
    double r2 = 0.0, twist = 0.0;
    for (int j = 0; j < n; ++j) {
      const double wx = d.coord(v, j), wy = d.coord(v, n + j);
      const double dx = wx - cz[j], dy = wy - cz[n + j];
      r2 += dx * dx + dy * dy;
      twist += cz[n + j] * wx - cz[j] * wy;
    }
    const double dt = d.coord(v, 2 * n) - ct - 2.0 * twist;
    out[v] = std::sqrt(std::sqrt(r2 * r2 + dt * dt));
  }
  return out;
}

std::vector<double> graph_distances(const HorizontalGraph& g, std::size_t center) {
  const double len = g.edge_length();
  std::vector<double> dist(g.node_count(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[center] = 0.0;
  heap.emplace(0.0, center);
  while (!heap.empty()) {
    const auto [dv, v] = heap.top();
    heap.pop();
    if (dv > dist[v]) continue;
    for (const auto& e : g.out_edges(v)) {
      const double cand = dv + len;
      if (cand < dist[e.tgt]) {
        dist[e.tgt] = cand;
        heap.emplace(cand, e.tgt);
      }
    }
  }
  return dist;
}

std::vector<double> distances_from(const LatticeDomain& d, const HorizontalGraph& g,
                                   Metric metric, std::size_t center) {
  return metric == Metric::gauge ? gauge_distances(d, center) : graph_distances(g, center);
}

double cc_distance_graph(const HorizontalGraph& g, std::size_t p, std::size_t q) {
  if (p >= g.node_count() || q >= g.node_count()) fail("node out of range");
  const double dist = graph_distances(g, p)[q];
  if (!std::isfinite(dist)) {
    throw Error(ErrorKind::precondition, "lattice",
                "node " + std::to_string(q) + " unreachable from " + std::to_string(p) +
                    " (horizontal graph disconnected)");
  }
  return dist;
}

BallVolume estimate_ball_volume(const LatticeDomain& d, const HorizontalGraph& g,
                                std::span<const double> distances, double r,
                                std::span<const double> kappa, int m) {
  if (!(r > 0.0)) fail("ball radius must be positive");
  const double cell = wedge_constant(d.n()) * d.cell_volume();
  BallVolume out;
  for (std::size_t v = 0; v < distances.size(); ++v) {
    if (!(distances[v] < r)) continue;
    out.volume += kappa.empty() ? cell : cell * std::pow(kappa[v], m);
    ++out.cells;
    out.exits_domain = out.exits_domain || g.is_boundary(v);
  }
  return out;
}

BallVolume estimate_ball_volume(const LatticeDomain& d, const HorizontalGraph& g,
                                Metric metric, std::size_t center, double r,
                                std::span<const double> kappa, int m) {
  const auto dist = distances_from(d, g, metric, center);
  return estimate_ball_volume(d, g, dist, r, kappa, m);
}

void BallVolumeTable::write_csv(std::ostream& os) const {
  os << "center_index,r,volume,doubling_ratio\n";
  for (const auto& row : rows) {
    os << row.center << ',' << row.r << ',' << row.volume << ',' << row.doubling_ratio << '\n';
  }
}

BallVolumeTable estimate_constants(const LatticeDomain& d, const HorizontalGraph& g,
                                   Metric metric, std::span<const double> kappa,
                                   std::span<const std::size_t> centers,
                                   std::span<const double> radii) {
  if (centers.size() < 10) fail("estimate_constants needs at least 10 sample centers");
  if (radii.empty()) fail("estimate_constants needs at least one radius");
  const int m = d.n() + 1;
  const double growth_power = 2.0 * (d.n() + 1);
  BallVolumeTable table;
  std::vector<double> lx, ly;
  for (std::size_t c : centers) {
    const auto dist = distances_from(d, g, metric, c);
    for (double r : radii) {
      const BallVolume inner = estimate_ball_volume(d, g, dist, r, kappa, m);
      const BallVolume outer = estimate_ball_volume(d, g, dist, 2.0 * r, kappa, m);
      const double ratio = outer.volume / inner.volume;
      table.rows.push_back({c, r, inner.volume, ratio, inner.exits_domain});
      table.doubling_constant = std::max(table.doubling_constant, ratio);
      table.growth_constant =
          std::max(table.growth_constant, inner.volume / std::pow(r, growth_power));
      if (!inner.exits_domain) {
        lx.push_back(std::log(r));
        ly.push_back(std::log(inner.volume));
      }
    }
  }
  if (lx.size() >= 2) {
    const double k = static_cast<double>(lx.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      mx += lx[i];
      my += ly[i];
    }
    mx /= k;
    my /= k;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxx += (lx[i] - mx) * (lx[i] - mx);
      sxy += (lx[i] - mx) * (ly[i] - my);
      syy += (ly[i] - my) * (ly[i] - my);
    }
    if (sxx > 0) {
      table.growth_exponent = sxy / sxx;
      table.growth_fit_r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
    }
  }
  return table;
}

std::vector<std::size_t> central_nodes(const LatticeDomain& d, std::size_t count,
                                       double fraction, std::uint64_t seed) {
  std::vector<std::size_t> pool;
  const auto& cfg = d.config();
  for (std::size_t v = 0; v < d.size(); ++v) {
    bool inside = true;
    for (int a = 0; a < d.axes() && inside; ++a) {
      const double mid = 0.5 * (cfg.lower[a] + cfg.upper[a]);
      const double half = 0.5 * fraction * (cfg.upper[a] - cfg.lower[a]);
      inside = std::abs(d.coord(v, a) - mid) <= half;
    }
    if (inside) pool.push_back(v);
  }
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates with raw engine output keeps the draw
  // independent of the standard library's distribution implementations.
  const std::size_t take = std::min(count, pool.size());
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(take);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace heislab
