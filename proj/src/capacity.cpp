#include "heislab/capacity.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "heislab/error.hpp"
#include "heislab/sparse_factor.hpp"

namespace heislab {

namespace {

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, "capacity", msg); }

enum : signed char { kFree = -1, kZero = 0, kOne = 1 };

struct Layout {
  std::vector<signed char> state;   // kFree, or the fixed value
  std::vector<long> active;         // free node -> unknown index, -1 if frozen
  std::vector<std::size_t> unknowns;
  bool reaches = false;             // some edge path from F to the complement of G
};

// Free components touching only one kind of boundary value are frozen at that
// value; the rest form the unknowns of the Dirichlet problem.
Layout classify(const EnergyGraph& g, const Capacitor& c, Eigen::VectorXd& u) {
  const std::size_t nn = g.nodes();
  Layout l;
  l.state.assign(nn, kFree);
  u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nn));
  for (std::size_t v = 0; v < nn; ++v) {
    if (c.in_f[v]) {
      l.state[v] = kOne;
      u[static_cast<Eigen::Index>(v)] = 1.0;
    } else if (!c.in_g[v]) {
      l.state[v] = kZero;
    }
  }
  std::vector<std::vector<std::uint32_t>> adj(nn);
  for (const auto& e : g.edges()) {
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
    const auto sa = l.state[e.a], sb = l.state[e.b];
    if (sa != kFree && sb != kFree && sa != sb) l.reaches = true;
  }
  l.active.assign(nn, -1);
  std::vector<char> seen(nn, 0);
  std::vector<std::size_t> comp, stack;
  for (std::size_t s = 0; s < nn; ++s) {
    if (l.state[s] != kFree || seen[s]) continue;
    comp.clear();
    stack.assign(1, s);
    seen[s] = 1;
    bool one = false, zero = false;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      comp.push_back(v);
      for (auto w : adj[v]) {
        if (l.state[w] == kOne) one = true;
        if (l.state[w] == kZero) zero = true;
        if (l.state[w] == kFree && !seen[w]) {
          seen[w] = 1;
          stack.push_back(w);
        }
      }
    }
    if (one && zero) {
      l.reaches = true;
      std::sort(comp.begin(), comp.end());
      for (auto v : comp) l.unknowns.push_back(v);
    } else if (one) {
      for (auto v : comp) u[static_cast<Eigen::Index>(v)] = 1.0;
    }
  }
  std::sort(l.unknowns.begin(), l.unknowns.end());
  for (std::size_t i = 0; i < l.unknowns.size(); ++i) l.active[l.unknowns[i]] = static_cast<long>(i);
  return l;
}

// Minimizer of sum_e a_e (du)^2 over the unknowns, other values held fixed.
Eigen::VectorXd harmonic(const EnergyGraph& g, const Layout& l, const Eigen::VectorXd& u,
                         const std::vector<double>& a) {
  const auto m = static_cast<Eigen::Index>(l.unknowns.size());
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  const auto edges = g.edges();
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const auto ia = l.active[edges[k].a], ib = l.active[edges[k].b];
    if (ia < 0 && ib < 0) continue;
    const double w = a[k];
    if (ia >= 0) trip.emplace_back(ia, ia, w);
    if (ib >= 0) trip.emplace_back(ib, ib, w);
    if (ia >= 0 && ib >= 0) {
      trip.emplace_back(ia, ib, -w);
      trip.emplace_back(ib, ia, -w);
    } else if (ia >= 0) {
      rhs[ia] += w * u[edges[k].b];
    } else {
      rhs[ib] += w * u[edges[k].a];
    }
  }
  Eigen::SparseMatrix<double> lap(m, m);
  lap.setFromTriplets(trip.begin(), trip.end());
  SpdFactor f(lap);
  const Eigen::VectorXd x = f.solve(rhs);
  Eigen::VectorXd v = u;
  for (Eigen::Index i = 0; i < m; ++i) v[static_cast<Eigen::Index>(l.unknowns[i])] = x[i];
  return v;
}

void finish(const EnergyGraph& g, CapacityResult& r) {
  r.value = g.energy(r.u, r.p);
  double lip = 0.0;
  for (const auto& e : g.edges()) lip = std::max(lip, std::abs(r.u[e.b] - r.u[e.a]));
  r.lipschitz = lip / g.edge_length();
  r.clipped = r.u.size() > 0 && (r.u.minCoeff() < -1e-9 || r.u.maxCoeff() > 1.0 + 1e-9);
}

}  // namespace

EnergyGraph::EnergyGraph(const LatticeDomain& d, const HorizontalGraph& g,
                         std::span<const double> kappa)
    : nodes_(d.size()), n_(d.n()), lattice_(true), h_(d.h()), c_f_(kFrameNormalization) {
  if (kappa.size() != d.size()) fail(ErrorKind::precondition, "conformal factor size does not match the domain");
  const double c_n = wedge_constant(n_);
  const double cv = d.cell_volume();
  edge_length_ = g.edge_length();
  for (const auto& e : g.edges()) {
    if (e.src >= e.tgt) continue;
    edges_.push_back({e.src, e.tgt});
    kappa_e_.push_back(std::sqrt(kappa[e.src] * kappa[e.tgt]));
    base_.push_back(c_n * cv);
  }
  node_volume_.resize(nodes_);
  for (std::size_t v = 0; v < nodes_; ++v) node_volume_[v] = c_n * std::pow(kappa[v], n_ + 1) * cv;
}

EnergyGraph::EnergyGraph(std::size_t nodes, std::vector<Edge> edges, std::vector<double> weights)
    : nodes_(nodes), edges_(std::move(edges)), base_(std::move(weights)) {
  if (base_.size() != edges_.size()) fail(ErrorKind::precondition, "one weight per edge required");
  for (const auto& e : edges_)
    if (e.a >= nodes_ || e.b >= nodes_ || e.a == e.b) fail(ErrorKind::precondition, "invalid edge");
  for (double w : base_)
    if (!(w > 0.0)) fail(ErrorKind::precondition, "edge weights must be positive");
  node_volume_.assign(nodes_, 1.0);
}

std::vector<double> EnergyGraph::weights(double p) const {
  if (!lattice_) return base_;
  const double scale = std::pow(2.0 * n_, 0.5 * p - 1.0) / (std::pow(c_f_, 0.5 * p) * std::pow(h_, p));
  const double ke = n_ + 1 - 0.5 * p;
  std::vector<double> w(base_.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = base_[i] * std::pow(kappa_e_[i], ke) * scale;
  return w;
}

double EnergyGraph::energy(const Eigen::VectorXd& u, double p) const {
  const auto w = weights(p);
  double s = 0.0;
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const double du = std::abs(u[edges_[i].b] - u[edges_[i].a]);
    if (du > 0.0) s += w[i] * (p == 2.0 ? du * du : std::pow(du, p));
  }
  return s;
}

Capacitor Capacitor::from_masks(std::vector<char> f, std::vector<char> g) {
  if (f.size() != g.size()) fail(ErrorKind::precondition, "F and G masks differ in size");
  bool any = false;
  for (std::size_t v = 0; v < f.size(); ++v) {
    if (f[v] && !g[v]) fail(ErrorKind::precondition, "F is not contained in G");
    any = any || f[v];
  }
  if (!any) fail(ErrorKind::precondition, "F is empty");
  Capacitor c;
  c.in_f = std::move(f);
  c.in_g = std::move(g);
  return c;
}

Capacitor Capacitor::from_nodes(std::size_t nodes, std::span<const std::size_t> f,
                                std::span<const std::size_t> g) {
  std::vector<char> mf(nodes, 0), mg(nodes, 0);
  for (auto v : f) {
    if (v >= nodes) fail(ErrorKind::precondition, "node out of range");
    mf[v] = 1;
  }
  for (auto v : g) {
    if (v >= nodes) fail(ErrorKind::precondition, "node out of range");
    mg[v] = 1;
  }
  return from_masks(std::move(mf), std::move(mg));
}

Capacitor Capacitor::balls(std::span<const double> d, double r, double R) {
  if (!(0.0 < r && r <= R)) fail(ErrorKind::precondition, "ball capacitor needs 0 < r <= R");
  std::vector<char> f(d.size()), g(d.size());
  for (std::size_t v = 0; v < d.size(); ++v) {
    f[v] = d[v] < r;
    g[v] = d[v] < R;
  }
  return from_masks(std::move(f), std::move(g));
}

Capacitor Capacitor::annulus(std::span<const double> d, double r, double R) {
  if (!(0.0 <= r && r < R)) fail(ErrorKind::precondition, "annulus needs 0 <= r < R");
  std::vector<char> f(d.size()), g(d.size());
  for (std::size_t v = 0; v < d.size(); ++v) {
    f[v] = r <= d[v] && d[v] < R;
    g[v] = 0.5 * r <= d[v] && d[v] < 2.0 * R;
  }
  return from_masks(std::move(f), std::move(g));
}

CapacityResult cap_2(const EnergyGraph& g, const Capacitor& c) {
  if (c.size() != g.nodes()) fail(ErrorKind::precondition, "capacitor size does not match the graph");
  CapacityResult r;
  r.p = 2.0;
  const Layout l = classify(g, c, r.u);
  r.disconnected = !l.reaches;
  if (!l.unknowns.empty()) r.u = harmonic(g, l, r.u, g.weights(2.0));
  r.iterations = 1;
  finish(g, r);
  return r;
}

CapacityResult cap_p(const EnergyGraph& g, const Capacitor& c, double p, const CapacityOptions& opts) {
  if (!(p >= 2.0) || !std::isfinite(p)) fail(ErrorKind::precondition, "cap_p needs p >= 2");
  if (p == 2.0) return cap_2(g, c);
  if (c.size() != g.nodes()) fail(ErrorKind::precondition, "capacitor size does not match the graph");
  CapacityResult r;
  r.p = p;
  const Layout l = classify(g, c, r.u);
  r.disconnected = !l.reaches;
  const auto w = g.weights(p);
  const auto edges = g.edges();
  std::vector<std::size_t> moving;
  for (std::size_t k = 0; k < edges.size(); ++k)
    if (l.active[edges[k].a] >= 0 || l.active[edges[k].b] >= 0) moving.push_back(k);
  if (l.unknowns.empty()) {
    finish(g, r);
    return r;
  }

  r.u = harmonic(g, l, r.u, w);
  double obj = g.energy(r.u, p);
  std::vector<double> a(edges.size());
  std::vector<double> du(edges.size()), dd(edges.size());
  for (int it = 1;; ++it) {
    if (it > opts.max_iterations)
      fail(ErrorKind::solver, "p-capacity iteration cap reached (relative change " +
                                  std::to_string(r.residual) + ")");
    double top = 0.0;
    for (std::size_t k = 0; k < edges.size(); ++k) {
      du[k] = std::abs(r.u[edges[k].b] - r.u[edges[k].a]);
      a[k] = std::pow(du[k], p - 2.0);
      top = std::max(top, a[k]);
    }
    for (std::size_t k = 0; k < edges.size(); ++k) a[k] = w[k] * std::max(a[k], opts.weight_floor * top);
    const Eigen::VectorXd v = harmonic(g, l, r.u, a);
    const Eigen::VectorXd dir = v - r.u;
    for (auto k : moving) {
      du[k] = r.u[edges[k].b] - r.u[edges[k].a];
      dd[k] = dir[edges[k].b] - dir[edges[k].a];
    }
    // Exact line search: the objective along u + s dir is smooth and convex.
    auto slope = [&](double s, double* curv) {
      double f1 = 0.0, f2 = 0.0;
      for (auto k : moving) {
        const double x = du[k] + s * dd[k];
        const double ax = std::abs(x);
        if (ax == 0.0) continue;
        const double pw = std::pow(ax, p - 2.0);
        f1 += w[k] * p * pw * x * dd[k];
        f2 += w[k] * p * (p - 1.0) * pw * dd[k] * dd[k];
      }
      if (curv) *curv = f2;
      return f1;
    };
    double lo = 0.0, hi = 1.0;
    if (slope(0.0, nullptr) >= 0.0) {
      r.iterations = it;
      r.residual = 0.0;
      break;
    }
    while (slope(hi, nullptr) < 0.0 && hi < 1e6) {
      lo = hi;
      hi *= 2.0;
    }
    double s = 1.0 / (p - 1.0);
    if (!(s > lo && s < hi)) s = 0.5 * (lo + hi);
    for (int ls = 0; ls < 100; ++ls) {
      double curv = 0.0;
      const double f1 = slope(s, &curv);
      if (f1 < 0.0) lo = s; else hi = s;
      if (hi - lo <= 1e-14 * hi) break;
      double next = curv > 0.0 ? s - f1 / curv : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - s) <= 1e-15 * std::max(1.0, s)) break;
      s = next;
    }
    const Eigen::VectorXd trial = r.u + s * dir;
    const double val = g.energy(trial, p);
    r.iterations = it;
    if (val >= obj) {
      r.residual = 0.0;
      break;
    }
    r.residual = (obj - val) / obj;
    r.u = trial;
    obj = val;
    if (r.residual <= opts.tol) break;
  }
  finish(g, r);
  return r;
}

Eigen::VectorXd profile_test_function(std::span<const double> d, double r, double eps) {
  if (!(r > 0.0) || !(eps > 0.0) || !(eps < r))
    fail(ErrorKind::precondition, "profile needs 0 < eps < r (empty ramp otherwise)");
  bool ramp = false;
  Eigen::VectorXd u(static_cast<Eigen::Index>(d.size()));
  const double inner = r + 0.5 * eps, outer = 2.0 * r - 0.5 * eps;
  for (std::size_t v = 0; v < d.size(); ++v) {
    const double x = d[v];
    if (x >= r && x < 2.0 * r) ramp = true;
    u[static_cast<Eigen::Index>(v)] = x <= inner ? 1.0 : (x >= outer ? 0.0 : (outer - x) / (r - eps));
  }
  if (!ramp) fail(ErrorKind::precondition, "degenerate annulus: no node with r <= d < 2r");
  return u;
}

Eigen::VectorXd annulus_test_function(std::span<const double> d, const Annulus& a, double margin) {
  if (!(a.r >= 0.0 && a.r < a.R)) fail(ErrorKind::precondition, "annulus needs 0 <= r < R");
  if (!(margin > 0.0 && margin < 1.0)) fail(ErrorKind::precondition, "margin must lie in (0, 1)");
  Eigen::VectorXd u = profile_test_function(d, a.R, margin * a.R);
  if (a.r > 0.0) u -= profile_test_function(d, 0.5 * a.r, margin * 0.5 * a.r);
  return u;
}

HolderReport check_holder_chain(const EnergyGraph& g, std::span<const double> d, const Annulus& a,
                                const CapacityOptions& opts) {
  const Capacitor c = Capacitor::annulus(d, a.r, a.R);
  if (c.in_f == c.in_g) fail(ErrorKind::precondition, "annulus and its double coincide on the lattice");
  const int n = g.n();
  HolderReport rep;
  rep.cap2 = cap_2(g, c).value;
  rep.cap_top = cap_p(g, c, 2.0 * n + 2.0, opts).value;
  const auto vol = g.node_volume();
  for (std::size_t v = 0; v < c.size(); ++v)
    if (c.in_g[v]) rep.volume += vol[v];
  rep.rhs = std::pow(rep.cap_top, 1.0 / (n + 1)) * std::pow(rep.volume, double(n) / (n + 1));
  rep.margin = rep.rhs > 0.0 ? (rep.rhs - rep.cap2) / rep.rhs : 0.0;
  rep.holds = rep.cap2 <= rep.rhs;
  return rep;
}

ProfileBoundReport check_profile_bound(const EnergyGraph& g, std::span<const double> d, double r,
                                       double eps, double p, double h_metric) {
  ProfileBoundReport rep;
  rep.p = p;
  rep.r = r;
  rep.eps = eps;
  const Eigen::VectorXd u = profile_test_function(d, r, eps);
  rep.energy = g.energy(u, p);
  double vol = 0.0;
  const auto nv = g.node_volume();
  for (std::size_t v = 0; v < d.size(); ++v)
    if (d[v] < 2.0 * r) vol += nv[v];
  rep.bound = std::pow(2.0 * g.n(), 0.5 * p) * vol * std::pow(r - eps, -p);
  rep.discrete_c = (rep.energy / rep.bound - 1.0) * r / h_metric;
  return rep;
}

void write_capacity_csv(std::ostream& os, std::span<const CapacityRow> rows) {
  os << "p,r,R,value,iterations,margin\n";
  os.precision(17);
  for (const auto& r : rows)
    os << r.p << ',' << r.r << ',' << r.R << ',' << r.value << ',' << r.iterations << ',' << r.margin
       << '\n';
}

}  // namespace heislab
