#include "heislab/forms.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "heislab/error.hpp"
#include "heislab/expression.hpp"

namespace heislab {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw Error(ErrorKind::precondition, "forms", msg);
}

// Uniform double in [0, 1) from the raw 64-bit engine output.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::vector<double> node_coords(const LatticeDomain& d, std::size_t v) {
  std::vector<double> c(d.axes());
  for (int a = 0; a < d.axes(); ++a) c[a] = d.coord(v, a);
  return c;
}

}  // namespace

KappaSpec KappaSpec::constant(double v) {
  KappaSpec s;
  s.kind = Kind::constant;
  s.value = v;
  return s;
}

KappaSpec KappaSpec::from_expression(std::string text) {
  KappaSpec s;
  s.kind = Kind::expression;
  s.expression = std::move(text);
  return s;
}

KappaSpec KappaSpec::fourier(std::uint64_t seed, int modes, double amplitude) {
  KappaSpec s;
  s.kind = Kind::fourier;
  s.seed = seed;
  s.modes = modes;
  s.amplitude = amplitude;
  return s;
}

std::string KappaSpec::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind) {
    case Kind::constant: os << "constant(" << value << ")"; break;
    case Kind::expression: os << "expression(" << expression << ")"; break;
    case Kind::fourier:
      os << "fourier(seed=" << seed << ",modes=" << modes << ",kmax=" << max_wavenumber
         << ",amplitude=" << amplitude << ")";
      break;
  }
  return os.str();
}

double ConformalFactor::min() const { return *std::min_element(values.begin(), values.end()); }
double ConformalFactor::max() const { return *std::max_element(values.begin(), values.end()); }

ConformalFactor make_kappa(const LatticeDomain& d, const KappaSpec& spec) {
  ConformalFactor k;
  k.provenance = spec.describe();
  k.values.resize(d.size());
  switch (spec.kind) {
    case KappaSpec::Kind::constant:
      std::fill(k.values.begin(), k.values.end(), spec.value);
      break;
    case KappaSpec::Kind::expression: {
      const Expression e = Expression::parse(spec.expression, d.n());
      for (std::size_t v = 0; v < d.size(); ++v) k.values[v] = e.evaluate(node_coords(d, v));
      break;
    }
    case KappaSpec::Kind::fourier: {
      if (spec.modes < 1 || spec.max_wavenumber < 1) fail("fourier spec needs modes >= 1");
      if (!(spec.amplitude >= 0.0)) fail("fourier amplitude must be nonnegative");
      std::mt19937_64 rng(spec.seed);
      const int na = d.axes();
      const auto& cfg = d.config();
      struct Mode {
        std::vector<double> k;
        double coef, phase;
      };
      std::vector<Mode> modes(spec.modes);
      const int span = 2 * spec.max_wavenumber + 1;
      for (auto& m : modes) {
        m.k.resize(na);
        for (int a = 0; a < na; ++a) {
          const int kk = static_cast<int>(rng() % span) - spec.max_wavenumber;
          m.k[a] = 2.0 * std::numbers::pi * kk / (cfg.upper[a] - cfg.lower[a]);
        }
        m.coef = 2.0 * unit(rng) - 1.0;
        m.phase = 2.0 * std::numbers::pi * unit(rng);
      }
      double peak = 0.0;
      for (std::size_t v = 0; v < d.size(); ++v) {
        double f = 0.0;
        for (const auto& m : modes) {
          double arg = m.phase;
          for (int a = 0; a < na; ++a) arg += m.k[a] * (d.coord(v, a) - cfg.lower[a]);
          f += m.coef * std::cos(arg);
        }
        k.values[v] = f;
        peak = std::max(peak, std::abs(f));
      }
      const double scale = peak > 0.0 ? spec.amplitude / peak : 0.0;
      for (double& val : k.values) val = std::exp(scale * val);
      break;
    }
  }
  for (std::size_t v = 0; v < k.values.size(); ++v) {
    if (!(k.values[v] > 0.0) || !std::isfinite(k.values[v])) {
      throw Error(ErrorKind::config, "forms",
                  "conformal factor is not positive at node " + std::to_string(v) + " (" +
                      spec.describe() + ")");
    }
  }
  return k;
}

MeasureField make_measure(const LatticeDomain& d, std::vector<double> density,
                          std::string provenance) {
  if (density.size() != d.size()) fail("measure density has the wrong size");
  MeasureField m;
  m.provenance = std::move(provenance);
  double biggest = 0.0;
  for (double s : density) {
    if (!(s >= 0.0) || !std::isfinite(s)) fail("measure density must be finite and nonnegative");
    m.total_mass += s * d.cell_volume();
    biggest = std::max(biggest, s * d.cell_volume());
  }
  if (!(m.total_mass > 0.0)) fail("measure has zero total mass");
  if (biggest > kAtomCap * m.total_mass) {
    fail("measure is atomic: one node carries more than 50% of the mass");
  }
  m.density = std::move(density);
  return m;
}

MeasureField volume_measure(const LatticeDomain& d, const ConformalFactor& kappa) {
  const double cn = wedge_constant(d.n());
  std::vector<double> density(d.size());
  for (std::size_t v = 0; v < d.size(); ++v) density[v] = cn * std::pow(kappa.values[v], d.n() + 1);
  return make_measure(d, std::move(density), "volume(" + kappa.provenance + ")");
}

MeasureField measure_from_expression(const LatticeDomain& d, const std::string& text) {
  const Expression e = Expression::parse(text, d.n());
  std::vector<double> density(d.size());
  for (std::size_t v = 0; v < d.size(); ++v) density[v] = e.evaluate(node_coords(d, v));
  return make_measure(d, std::move(density), "expression(" + text + ")");
}

double volume_total(const LatticeDomain& d, const ConformalFactor& kappa) {
  const double cn = wedge_constant(d.n());
  double sum = 0.0;
  for (double k : kappa.values) sum += std::pow(k, d.n() + 1);
  return cn * sum * d.cell_volume();
}

std::vector<double> edge_weights(const LatticeDomain& d, const HorizontalGraph& g,
                                 std::span<const double> kappa) {
  const double base =
      wedge_constant(d.n()) / kFrameNormalization * d.cell_volume() / (2.0 * d.h() * d.h());
  std::vector<double> w;
  w.reserve(g.edges().size());
  for (const auto& e : g.edges()) {
    const double ke = std::sqrt(kappa[e.src] * kappa[e.tgt]);
    w.push_back(base * std::pow(ke, d.n()));
  }
  return w;
}

Eigen::SparseMatrix<double> stiffness_from_edges(std::size_t nodes,
                                                 std::span<const HorizontalEdge> edges,
                                                 std::span<const double> weights) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(edges.size() * 4);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto s = static_cast<int>(edges[i].src), t = static_cast<int>(edges[i].tgt);
    const double w = weights[i];
    trip.emplace_back(s, s, w);
    trip.emplace_back(t, t, w);
    trip.emplace_back(s, t, -w);
    trip.emplace_back(t, s, -w);
  }
  const auto nn = static_cast<Eigen::Index>(nodes);
  Eigen::SparseMatrix<double> S(nn, nn);
  S.setFromTriplets(trip.begin(), trip.end());
  S.makeCompressed();
  return S;
}

QuadraticFormPair assemble_forms(const LatticeDomain& d, const HorizontalGraph& g,
                                 const ConformalFactor& kappa) {
  if (kappa.values.size() != d.size()) fail("conformal factor size does not match the domain");
  QuadraticFormPair q;
  q.n = d.n();
  q.c_f = kFrameNormalization;
  q.c_n = wedge_constant(d.n());
  q.provenance = kappa.provenance;
  q.edge_weights = edge_weights(d, g, kappa.values);
  q.stiffness = stiffness_from_edges(d.size(), g.edges(), q.edge_weights);
  q.mass.resize(static_cast<Eigen::Index>(d.size()));
  for (std::size_t v = 0; v < d.size(); ++v) {
    q.mass[static_cast<Eigen::Index>(v)] =
        (q.c_n * std::pow(kappa.values[v], d.n() + 1)) * d.cell_volume();
  }
  g.components(&q.components);
  return q;
}

Eigen::VectorXd assemble_measure_mass(const LatticeDomain& d, const MeasureField& sigma) {
  if (sigma.density.size() != d.size()) fail("measure size does not match the domain");
  if (!(sigma.total_mass > 0.0)) fail("measure has zero total mass");
  Eigen::VectorXd m(static_cast<Eigen::Index>(d.size()));
  for (std::size_t v = 0; v < d.size(); ++v) {
    m[static_cast<Eigen::Index>(v)] = sigma.density[v] * d.cell_volume();
  }
  return m;
}

QuadraticFormPair assemble_euclidean_control(const LatticeDomain& d) {
  // Elliptic 6-neighbour stencil on the same parity coset: a horizontal step
  // that changes the parity class goes to the two diagonal neighbours one
  // t-level up and down (half weight each); the t-step spans two levels.
  std::vector<HorizontalEdge> edges;
  std::vector<double> weights;
  std::vector<long> idx(d.axes());
  const double cv = d.cell_volume();
  const int n = d.n();
  const int ta = 2 * n;
  auto add = [&](std::size_t v, int a, int s, double w) {
    if (auto t = d.ordinal(idx)) {
      edges.push_back({static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(*t),
                       static_cast<std::uint16_t>(a), static_cast<std::int8_t>(s)});
      weights.push_back(w);
    }
  };
  for (std::size_t v = 0; v < d.size(); ++v) {
    for (int a = 0; a < d.axes(); ++a) idx[a] = d.index(v, a);
    for (int a = 0; a < 2 * n; ++a) {
      const long partner = idx[a < n ? a + n : a - n];
      const double w = cv / (2.0 * d.h() * d.h());
      for (int s : {+1, -1}) {
        idx[a] += s;
        if (partner % 2 == 0) {
          add(v, a, s, w);
        } else {
          for (int dt : {+1, -1}) {
            idx[ta] += dt;
            add(v, a, s, 0.5 * w);
            idx[ta] -= dt;
          }
        }
        idx[a] -= s;
      }
    }
    const double st = 2.0 * d.ht();
    for (int s : {+1, -1}) {
      idx[ta] += 2 * s;
      add(v, ta, s, cv / (2.0 * st * st));
      idx[ta] -= 2 * s;
    }
  }
  QuadraticFormPair q;
  q.n = n;
  q.c_f = 1.0;
  q.c_n = 1.0;
  q.provenance = "euclidean-control";
  q.edge_weights = weights;
  q.stiffness = stiffness_from_edges(d.size(), edges, weights);
  q.mass = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(d.size()), cv);
  return q;
}

void QuadraticFormPair::write_coo(std::ostream& os) const {
  os.precision(17);
  os << "# stiffness\nrow,col,value\n";
  for (int k = 0; k < stiffness.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(stiffness, k); it; ++it) {
      os << it.row() << ',' << it.col() << ',' << it.value() << '\n';
    }
  }
  os << "# mass\nrow,col,value\n";
  for (Eigen::Index i = 0; i < mass.size(); ++i) os << i << ',' << i << ',' << mass[i] << '\n';
}

}  // namespace heislab
