#include "heislab/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "heislab/error.hpp"

namespace heislab {

namespace {

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, "decomposition", msg);
}

constexpr double kInf = std::numeric_limits<double>::infinity();

double above(double x) { return std::nextafter(x, kInf); }

// Smallest r with r/2 > a in floating point.
double inner_radius(double a) {
  double r = above(2.0 * a);
  while (!(0.5 * r > a)) r = above(r);
  return r;
}

// Witness of one annulus: the difference of ball profiles, written out
// without the non-degeneracy checks of annulus_test_function (an empty ramp
// is harmless here).
Eigen::VectorXd profile_witness(std::span<const double> d, const Annulus& a, double margin) {
  auto prof = [&](double r, double eps, double x) {
    const double inner = r + 0.5 * eps, outer = 2.0 * r - 0.5 * eps;
    return x <= inner ? 1.0 : (x >= outer ? 0.0 : (outer - x) / (r - eps));
  };
  Eigen::VectorXd u(static_cast<Eigen::Index>(d.size()));
  for (std::size_t v = 0; v < d.size(); ++v) {
    double val = prof(a.R, margin * a.R, d[v]);
    if (a.r > 0.0) val -= prof(0.5 * a.r, margin * 0.5 * a.r, d[v]);
    u[static_cast<Eigen::Index>(v)] = val;
  }
  return u;
}

}  // namespace

bool Decomposition::doubles_disjoint(std::size_t nodes) const {
  std::vector<char> seen(nodes, 0);
  for (const auto& a : annuli) {
    for (auto v : a.double_nodes) {
      if (v >= nodes || seen[v]) return false;
      seen[v] = 1;
    }
  }
  return true;
}

void Decomposition::write_csv(std::ostream& os) const {
  os << "i,center_index,r,R,mass\n";
  os.precision(17);
  for (std::size_t i = 0; i < annuli.size(); ++i) {
    const auto& a = annuli[i];
    os << i + 1 << ',' << a.annulus.center << ',' << a.annulus.r << ',' << a.annulus.R << ','
       << a.mass << '\n';
  }
}

AnnulusSearch::AnnulusSearch(const LatticeDomain& d, const HorizontalGraph& g, Metric metric,
                             std::span<const double> node_mass, std::string measure,
                             const DecompositionOptions& opts)
    : domain_(&d), graph_(&g), metric_(metric), mass_(node_mass.begin(), node_mass.end()),
      measure_(std::move(measure)), max_halvings_(opts.max_halvings) {
  const std::size_t nn = d.size();
  if (mass_.size() != nn) fail(ErrorKind::precondition, "measure size does not match the domain");
  double biggest = 0.0;
  for (double m : mass_) {
    if (!(m >= 0.0) || !std::isfinite(m)) fail(ErrorKind::precondition, "node masses must be finite and nonnegative");
    total_ += m;
    biggest = std::max(biggest, m);
  }
  if (!(total_ > 0.0)) fail(ErrorKind::precondition, "measure has zero total mass");
  if (biggest > kAtomCap * total_)
    fail(ErrorKind::precondition, "measure is atomic: one node carries more than 50% of the mass");

  std::size_t count = std::min({opts.candidates, nn, std::max<std::size_t>(1, opts.memory_budget / nn)});
  for (std::size_t i = 0; i < count; ++i) centers_.push_back((2 * i + 1) * nn / (2 * count));
  order_.resize(count);
  sorted_.resize(count);
  for (std::size_t c = 0; c < count; ++c) {
    const auto dist = distances(centers_[c]);
    auto& ord = order_[c];
    ord.resize(nn);
    std::iota(ord.begin(), ord.end(), 0u);
    std::stable_sort(ord.begin(), ord.end(), [&](auto a, auto b) { return dist[a] < dist[b]; });
    auto& s = sorted_[c];
    s.resize(nn);
    for (std::size_t i = 0; i < nn; ++i) s[i] = dist[ord[i]];
  }
}

std::vector<double> AnnulusSearch::distances(std::size_t center) const {
  return distances_from(*domain_, *graph_, metric_, center);
}

std::optional<Decomposition> AnnulusSearch::attempt(std::size_t k, double target) const {
  const std::size_t nn = mass_.size();
  std::vector<char> used(nn, 0);
  Decomposition dec;
  dec.k = k;
  dec.metric = metric_;
  dec.measure = measure_;
  dec.total_mass = total_;
  std::vector<double> prefix(nn + 1);
  for (std::size_t i = 0; i < k; ++i) {
    struct Best {
      std::size_t cand = 0;
      double r = 0, R = 0, mass = 0, dmass = kInf;
    } best;
    for (std::size_t c = 0; c < centers_.size(); ++c) {
      const auto& ord = order_[c];
      const auto& s = sorted_[c];
      prefix[0] = 0.0;
      for (std::size_t j = 0; j < nn; ++j) prefix[j + 1] = prefix[j] + (used[ord[j]] ? 0.0 : mass_[ord[j]]);
      auto pos = [&](double x) {  // first sorted position with distance >= x
        return static_cast<std::size_t>(std::lower_bound(s.begin(), s.end(), x) - s.begin());
      };
      std::size_t start = 0;
      while (start < nn) {
        // Maximal run [start, end) of sorted positions free of used nodes.
        if (used[ord[start]]) {
          ++start;
          continue;
        }
        std::size_t end = start;
        while (end < nn && !used[ord[end]]) ++end;
        const double r = start == 0 ? 0.0 : inner_radius(s[start - 1]);
        const double b = end == nn ? kInf : s[end];
        std::size_t q = pos(r);
        if (q < end) {
          // Smallest R with mu({r <= d < R}) >= target, ties included.
          const auto it = std::lower_bound(prefix.begin() + q + 1, prefix.begin() + end + 1,
                                           prefix[q] + target * (1.0 - 1e-12));
          if (it != prefix.begin() + end + 1) {
            std::size_t j = static_cast<std::size_t>(it - prefix.begin()) - 1;
            while (j + 1 < nn && s[j + 1] == s[j]) ++j;
            const double R = std::max(above(s[j]), above(r));
            if (j < end && 2.0 * R <= b) {
              const std::size_t lo = pos(0.5 * r), hi = pos(2.0 * R);
              const double dmass = prefix[hi] - prefix[lo];
              if (dmass < best.dmass) best = {c, r, R, prefix[j + 1] - prefix[q], dmass};
            }
          }
        }
        start = end;
      }
    }
    if (!std::isfinite(best.dmass)) return std::nullopt;
    PlacedAnnulus pa;
    pa.annulus = {centers_[best.cand], best.r, best.R};
    pa.mass = best.mass;
    pa.double_mass = best.dmass;
    const auto& ord = order_[best.cand];
    const auto& s = sorted_[best.cand];
    for (std::size_t j = 0; j < nn; ++j) {
      if (s[j] >= 2.0 * best.R) break;
      if (s[j] >= 0.5 * best.r) {
        if (used[ord[j]]) fail(ErrorKind::solver, "internal: double overlaps an earlier annulus");
        pa.double_nodes.push_back(ord[j]);
        if (s[j] >= best.r && s[j] < best.R) pa.nodes.push_back(ord[j]);
      }
    }
    for (auto v : pa.double_nodes) used[v] = 1;
    std::sort(pa.nodes.begin(), pa.nodes.end());
    std::sort(pa.double_nodes.begin(), pa.double_nodes.end());
    dec.annuli.push_back(std::move(pa));
  }
  double low = kInf;
  for (const auto& a : dec.annuli) low = std::min(low, a.mass);
  dec.achieved_c = low * static_cast<double>(k) / total_;
  return dec;
}

Decomposition AnnulusSearch::decompose(std::size_t k) const {
  if (k < 1) fail(ErrorKind::precondition, "k must be positive");
  double target = total_ / (2.0 * static_cast<double>(k));
  for (int halvings = 0; halvings <= max_halvings_; ++halvings, target *= 0.5) {
    if (auto dec = attempt(k, target)) {
      dec->target_halvings = halvings;
      return *dec;
    }
  }
  fail(ErrorKind::infeasible, "cannot place " + std::to_string(k) +
                                  " annuli with disjoint doubles on this lattice");
}

Decomposition decompose_annuli(const LatticeDomain& d, const HorizontalGraph& g, Metric metric,
                               const MeasureField& measure, std::size_t k,
                               const DecompositionOptions& opts) {
  const Eigen::VectorXd m = assemble_measure_mass(d, measure);
  AnnulusSearch search(d, g, metric, std::span<const double>(m.data(), static_cast<std::size_t>(m.size())),
                       measure.provenance, opts);
  return search.decompose(k);
}

ConstantChain compute_constant_chain(int n, double c_dec, double growth, double doubling) {
  if (n < 1 || !(c_dec > 0.0) || !(growth > 0.0))
    fail(ErrorKind::precondition, "constant chain needs n >= 1 and positive constants");
  ConstantChain ch;
  ch.n = n;
  ch.doubling = doubling;
  ch.growth = growth;
  ch.c_dec = c_dec;
  const double q = n + 1.0;
  ch.cap1 = std::pow(8.0 * n, q) * growth;
  // Subadditivity over (B(r/2), B(r)) and (B(R), B(2R)) at p = 2n+2.
  ch.annulus_cap = std::pow(2.0, 2.0 * q) * ch.cap1;
  ch.c_bar = std::pow(ch.annulus_cap, 1.0 / q);
  ch.C = std::pow(4.0 * ch.c_bar / c_dec, -q);
  ch.C_star = std::pow(ch.C, -1.0 / q);
  return ch;
}

WitnessSet build_witnesses(const QuadraticFormPair& forms, const Eigen::VectorXd& mass,
                           const AnnulusSearch& search, const Decomposition& dec,
                           const CertifyOptions& opts) {
  const auto nn = static_cast<Eigen::Index>(forms.size());
  if (mass.size() != nn) fail(ErrorKind::precondition, "mass size does not match the forms");
  const auto cols = static_cast<Eigen::Index>(dec.annuli.size() + (opts.constant ? 1 : 0));
  WitnessSet w;
  w.functions = Eigen::MatrixXd::Zero(nn, cols);
  std::optional<EnergyGraph> eg;
  for (std::size_t i = 0; i < dec.annuli.size(); ++i) {
    const auto& pa = dec.annuli[i];
    const auto d = search.distances(pa.annulus.center);
    Eigen::VectorXd u;
    if (opts.witness == Witness::profile) {
      u = profile_witness(d, pa.annulus, opts.margin);
    } else {
      if (!eg) {
        std::vector<EnergyGraph::Edge> edges;
        std::vector<double> wts;
        for (int c = 0; c < forms.stiffness.outerSize(); ++c)
          for (Eigen::SparseMatrix<double>::InnerIterator it(forms.stiffness, c); it; ++it)
            if (it.row() < it.col() && it.value() < 0.0) {
              edges.push_back({static_cast<std::uint32_t>(it.row()), static_cast<std::uint32_t>(it.col())});
              wts.push_back(-it.value());
            }
        eg.emplace(forms.size(), std::move(edges), std::move(wts));
      }
      std::vector<char> f(forms.size(), 0), gm(forms.size(), 0);
      for (auto v : pa.nodes) f[v] = 1;
      for (auto v : pa.double_nodes) gm[v] = 1;
      u = cap_2(*eg, Capacitor::from_masks(std::move(f), std::move(gm))).u;
    }
    // Restrict to the double explicitly so supports are disjoint by construction.
    Eigen::VectorXd col = Eigen::VectorXd::Zero(nn);
    for (auto v : pa.double_nodes) col[v] = u[v];
    w.functions.col(static_cast<Eigen::Index>(i)) = col;
  }
  if (opts.constant) w.functions.col(cols - 1).setOnes();

  const Eigen::MatrixXd su = forms.stiffness * w.functions;
  const Eigen::MatrixXd mu = mass.asDiagonal() * w.functions;
  Eigen::MatrixXd sh = w.functions.transpose() * su;
  Eigen::MatrixXd mh = w.functions.transpose() * mu;
  sh = 0.5 * (sh + sh.transpose()).eval();
  mh = 0.5 * (mh + mh.transpose()).eval();
  for (Eigen::Index c = 0; c < cols; ++c)
    w.quotients.push_back(mh(c, c) > 0.0 ? sh(c, c) / mh(c, c) : kInf);

  // Ritz values on the span; directions of (numerically) zero mass are dropped,
  // which only shrinks the test space.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> me(mh);
  const double top = me.eigenvalues().cwiseAbs().maxCoeff();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index c = 0; c < cols; ++c)
    if (me.eigenvalues()[c] > 1e-12 * top) keep.push_back(c);
  Eigen::MatrixXd basis(cols, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j)
    basis.col(static_cast<Eigen::Index>(j)) =
        me.eigenvectors().col(keep[j]) / std::sqrt(me.eigenvalues()[keep[j]]);
  Eigen::MatrixXd red = basis.transpose() * sh * basis;
  red = 0.5 * (red + red.transpose()).eval();
  if (red.size() > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> re(red, Eigen::EigenvaluesOnly);
    w.ritz.assign(re.eigenvalues().data(), re.eigenvalues().data() + re.eigenvalues().size());
  }
  return w;
}

CertifiedBound certify_counting_bound(const WitnessSet& w, double lambda) {
  CertifiedBound b;
  b.lambda = lambda;
  b.quotients = w.quotients;
  if (!(lambda > 0.0)) return b;
  b.certified = static_cast<std::size_t>(std::lower_bound(w.ritz.begin(), w.ritz.end(), lambda) - w.ritz.begin());
  return b;
}

CertifiedBound certify_counting_bound(const QuadraticFormPair& forms, const Eigen::VectorXd& mass,
                                      const AnnulusSearch& search, const Decomposition& dec,
                                      double lambda, const CertifyOptions& opts) {
  return certify_counting_bound(build_witnesses(forms, mass, search, dec, opts), lambda);
}

std::vector<double> default_lambda_grid(const Spectrum& s) {
  const CountingFunction nf(s);
  const std::size_t m = std::min<std::size_t>(200, nf.resolved());
  if (m <= 20) fail(ErrorKind::precondition, "need more than 20 resolved eigenvalues for the default grid");
  const double lo = nf.eigenvalue(20), hi = nf.eigenvalue(m);
  std::vector<double> grid(12);
  for (int i = 0; i < 12; ++i) grid[i] = lo * std::pow(hi / lo, i / 11.0);
  grid.back() = hi;
  return grid;
}

void MotherReport::write_csv(std::ostream& os) const {
  os << "lambda,certified,exact_N,C_emp\n";
  os.precision(17);
  for (const auto& r : rows) os << r.lambda << ',' << r.certified << ',' << r.exact << ',' << c_emp << '\n';
}

MotherReport mother_bound_check(const LatticeDomain& d, const HorizontalGraph& g, Metric metric,
                                const QuadraticFormPair& forms, const Spectrum& spectrum,
                                const MeasureField* measure, double volume, const MotherOptions& opts) {
  const Eigen::VectorXd mass = measure ? assemble_measure_mass(d, *measure) : forms.mass;
  const int n = forms.n;
  MotherReport rep;
  rep.volume = volume;
  if (measure) rep.volume = std::pow(measure->total_mass, n + 1.0) / std::pow(volume, double(n));
  const std::vector<double> grid = opts.lambdas.empty() ? default_lambda_grid(spectrum) : opts.lambdas;
  const CountingFunction nf(spectrum);

  std::size_t k_max = opts.k_max;
  if (k_max == 0) {
    std::size_t top = 1;
    for (double lam : grid) top = std::max(top, nf(lam).value);
    k_max = 2 * top;
  }
  const AnnulusSearch search(d, g, metric, std::span<const double>(mass.data(), static_cast<std::size_t>(mass.size())),
                             measure ? measure->provenance : std::string("volume"), opts.decomposition);
  std::vector<std::pair<std::size_t, WitnessSet>> sets;
  for (std::size_t k = 1; k <= k_max; k *= 2) {
    try {
      sets.emplace_back(k, build_witnesses(forms, mass, search, search.decompose(k), opts.certify));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::infeasible) throw;
      break;
    }
  }
  rep.c_emp = kInf;
  for (double lam : grid) {
    MotherRow row;
    row.lambda = lam;
    for (const auto& [k, w] : sets) {
      const auto c = certify_counting_bound(w, lam).certified;
      if (c > row.certified) {
        row.certified = c;
        row.best_k = k;
      }
    }
    const auto ex = nf(lam);
    row.exact = ex.value;
    row.exact_lower_bound_only = ex.lower_bound_only;
    if (row.certified > row.exact && !row.exact_lower_bound_only) ++rep.violations;
    row.c_lambda = lam > 0.0 ? static_cast<double>(row.certified) / (rep.volume * std::pow(lam, n + 1.0)) : kInf;
    rep.c_emp = std::min(rep.c_emp, row.c_lambda);
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace heislab
