#include "heislab/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "heislab/capacity.hpp"
#include "heislab/config.hpp"
#include "heislab/decomposition.hpp"
#include "heislab/error.hpp"
#include "heislab/forms.hpp"
#include "heislab/lattice.hpp"
#include "heislab/spectrum.hpp"

namespace heislab {

namespace {

namespace fs = std::filesystem;

struct Flags {
  std::string config;
  std::string out;
  std::string metric;
  int seeds = 0;
  bool control = false;
};

class Run {
 public:
  Run(const Flags& f, std::ostream& out) : out_(out) {
    cfg_ = load_config(f.config);
    if (!f.out.empty()) cfg_.out_dir = f.out;
    if (!f.metric.empty()) cfg_.metric = parse_metric(f.metric);
    control_ = f.control;
    seeds_ = f.seeds;
    domain_.emplace(cfg_.domain);
    graph_.emplace(*domain_);
    fs::create_directories(cfg_.out_dir);
  }

  const RunConfig& cfg() const { return cfg_; }
  const LatticeDomain& domain() const { return *domain_; }
  const HorizontalGraph& graph() const { return *graph_; }
  std::ostream& log() { return out_; }

  std::ofstream open(const std::string& name, double c_n = -1.0, double c_f = -1.0) const {
    std::ofstream os(fs::path(cfg_.out_dir) / name, std::ios::binary);
    if (!os) throw Error(ErrorKind::config, "cli", "cannot write " + name + " in " + cfg_.out_dir);
    if (c_n < 0.0) c_n = wedge_constant(cfg_.domain.n);
    if (c_f < 0.0) c_f = kFrameNormalization;
    os << "# config_hash=" << cfg_.hash() << " c_n=" << c_n << " c_f=" << c_f << '\n';
    return os;
  }

  QuadraticFormPair forms(const ConformalFactor& kappa) const {
    return control_ ? assemble_euclidean_control(*domain_) : assemble_forms(*domain_, *graph_, kappa);
  }

  void write_ledger(const ConformalFactor& kappa) const {
    std::ofstream os(fs::path(cfg_.out_dir) / "convention_ledger.txt", std::ios::binary);
    const int n = cfg_.domain.n;
    os.precision(17);
    os << "config_hash " << cfg_.hash() << '\n'
       << "n " << n << '\n'
       << "c_n " << wedge_constant(n) << "   theta0 ^ (d theta0)^n = c_n dx dy dt\n"
       << "c_f " << kFrameNormalization << "   d theta0(X, J X) for X = d/dx + 2y d/dt\n"
       << "h " << domain_->h() << '\n'
       << "h_t " << domain_->ht() << "   2 h^2\n"
       << "nodes " << domain_->size() << "   parity class k = sum I_a J_a (mod 2) of "
       << domain_->grid_points() << " grid points\n"
       << "cell_volume " << domain_->cell_volume() << "   2 h^{2n} h_t\n"
       << "stiffness_weight (c_n/c_f) kappa_e^n cell_volume / (2 h^2) per directed edge\n"
       << "mass c_n kappa^{n+1} cell_volume\n"
       << "p_weight (2n)^{p/2-1} c_n kappa_e^{n+1-p/2} cell_volume / (c_f^{p/2} h^p) per edge\n"
       << "kappa_edge geometric mean of endpoints\n"
       << "kappa " << kappa.provenance << '\n'
       << "metric " << to_string(cfg_.metric) << '\n'
       << "operator " << (control_ ? "euclidean-control" : "sub-laplacian") << '\n';
  }

  ConformalFactor kappa() const { return make_kappa(*domain_, cfg_.kappa); }

  int seeds() const { return seeds_; }

 private:
  std::ostream& out_;
  RunConfig cfg_;
  bool control_ = false;
  int seeds_ = 0;
  std::optional<LatticeDomain> domain_;
  std::optional<HorizontalGraph> graph_;
};

SolverOptions solver_for(const RunConfig& c, const LatticeDomain& d) {
  SolverOptions o = c.solver;
  o.count = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(o.count), d.size()));
  return o;
}

Spectrum solve(const QuadraticFormPair& q, const Eigen::VectorXd& mass, const SolverOptions& o) {
  Spectrum s = solve_generalized(q.stiffness, mass, o);
  s.provenance = q.provenance;
  return s;
}

int cmd_spectrum(Run& run) {
  const auto kappa = run.kappa();
  const auto q = run.forms(kappa);
  const auto s = solve(q, q.mass, solver_for(run.cfg(), run.domain()));
  {
    auto os = run.open("spectrum.csv", q.c_n, q.c_f);
    s.write_csv(os);
  }
  {
    auto os = run.open("counting.csv", q.c_n, q.c_f);
    CountingFunction(s).write_csv(os);
  }
  run.write_ledger(kappa);
  run.log() << "nodes " << run.domain().size() << " eigenpairs " << s.size() << " lambda_1 "
            << s.values.front() << " lambda_m " << s.values.back() << '\n';
  return 0;
}

int cmd_weyl(Run& run) {
  const auto& c = run.cfg();
  const auto kappa = run.kappa();
  const auto q = run.forms(kappa);
  const auto s = solve(q, q.mass, solver_for(c, run.domain()));
  const std::size_t hi = std::min(c.fit_hi, s.size());
  if (hi < c.fit_lo + 20 - 1) {
    throw Error(ErrorKind::config, "weyl",
                "warning: grid too small for a fit (" + std::to_string(s.size()) +
                    " eigenpairs, fit window needs ranks " + std::to_string(c.fit_lo) + ".." +
                    std::to_string(c.fit_lo + 19) + "); refusing to fit");
  }
  const WeylFit f = weyl_fit_ranks(s, c.fit_lo, hi);
  {
    auto os = run.open("spectrum.csv", q.c_n, q.c_f);
    s.write_csv(os);
  }
  {
    auto os = run.open("weyl.csv", q.c_n, q.c_f);
    os.precision(17);
    os << "k_lo,k_hi,lambda_lo,lambda_hi,points,slope,intercept,r2\n"
       << c.fit_lo << ',' << hi << ',' << f.lambda_lo << ',' << f.lambda_hi << ',' << f.points << ','
       << f.slope << ',' << f.intercept << ',' << f.r2 << '\n';
  }
  run.write_ledger(kappa);
  run.log() << "slope " << f.slope << " r2 " << f.r2 << " window [" << f.lambda_lo << ", " << f.lambda_hi
            << "]\n";
  return 0;
}

std::size_t center_node(const LatticeDomain& d) {
  const auto& cfg = d.config();
  const int n = cfg.n;
  std::vector<double> x(n), y(n);
  for (int a = 0; a < n; ++a) {
    x[a] = 0.5 * (cfg.lower[a] + cfg.upper[a]);
    y[a] = 0.5 * (cfg.lower[n + a] + cfg.upper[n + a]);
  }
  return d.nearest_node(Point(x, y, 0.5 * (cfg.lower[2 * n] + cfg.upper[2 * n])));
}

double metric_step(const Run& run) {
  return run.cfg().metric == Metric::gauge ? run.domain().h() : run.graph().edge_length();
}

int cmd_capacity(Run& run) {
  const auto& c = run.cfg();
  const auto kappa = run.kappa();
  const EnergyGraph eg(run.domain(), run.graph(), kappa.values);
  const std::size_t center = center_node(run.domain());
  const auto dist = distances_from(run.domain(), run.graph(), c.metric, center);
  const double step = metric_step(run);
  const int n = c.domain.n;
  std::vector<CapacityRow> rows;
  auto prof = run.open("cap1_profile.csv");
  prof.precision(17);
  prof << "p,r,eps,energy,bound,discrete_C\n";
  for (double r : c.capacity_radii) {
    const double R = c.capacity_ratio * r;
    const Capacitor cap = Capacitor::balls(dist, r, R);
    double vol = 0.0;
    for (std::size_t v = 0; v < dist.size(); ++v)
      if (dist[v] < R) vol += eg.node_volume()[v];
    for (double p : c.capacity_p) {
      const auto res = cap_p(eg, cap, p);
      const double bound = std::pow(2.0 * n, 0.5 * p) * vol * std::pow(R - r, -p);
      rows.push_back({p, r, R, res.value, res.iterations, (bound - res.value) / bound});
      const double eps = c.profile_eps > 0.0 ? c.profile_eps : 0.5 * step;
      if (eps < r) {
        const auto pb = check_profile_bound(eg, dist, r, eps, p, step);
        prof << p << ',' << r << ',' << eps << ',' << pb.energy << ',' << pb.bound << ',' << pb.discrete_c << '\n';
      }
    }
  }
  {
    auto os = run.open("capacity.csv");
    write_capacity_csv(os, rows);
  }
  run.write_ledger(kappa);
  double low = 1.0;
  for (const auto& r : rows) low = std::min(low, r.margin);
  run.log() << "capacitors " << rows.size() << " min margin " << low << '\n';
  return 0;
}

int cmd_decompose(Run& run) {
  const auto& c = run.cfg();
  const auto kappa = run.kappa();
  const MeasureField mu = c.sigma ? measure_from_expression(run.domain(), *c.sigma)
                                  : volume_measure(run.domain(), kappa);
  const Decomposition dec = decompose_annuli(run.domain(), run.graph(), c.metric, mu, c.k, c.decomposition);
  {
    auto os = run.open("decomposition.csv");
    dec.write_csv(os);
  }
  const auto centers = central_nodes(run.domain(), 10, 0.5, 1);
  std::vector<double> radii;
  const double step = metric_step(run);
  for (int i = 2; i <= 8; i *= 2) radii.push_back(i * step);
  const auto table = estimate_constants(run.domain(), run.graph(), c.metric, kappa.values, centers, radii);
  const auto chain = compute_constant_chain(c.domain.n, dec.achieved_c, table.growth_constant,
                                            table.doubling_constant);
  {
    auto os = run.open("constants.csv");
    os.precision(17);
    os << "name,value\n"
       << "k," << dec.k << '\n'
       << "achieved_c," << dec.achieved_c << '\n'
       << "target_halvings," << dec.target_halvings << '\n'
       << "doubling_C1," << chain.doubling << '\n'
       << "growth_C2," << chain.growth << '\n'
       << "cap1_constant," << chain.cap1 << '\n'
       << "annulus_constant," << chain.annulus_cap << '\n'
       << "c_bar," << chain.c_bar << '\n'
       << "C," << chain.C << '\n'
       << "C_star," << chain.C_star << '\n';
  }
  run.write_ledger(kappa);
  run.log() << "k " << dec.k << " achieved_c " << dec.achieved_c << " disjoint "
            << (dec.doubles_disjoint(run.domain().size()) ? "yes" : "NO") << '\n';
  return 0;
}

MotherOptions mother_options(const RunConfig& c) {
  MotherOptions mo;
  mo.lambdas = c.lambdas;
  mo.k_max = c.k_max;
  mo.certify.witness = c.witness;
  mo.decomposition = c.decomposition;
  return mo;
}

void write_mother(std::ostream& os, const MotherReport& rep, const std::string& prefix) {
  for (const auto& r : rep.rows)
    os << prefix << r.lambda << ',' << r.certified << ',' << r.exact << ',' << rep.c_emp << '\n';
}

int cmd_certify(Run& run) {
  const auto& c = run.cfg();
  const auto kappa = run.kappa();
  const auto q = assemble_forms(run.domain(), run.graph(), kappa);
  const double vol = volume_total(run.domain(), kappa);
  const auto opts = solver_for(c, run.domain());
  const auto s = solve(q, q.mass, opts);
  const auto rep = mother_bound_check(run.domain(), run.graph(), c.metric, q, s, nullptr, vol, mother_options(c));
  {
    auto os = run.open("certify.csv");
    os.precision(17);
    os << "lambda,certified,exact_N,C_emp\n";
    write_mother(os, rep, "");
  }
  std::size_t violations = rep.violations;
  if (c.sigma) {
    const auto sigma = measure_from_expression(run.domain(), *c.sigma);
    const auto ms = solve(q, assemble_measure_mass(run.domain(), sigma), opts);
    const auto srep = mother_bound_check(run.domain(), run.graph(), c.metric, q, ms, &sigma, vol, mother_options(c));
    auto os = run.open("sigma_certify.csv");
    os.precision(17);
    os << "lambda,certified,exact_N,C_emp\n";
    write_mother(os, srep, "");
    violations += srep.violations;
  }
  run.write_ledger(kappa);
  run.log() << "C_emp " << rep.c_emp << " violations " << violations << '\n';
  if (violations > 0) throw Error(ErrorKind::solver, "certify", "certified count exceeds the exact count");
  return 0;
}

struct Member {
  std::uint64_t seed = 0;  // 0: kappa = 1 baseline
  double kappa_ratio = 1.0;
  double volume = 0.0;
  std::vector<double> lambdas;
  BoundRatios ratios;
  MotherReport mother;
  std::optional<MotherReport> sigma;
  std::string status = "ok";
  int code = 0;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int worker_count() {
  const char* env = std::getenv(kWorkersEnv);
  if (!env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 1)
    throw Error(ErrorKind::config, "cli", std::string(kWorkersEnv) + " must be a positive integer");
  return static_cast<int>(std::min(v, 64L));
}

int cmd_sweep(Run& run) {
  const auto& c = run.cfg();
  if (run.seeds() < 2) throw Error(ErrorKind::config, "sweep", "sweep needs --seeds N with N >= 2");
  std::vector<Member> members(static_cast<std::size_t>(run.seeds()) + 1);
  for (std::size_t i = 0; i < members.size(); ++i) members[i].seed = i;
  SolverOptions opts = solver_for(c, run.domain());
  opts.count = static_cast<int>(std::min<std::size_t>(
      run.domain().size(), std::max<std::size_t>(static_cast<std::size_t>(opts.count), c.ratio_k_max)));
  std::optional<MeasureField> sigma;
  if (c.sigma) sigma = measure_from_expression(run.domain(), *c.sigma);

  const fs::path seed_dir = fs::path(c.out_dir) / "seeds";
  fs::create_directories(seed_dir);
  auto work = [&](Member& m) {
    try {
      const KappaSpec spec = m.seed == 0 ? KappaSpec::constant(1.0)
                                         : KappaSpec::fourier(m.seed, c.sweep_modes, c.sweep_amplitude);
      const auto kappa = make_kappa(run.domain(), spec);
      m.kappa_ratio = kappa.ratio();
      const auto q = assemble_forms(run.domain(), run.graph(), kappa);
      m.volume = volume_total(run.domain(), kappa);
      const auto s = solve(q, q.mass, opts);
      m.lambdas = s.values;
      m.ratios = bound_ratio(s, m.volume, std::min(c.ratio_k_max, s.size()), c.domain.n);
      m.mother = mother_bound_check(run.domain(), run.graph(), c.metric, q, s, nullptr, m.volume, mother_options(c));
      if (sigma) {
        const auto ms = solve(q, assemble_measure_mass(run.domain(), *sigma), opts);
        m.sigma = mother_bound_check(run.domain(), run.graph(), c.metric, q, ms, &*sigma, m.volume, mother_options(c));
      }
      std::ostringstream sw, ce, sg;
      sw.precision(17);
      ce.precision(17);
      sg.precision(17);
      for (std::size_t k = 1; k <= m.ratios.ratios.size(); ++k)
        sw << m.seed << ',' << k << ',' << m.lambdas[k - 1] << ',' << m.volume << ',' << m.ratios.ratios[k - 1] << '\n';
      write_mother(ce, m.mother, std::to_string(m.seed) + ",");
      if (m.sigma) write_mother(sg, *m.sigma, std::to_string(m.seed) + ",");
      const std::string tag = std::to_string(m.seed);
      std::ofstream(seed_dir / ("sweep_" + tag + ".csv"), std::ios::binary) << sw.str();
      std::ofstream(seed_dir / ("certify_" + tag + ".csv"), std::ios::binary) << ce.str();
      if (m.sigma) std::ofstream(seed_dir / ("sigma_certify_" + tag + ".csv"), std::ios::binary) << sg.str();
    } catch (const Error& e) {
      m.status = e.what();
      m.code = e.kind() == ErrorKind::precondition ? 1 : static_cast<int>(e.kind());
    } catch (const std::exception& e) {
      m.status = e.what();
      m.code = 2;
    }
  };
  const int workers = std::min<int>(worker_count(), static_cast<int>(members.size()));
  std::atomic<std::size_t> next{0};
  auto loop = [&] {
    for (std::size_t i = next++; i < members.size(); i = next++) work(members[i]);
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(loop);
  loop();
  for (auto& t : pool) t.join();

  const double baseline = members[0].code == 0 ? members[0].ratios.sup : 0.0;
  {
    auto os = run.open("sweep.csv");
    os.precision(17);
    os << "seed,k,lambda_k,vol,ratio\n";
    for (const auto& m : members)
      if (m.code == 0) os << read_file(seed_dir / ("sweep_" + std::to_string(m.seed) + ".csv"));
  }
  double c_emp = std::numeric_limits<double>::infinity();
  std::size_t violations = 0;
  {
    auto os = run.open("certify.csv");
    os.precision(17);
    os << "seed,lambda,certified,exact_N,C_emp\n";
    for (const auto& m : members) {
      if (m.code != 0) continue;
      os << read_file(seed_dir / ("certify_" + std::to_string(m.seed) + ".csv"));
      c_emp = std::min(c_emp, m.mother.c_emp);
      violations += m.mother.violations;
    }
  }
  if (sigma) {
    auto os = run.open("sigma_certify.csv");
    os.precision(17);
    os << "seed,lambda,certified,exact_N,C_emp\n";
    for (const auto& m : members) {
      if (m.code != 0 || !m.sigma) continue;
      os << read_file(seed_dir / ("sigma_certify_" + std::to_string(m.seed) + ".csv"));
      violations += m.sigma->violations;
    }
  }
  int code = 0;
  double worst = 0.0;
  {
    auto os = run.open("sweep_summary.csv");
    os.precision(17);
    os << "seed,kappa_ratio,sup_ratio,baseline_sup_ratio,C_emp,status\n";
    for (const auto& m : members) {
      os << m.seed << ',' << m.kappa_ratio << ',' << (m.code == 0 ? m.ratios.sup : NAN) << ',' << baseline << ','
         << (m.code == 0 ? m.mother.c_emp : NAN) << ",\"" << m.status << "\"\n";
      if (m.code != 0 && code == 0) code = m.code;
      if (m.code == 0 && baseline > 0.0) worst = std::max(worst, m.ratios.sup / baseline);
    }
  }
  run.write_ledger(make_kappa(run.domain(), KappaSpec::constant(1.0)));
  run.log() << "members " << members.size() << " C_emp " << c_emp << " worst_ratio_vs_baseline " << worst
            << " violations " << violations << '\n';
  if (code != 0) return code;
  if (violations > 0) throw Error(ErrorKind::solver, "sweep", "certified count exceeds the exact count");
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sub-Laplacian spectra, capacities and annuli decompositions on Heisenberg lattices"};
  app.require_subcommand(1);
  Flags flags;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "JSON run configuration")->required();
    sub->add_option("--out", flags.out, "output directory (overrides the config)");
    sub->add_option("--metric", flags.metric, "gauge or graph")->check(CLI::IsMember({"gauge", "graph"}));
    sub->add_option("--seeds", flags.seeds, "number of random conformal factors");
    sub->add_flag("--control-fixture", flags.control, "use the elliptic control stencil");
  };
  std::vector<std::pair<CLI::App*, int (*)(Run&)>> cmds;
  cmds.emplace_back(app.add_subcommand("spectrum", "smallest eigenpairs and counting function"), cmd_spectrum);
  cmds.emplace_back(app.add_subcommand("weyl", "Weyl-exponent fit"), cmd_weyl);
  cmds.emplace_back(app.add_subcommand("sweep", "conformal-factor ensemble"), cmd_sweep);
  cmds.emplace_back(app.add_subcommand("capacity", "ball capacitors and profile bounds"), cmd_capacity);
  cmds.emplace_back(app.add_subcommand("decompose", "annuli decomposition and constant chain"), cmd_decompose);
  cmds.emplace_back(app.add_subcommand("certify", "certified counting-function lower bounds"), cmd_certify);
  for (auto& [sub, fn] : cmds) add_common(sub);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }
  try {
    for (auto& [sub, fn] : cmds) {
      if (!sub->parsed()) continue;
      if (flags.control && sub->get_name() != "spectrum" && sub->get_name() != "weyl")
        throw Error(ErrorKind::config, "cli", "--control-fixture applies to spectrum and weyl only");
      Run run(flags, out);
      return fn(run);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    if (e.kind() == ErrorKind::infeasible) err << "decomposition infeasible\n";
    return e.kind() == ErrorKind::precondition ? 1 : static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace heislab
