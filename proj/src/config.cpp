#include "heislab/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "heislab/error.hpp"
#include "heislab/expression.hpp"

namespace heislab {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorKind::config, "config", msg); }

void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) bad(where + " must be an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) bad("unknown key '" + key + "' in " + where);
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) bad(where + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) bad(where + " must be finite");
  return v;
}

double positive(const json& j, const std::string& where) {
  const double v = number(j, where);
  if (!(v > 0.0)) bad(where + " must be positive");
  return v;
}

long integer(const json& j, const std::string& where, long lo) {
  if (!j.is_number_integer()) bad(where + " must be an integer");
  const long v = j.get<long>();
  if (v < lo) bad(where + " must be >= " + std::to_string(lo));
  return v;
}

std::vector<double> numbers(const json& j, const std::string& where) {
  if (!j.is_array()) bad(where + " must be an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

std::string text(const json& j, const std::string& where) {
  if (!j.is_string()) bad(where + " must be a string");
  return j.get<std::string>();
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical)));
  return buf;
}

RunConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    bad(std::string("malformed JSON: ") + e.what());
  }
  only_keys(root, "config", {"n", "h", "box", "max_nodes", "kappa", "sigma", "metric", "eigen", "fit",
                             "capacity", "decomposition", "certify", "sweep", "output"});
  RunConfig c;
  const int n = root.contains("n") ? static_cast<int>(integer(root["n"], "n", 1)) : 1;
  if (n > 4) bad("n must be at most 4");
  const double h = root.contains("h") ? positive(root["h"], "h") : 0.0625;

  if (root.contains("box")) {
    const json& b = root["box"];
    only_keys(b, "box", {"horizontal", "vertical", "lower", "upper"});
    if (b.contains("lower") || b.contains("upper")) {
      if (!b.contains("lower") || !b.contains("upper")) bad("box needs both lower and upper");
      c.domain.n = n;
      c.domain.h = h;
      c.domain.lower = numbers(b["lower"], "box.lower");
      c.domain.upper = numbers(b["upper"], "box.upper");
      if (c.domain.lower.size() != static_cast<std::size_t>(2 * n + 1) ||
          c.domain.upper.size() != static_cast<std::size_t>(2 * n + 1))
        bad("box.lower and box.upper need 2n+1 entries");
    } else {
      const double hz = b.contains("horizontal") ? positive(b["horizontal"], "box.horizontal") : 1.0;
      const double vt = b.contains("vertical") ? positive(b["vertical"], "box.vertical") : 0.5;
      c.domain = DomainConfig::centered(n, hz, vt, h);
    }
  } else {
    c.domain = DomainConfig::centered(n, 1.0, 0.5, h);
  }
  if (root.contains("max_nodes")) c.domain.max_nodes = static_cast<std::size_t>(integer(root["max_nodes"], "max_nodes", 1));

  if (root.contains("kappa")) {
    const json& k = root["kappa"];
    only_keys(k, "kappa", {"constant", "expression", "fourier"});
    if (k.size() != 1) bad("kappa needs exactly one of constant, expression, fourier");
    if (k.contains("constant")) {
      c.kappa = KappaSpec::constant(positive(k["constant"], "kappa.constant"));
    } else if (k.contains("expression")) {
      c.kappa = KappaSpec::from_expression(text(k["expression"], "kappa.expression"));
      Expression::parse(c.kappa.expression, n);
    } else {
      const json& f = k["fourier"];
      only_keys(f, "kappa.fourier", {"seed", "modes", "amplitude", "max_wavenumber"});
      c.kappa = KappaSpec::fourier(
          f.contains("seed") ? static_cast<std::uint64_t>(integer(f["seed"], "kappa.fourier.seed", 0)) : 0,
          f.contains("modes") ? static_cast<int>(integer(f["modes"], "kappa.fourier.modes", 1)) : 8,
          f.contains("amplitude") ? number(f["amplitude"], "kappa.fourier.amplitude") : 1.0);
      if (f.contains("max_wavenumber"))
        c.kappa.max_wavenumber = static_cast<int>(integer(f["max_wavenumber"], "kappa.fourier.max_wavenumber", 1));
      if (c.kappa.amplitude < 0.0) bad("kappa.fourier.amplitude must be >= 0");
    }
  }
  if (root.contains("sigma")) {
    c.sigma = text(root["sigma"], "sigma");
    Expression::parse(*c.sigma, n);
  }
  if (root.contains("metric")) c.metric = parse_metric(text(root["metric"], "metric"));

  if (root.contains("eigen")) {
    const json& e = root["eigen"];
    only_keys(e, "eigen", {"count", "tol", "seed", "block", "method", "max_subspace"});
    if (e.contains("count")) c.solver.count = static_cast<int>(integer(e["count"], "eigen.count", 1));
    if (e.contains("tol")) c.solver.tol = positive(e["tol"], "eigen.tol");
    if (e.contains("seed")) c.solver.seed = static_cast<std::uint64_t>(integer(e["seed"], "eigen.seed", 0));
    if (e.contains("block")) c.solver.block = static_cast<int>(integer(e["block"], "eigen.block", 1));
    if (e.contains("max_subspace"))
      c.solver.max_subspace = static_cast<int>(integer(e["max_subspace"], "eigen.max_subspace", 0));
    if (e.contains("method")) {
      const std::string m = text(e["method"], "eigen.method");
      if (m == "auto") c.solver.method = SolverOptions::Method::automatic;
      else if (m == "iterative") c.solver.method = SolverOptions::Method::iterative;
      else if (m == "dense") c.solver.method = SolverOptions::Method::dense;
      else bad("eigen.method must be auto, iterative or dense");
    }
  }
  if (root.contains("fit")) {
    const json& f = root["fit"];
    only_keys(f, "fit", {"k_lo", "k_hi"});
    if (f.contains("k_lo")) c.fit_lo = static_cast<std::size_t>(integer(f["k_lo"], "fit.k_lo", 1));
    if (f.contains("k_hi")) c.fit_hi = static_cast<std::size_t>(integer(f["k_hi"], "fit.k_hi", 2));
    if (c.fit_hi <= c.fit_lo) bad("fit.k_hi must exceed fit.k_lo");
  }
  if (root.contains("capacity")) {
    const json& f = root["capacity"];
    only_keys(f, "capacity", {"p", "radii", "ratio", "eps"});
    if (f.contains("p")) c.capacity_p = numbers(f["p"], "capacity.p");
    for (double p : c.capacity_p)
      if (!(p >= 2.0)) bad("capacity.p entries must be >= 2");
    if (f.contains("radii")) c.capacity_radii = numbers(f["radii"], "capacity.radii");
    for (double r : c.capacity_radii)
      if (!(r > 0.0)) bad("capacity.radii entries must be positive");
    if (f.contains("ratio")) c.capacity_ratio = number(f["ratio"], "capacity.ratio");
    if (!(c.capacity_ratio > 1.0)) bad("capacity.ratio must exceed 1");
    if (f.contains("eps")) c.profile_eps = number(f["eps"], "capacity.eps");
    if (c.profile_eps < 0.0) bad("capacity.eps must be >= 0");
  }
  if (c.capacity_p.empty()) c.capacity_p = {2.0, 2.0 * n + 2.0};
  if (c.capacity_radii.empty())
    for (int i = 6; i <= 16; i += 2) c.capacity_radii.push_back(i * h);

  if (root.contains("decomposition")) {
    const json& f = root["decomposition"];
    only_keys(f, "decomposition", {"k", "candidates", "max_halvings"});
    if (f.contains("k")) c.k = static_cast<std::size_t>(integer(f["k"], "decomposition.k", 1));
    if (f.contains("candidates"))
      c.decomposition.candidates = static_cast<std::size_t>(integer(f["candidates"], "decomposition.candidates", 1));
    if (f.contains("max_halvings"))
      c.decomposition.max_halvings = static_cast<int>(integer(f["max_halvings"], "decomposition.max_halvings", 0));
  }
  if (root.contains("certify")) {
    const json& f = root["certify"];
    only_keys(f, "certify", {"lambdas", "witness", "k_max"});
    if (f.contains("lambdas")) c.lambdas = numbers(f["lambdas"], "certify.lambdas");
    for (double l : c.lambdas)
      if (!(l > 0.0)) bad("certify.lambdas entries must be positive");
    if (f.contains("witness")) {
      const std::string w = text(f["witness"], "certify.witness");
      if (w == "profile") c.witness = Witness::profile;
      else if (w == "capacity") c.witness = Witness::capacity;
      else bad("certify.witness must be profile or capacity");
    }
    if (f.contains("k_max")) c.k_max = static_cast<std::size_t>(integer(f["k_max"], "certify.k_max", 0));
  }
  if (root.contains("sweep")) {
    const json& f = root["sweep"];
    only_keys(f, "sweep", {"modes", "amplitude", "ratio_k_max"});
    if (f.contains("modes")) c.sweep_modes = static_cast<int>(integer(f["modes"], "sweep.modes", 1));
    if (f.contains("amplitude")) c.sweep_amplitude = number(f["amplitude"], "sweep.amplitude");
    if (c.sweep_amplitude < 0.0) bad("sweep.amplitude must be >= 0");
    if (f.contains("ratio_k_max"))
      c.ratio_k_max = static_cast<std::size_t>(integer(f["ratio_k_max"], "sweep.ratio_k_max", 1));
  }
  if (root.contains("output")) c.out_dir = text(root["output"], "output");

  // Domain preconditions are checked by a dry construction of the grid
  // description (no node arrays are built here).
  const double ht = 2.0 * h * h;
  double grid = 1.0;
  for (int a = 0; a < 2 * n + 1; ++a) {
    const double ext = c.domain.upper[a] - c.domain.lower[a];
    if (!(ext > 0.0)) bad("box extents must be positive");
    grid *= std::ceil(ext / (a == 2 * n ? ht : h) - 1e-9) + 1.0;
  }
  if (0.5 * grid > static_cast<double>(c.domain.max_nodes))
    bad("grid would have about " + std::to_string(static_cast<long>(0.5 * grid)) + " nodes, above max_nodes");
  if (static_cast<double>(c.solver.count) > 0.5 * grid) bad("eigen.count exceeds the node count");

  c.canonical = root.dump();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) bad("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace heislab
