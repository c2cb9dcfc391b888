#include "heislab/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "heislab/error.hpp"
#include "heislab/sparse_factor.hpp"

namespace heislab {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, "spectrum", msg); }

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

MatrixXd random_block(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  MatrixXd b(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) b(i, j) = 2.0 * unit(rng) - 1.0;
  return b;
}

void check_inputs(const SpMat& s, const VectorXd& m, const SolverOptions& o) {
  if (s.rows() != s.cols() || s.rows() != m.size()) fail(ErrorKind::precondition, "S and M sizes differ");
  if (o.count < 1) fail(ErrorKind::precondition, "eigenpair count must be positive");
  if (o.tol <= 0.0) fail(ErrorKind::precondition, "tolerance must be positive");
  if (o.block < 1) fail(ErrorKind::precondition, "block size must be positive");
  for (Eigen::Index i = 0; i < m.size(); ++i)
    if (!(m[i] >= 0.0) || !std::isfinite(m[i])) fail(ErrorKind::precondition, "mass must be finite and nonnegative");
  const auto support = (m.array() > 0.0).count();
  if (o.count > support)
    fail(ErrorKind::precondition, "requested " + std::to_string(o.count) +
                                      " eigenpairs but only " + std::to_string(support) +
                                      " nodes carry mass");
}

void fill_residuals(const SpMat& s, const VectorXd& m, Spectrum& out) {
  out.residuals.resize(out.values.size());
  for (std::size_t k = 0; k < out.values.size(); ++k) {
    const VectorXd u = out.vectors.col(static_cast<Eigen::Index>(k));
    const VectorXd mu = m.cwiseProduct(u);
    out.residuals[k] = (s * u - out.values[k] * mu).norm() / mu.norm();
  }
}

double scale_of(const Spectrum& out, const SpMat& s, const VectorXd& m) {
  const double tr_ratio = s.diagonal().sum() / m.sum();
  return std::max(out.values.back(), 1e-3 * tr_ratio);
}

// Orthonormalize the columns of b against q (two passes) and then among
// themselves; columns that vanish are replaced by fresh random directions.
MatrixXd orthonormal_block(const MatrixXd& q, MatrixXd b, MatrixXd* coeff, std::mt19937_64& rng) {
  const Eigen::Index cols = b.cols();
  if (q.cols() > 0) {
    for (int pass = 0; pass < 2; ++pass) b.noalias() -= q * (q.transpose() * b);
  }
  Eigen::HouseholderQR<MatrixXd> qr(b);
  MatrixXd r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  MatrixXd basis = qr.householderQ() * MatrixXd::Identity(b.rows(), cols);
  if (coeff) *coeff = r;
  const double ref = std::max(r.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  for (Eigen::Index j = 0; j < cols; ++j) {
    if (std::abs(r(j, j)) > 1e-10 * ref) continue;
    // Breakdown: the Krylov space became invariant in this direction.
    VectorXd v(b.rows());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = 2.0 * unit(rng) - 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      if (q.cols() > 0) v -= q * (q.transpose() * v);
      v -= basis * (basis.transpose() * v);
    }
    basis.col(j) = v.normalized();
  }
  return basis;
}

Spectrum solve_dense(const SpMat& s, const VectorXd& m, const SolverOptions& o) {
  const Eigen::Index n = s.rows();
  std::vector<Eigen::Index> pos, zero;
  for (Eigen::Index i = 0; i < n; ++i) (m[i] > 0.0 ? pos : zero).push_back(i);
  const MatrixXd full = MatrixXd(s);
  const auto np = static_cast<Eigen::Index>(pos.size());
  const auto nz = static_cast<Eigen::Index>(zero.size());
  MatrixXd spp(np, np), spz(np, nz), szz(nz, nz);
  for (Eigen::Index i = 0; i < np; ++i) {
    for (Eigen::Index j = 0; j < np; ++j) spp(i, j) = full(pos[i], pos[j]);
    for (Eigen::Index j = 0; j < nz; ++j) spz(i, j) = full(pos[i], zero[j]);
  }
  for (Eigen::Index i = 0; i < nz; ++i)
    for (Eigen::Index j = 0; j < nz; ++j) szz(i, j) = full(zero[i], zero[j]);

  // Massless nodes are eliminated exactly (harmonic extension).
  MatrixXd ext;
  if (nz > 0) {
    Eigen::LLT<MatrixXd> llt(szz);
    if (llt.info() != Eigen::Success) fail(ErrorKind::solver, "massless block is singular");
    ext = -llt.solve(spz.transpose());
    spp.noalias() += spz * ext;
  }
  VectorXd isq(np);
  for (Eigen::Index i = 0; i < np; ++i) isq[i] = 1.0 / std::sqrt(m[pos[i]]);
  MatrixXd a = isq.asDiagonal() * spp * isq.asDiagonal();
  a = 0.5 * (a + a.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a);
  if (es.info() != Eigen::Success) fail(ErrorKind::solver, "dense eigensolver failed");

  Spectrum out;
  const Eigen::Index k = o.count;
  out.values.assign(es.eigenvalues().data(), es.eigenvalues().data() + k);
  out.cutoff = es.eigenvalues()[np - 1];
  out.vectors = MatrixXd::Zero(n, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const VectorXd up = isq.cwiseProduct(es.eigenvectors().col(c));
    for (Eigen::Index i = 0; i < np; ++i) out.vectors(pos[i], c) = up[i];
    if (nz > 0) {
      const VectorXd uz = ext * up;
      for (Eigen::Index i = 0; i < nz; ++i) out.vectors(zero[i], c) = uz[i];
    }
  }
  fill_residuals(s, m, out);
  out.residual_scale = scale_of(out, s, m);
  for (std::size_t i = 0; i < out.residuals.size(); ++i)
    if (out.residuals[i] > o.tol * out.residual_scale)
      fail(ErrorKind::solver, "dense eigenpair " + std::to_string(i + 1) + " misses the tolerance");
  return out;
}

// Shift-invert block Lanczos with full reorthogonalization on
// C = M^{1/2} (S + tau M)^{-1} M^{1/2}, finished by Rayleigh-Ritz on the
// recovered vectors in the original pencil.
Spectrum solve_iterative(const SpMat& s, const VectorXd& m, const SolverOptions& o) {
  const Eigen::Index n = s.rows();
  const Eigen::Index want = o.count;
  const Eigen::Index b = std::min<Eigen::Index>(o.block, n);
  const Eigen::Index cap = std::min<Eigen::Index>(
      n, o.max_subspace > 0 ? o.max_subspace : std::max(4 * want, want + 40 * b));
  if (cap < want + b) fail(ErrorKind::precondition, "subspace cap too small for the requested count");

  const double tau = 1e-4 * s.diagonal().sum() / m.sum();
  SpMat k = s;
  for (Eigen::Index i = 0; i < n; ++i)
    if (m[i] > 0.0) k.coeffRef(i, i) += tau * m[i];
  SpdFactor factor(k);

  const VectorXd msq = m.cwiseSqrt();
  auto apply = [&](const MatrixXd& x) -> MatrixXd {
    const MatrixXd y = factor.solve(MatrixXd(msq.asDiagonal() * x));
    return msq.asDiagonal() * y;
  };

  std::mt19937_64 rng(o.seed ^ 0x9e3779b97f4a7c15ULL);
  MatrixXd v(n, cap);
  MatrixXd h = MatrixXd::Zero(cap, cap);
  MatrixXd start = msq.asDiagonal() * random_block(n, b, o.seed);
  Eigen::Index used = 0;
  v.leftCols(b) = orthonormal_block(MatrixXd(n, 0), start, nullptr, rng);
  used = b;

  const double inner_tol = 0.1 * o.tol;
  int steps = 0;
  int restarts = 0;
  double worst = -1.0;
  Eigen::Index last_check = 0;
  for (;;) {
    const Eigen::Index lo = used - b;
    MatrixXd w = apply(v.middleCols(lo, b));
    ++steps;
    h.block(0, lo, used, b) = v.leftCols(used).transpose() * w;
    h.block(lo, 0, b, used) = h.block(0, lo, used, b).transpose();

    bool enough = false;
    MatrixXd coupling;
    const bool room = used + b <= cap;
    MatrixXd next = orthonormal_block(v.leftCols(used), w, &coupling, rng);

    if (used >= want + b && (used - last_check >= 3 * b || !room)) {
      last_check = used;
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(h.topLeftCorner(used, used));
      const VectorXd& theta = es.eigenvalues();
      enough = true;
      for (Eigen::Index i = 0; i < want && enough; ++i) {
        const Eigen::Index c = used - 1 - i;
        const double est = (coupling * es.eigenvectors().block(lo, c, b, 1)).norm();
        if (est > inner_tol * std::abs(theta[c])) enough = false;
      }
    }
    if (enough) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(h.topLeftCorner(used, used));
      const Eigen::Index extra = std::min<Eigen::Index>(b, used - want);
      const Eigen::Index keep = want + extra;
      MatrixXd y = v.leftCols(used) * es.eigenvectors().rightCols(keep);
      MatrixXd u = factor.solve(MatrixXd(msq.asDiagonal() * y));
      // Rayleigh-Ritz on span(u) for the original pencil.
      MatrixXd mu = m.asDiagonal() * u;
      MatrixXd sh = u.transpose() * (s * u);
      MatrixXd mh = u.transpose() * mu;
      sh = 0.5 * (sh + sh.transpose()).eval();
      mh = 0.5 * (mh + mh.transpose()).eval();
      Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> ges(sh, mh);
      if (ges.info() != Eigen::Success) fail(ErrorKind::solver, "projected pencil is not definite");
      Spectrum out;
      out.values.assign(ges.eigenvalues().data(), ges.eigenvalues().data() + want);
      out.vectors = u * ges.eigenvectors().leftCols(want);
      for (Eigen::Index c = 0; c < want; ++c) {
        const double nrm = std::sqrt(out.vectors.col(c).dot(m.cwiseProduct(out.vectors.col(c))));
        out.vectors.col(c) /= nrm;
      }
      fill_residuals(s, m, out);
      out.residual_scale = scale_of(out, s, m);
      out.iterations = steps;
      const bool ok = std::all_of(out.residuals.begin(), out.residuals.end(),
                                  [&](double r) { return r <= o.tol * out.residual_scale; });
      if (ok) return out;
      worst = *std::max_element(out.residuals.begin(), out.residuals.end()) / out.residual_scale;
    }
    if (!room) {
      // Thick restart: keep the leading Ritz vectors, continue from the
      // current residual block.
      if (++restarts > o.max_restarts) {
        std::ostringstream msg;
        msg << "no convergence within " << o.max_restarts << " restarts of a " << cap
            << "-dimensional subspace";
        if (worst >= 0.0) msg << " (worst residual " << worst << " relative)";
        fail(ErrorKind::solver, msg.str());
      }
      const Eigen::Index keep = std::min(cap - b, std::max(want + b, cap / 2));
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(h.topLeftCorner(used, used));
      const MatrixXd z = es.eigenvectors().rightCols(keep);
      for (Eigen::Index r0 = 0; r0 < n; r0 += 4096) {
        const Eigen::Index rows = std::min<Eigen::Index>(4096, n - r0);
        const MatrixXd part = v.block(r0, 0, rows, used) * z;
        v.block(r0, 0, rows, keep) = part;
      }
      h.setZero();
      h.topLeftCorner(keep, keep).diagonal() = es.eigenvalues().tail(keep);
      used = keep;
      last_check = keep;
    }
    v.middleCols(used, b) = next;
    used += b;
  }
}

}  // namespace

void Spectrum::write_csv(std::ostream& os) const {
  os << "k,lambda,residual\n";
  os.precision(17);
  for (std::size_t i = 0; i < values.size(); ++i)
    os << i + 1 << ',' << values[i] << ',' << residuals[i] << '\n';
}

Spectrum solve_generalized(const SpMat& stiffness, const VectorXd& mass, const SolverOptions& opts) {
  check_inputs(stiffness, mass, opts);
  auto method = opts.method;
  if (method == SolverOptions::Method::automatic)
    method = static_cast<std::size_t>(stiffness.rows()) <= opts.dense_limit
                 ? SolverOptions::Method::dense
                 : SolverOptions::Method::iterative;
  if (method == SolverOptions::Method::dense) return solve_dense(stiffness, mass, opts);
  Spectrum out = solve_iterative(stiffness, mass, opts);
  out.cutoff = estimate_lambda_max(stiffness, mass);
  return out;
}

double estimate_lambda_max(const SpMat& s, const VectorXd& m, int iterations, std::uint64_t seed) {
  // Power iteration on M^{-1/2} S M^{-1/2} over the nodes that carry mass.
  VectorXd isq = VectorXd::Zero(m.size());
  for (Eigen::Index i = 0; i < m.size(); ++i)
    if (m[i] > 0.0) isq[i] = 1.0 / std::sqrt(m[i]);
  VectorXd x = random_block(m.size(), 1, seed).col(0).cwiseProduct(isq.cwiseSign());
  x.normalize();
  double est = 0.0;
  for (int it = 0; it < iterations; ++it) {
    VectorXd y = isq.cwiseProduct(s * isq.cwiseProduct(x));
    est = x.dot(y);
    const double nrm = y.norm();
    if (nrm == 0.0) break;
    x = y / nrm;
  }
  return est;
}

CountingFunction::CountingFunction(const Spectrum& s) {
  levels_.reserve(s.values.size());
  double anchor = 0.0;
  const double scale = s.values.empty() ? 1.0 : std::max(std::abs(s.values.back()), 1e-300);
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    double v = std::max(0.0, s.values[i]);
    // Roundoff below zero (the constant mode) reads as exactly zero.
    if (s.values[i] < 0.0 || v <= 1e-10 * scale) v = 0.0;
    if (i > 0 && v - anchor <= kClusterTolerance * std::max(anchor, v)) {
      v = anchor;
    } else {
      anchor = v;
    }
    levels_.push_back(v);
  }
}

CountingFunction::Count CountingFunction::operator()(double lambda) const {
  Count c;
  c.value = static_cast<std::size_t>(std::lower_bound(levels_.begin(), levels_.end(), lambda) -
                                     levels_.begin());
  c.lower_bound_only = levels_.empty() || lambda > levels_.back();
  return c;
}

double CountingFunction::eigenvalue(std::size_t k) const {
  if (k < 1 || k > levels_.size())
    fail(ErrorKind::precondition, "rank " + std::to_string(k) + " outside the resolved range");
  return levels_[k - 1];
}

void CountingFunction::write_csv(std::ostream& os) const {
  os << "lambda,N\n";
  os.precision(17);
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    if (i + 1 < levels_.size() && levels_[i + 1] == levels_[i]) continue;
    os << levels_[i] << ',' << i + 1 << '\n';
  }
}

std::size_t counting(const Spectrum& s, double lambda, bool* lower_bound_only) {
  const auto c = CountingFunction(s)(lambda);
  if (lower_bound_only) *lower_bound_only = c.lower_bound_only;
  return c.value;
}

WeylFit weyl_fit(const Spectrum& s, double lambda_lo, double lambda_hi, std::size_t min_points) {
  if (!(lambda_lo > 0.0) || !(lambda_hi > lambda_lo)) fail(ErrorKind::precondition, "invalid fit window");
  if (s.cutoff > 0.0 && lambda_hi > 0.2 * s.cutoff) {
    std::ostringstream msg;
    msg << "fit window upper end " << lambda_hi << " exceeds 0.2 x lattice cutoff " << s.cutoff;
    fail(ErrorKind::precondition, msg.str());
  }
  const CountingFunction nf(s);
  std::vector<double> lx, ly;
  for (std::size_t k = 1; k <= nf.resolved(); ++k) {
    const double lam = nf.eigenvalue(k);
    if (lam < lambda_lo || lam > lambda_hi) continue;
    lx.push_back(std::log(lam));
    ly.push_back(std::log(static_cast<double>(k)));
  }
  if (lx.size() < min_points)
    fail(ErrorKind::precondition, "window too thin: " + std::to_string(lx.size()) +
                                      " eigenvalues, need " + std::to_string(min_points));
  const double cnt = static_cast<double>(lx.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / cnt;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / cnt;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (sxx <= 0.0) fail(ErrorKind::precondition, "degenerate fit window");
  WeylFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  f.lambda_lo = lambda_lo;
  f.lambda_hi = lambda_hi;
  f.points = lx.size();
  return f;
}

WeylFit weyl_fit_ranks(const Spectrum& s, std::size_t k_lo, std::size_t k_hi, std::size_t min_points) {
  const CountingFunction nf(s);
  if (k_lo < 1 || k_hi <= k_lo || k_hi > nf.resolved())
    fail(ErrorKind::precondition, "rank window outside the resolved spectrum");
  return weyl_fit(s, nf.eigenvalue(k_lo), nf.eigenvalue(k_hi), min_points);
}

BoundRatios bound_ratio(const Spectrum& s, double volume, std::size_t k_max, int n) {
  const CountingFunction nf(s);
  if (k_max < 1 || k_max > nf.resolved()) fail(ErrorKind::precondition, "k_max outside the resolved spectrum");
  if (!(volume > 0.0)) fail(ErrorKind::precondition, "volume must be positive");
  const double e = 1.0 / (n + 1);
  const double vol = std::pow(volume, e);
  BoundRatios r;
  r.ratios.reserve(k_max);
  for (std::size_t k = 1; k <= k_max; ++k) {
    const double v = nf.eigenvalue(k) * vol / std::pow(static_cast<double>(k), e);
    r.ratios.push_back(v);
    r.sup = std::max(r.sup, v);
  }
  return r;
}

}  // namespace heislab
