#include "sketchy/sgmres.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "sketchy/errors.hpp"

namespace sketchy {

namespace {

// r_est below this fraction of ||S r0|| counts as an exact solve
constexpr double kLuckyBreakdownTol = 1e-12;

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

class PhaseTimer {
 public:
  explicit PhaseTimer(double& sink) : sink_(sink), t0_(Clock::now()) {}
  ~PhaseTimer() { sink_ += ms_since(t0_); }

 private:
  double& sink_;
  Clock::time_point t0_;
};

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

void check_inputs(const LinearOperator& op, std::span<const double> f, std::span<const double> x0,
                  const SgmresConfig& config) {
  if (op.rows() != op.cols()) throw ArgumentError("sgmres: operator must be square");
  if (f.size() != op.rows()) throw ArgumentError("sgmres: right-hand side has length " + std::to_string(f.size()) +
                                                 ", operator dimension is " + std::to_string(op.rows()));
  if (x0.size() != op.rows()) throw ArgumentError("sgmres: initial guess has the wrong length");
  if (config.d_max == 0) throw ArgumentError("sgmres: d_max must be positive");
  if (!(config.cond_tol > 1.0)) throw ArgumentError("sgmres: cond_tol must exceed 1");
  for (double v : f)
    if (!std::isfinite(v)) throw ArgumentError("sgmres: right-hand side has non-finite entries");
}

Vector residual(const LinearOperator& op, std::span<const double> f, std::span<const double> x) {
  Vector r = op.apply(x);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = f[i] - r[i];
  return r;
}

std::size_t sketch_rows(const SgmresConfig& config, std::size_t d, std::size_t n) {
  const std::size_t s = config.sketch_size ? config.sketch_size : default_sketch_size(d, n);
  if (s > n) throw ArgumentError("sgmres: sketch size exceeds n");
  if (s < d) throw ArgumentError("sgmres: sketch size s=" + std::to_string(s) + " is below the basis dimension");
  return s;
}

// x + B[:, :k] y
void accumulate(Vector& x, const DenseMatrix& b, std::span<const double> y) {
  for (std::size_t j = 0; j < y.size(); ++j) axpy(y[j], b.col(j), x);
}

double diag_ratio(const SketchedQr& qr) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t i = 0; i < qr.size(); ++i) {
    lo = std::min(lo, qr.t(i, i));
    hi = std::max(hi, qr.t(i, i));
  }
  return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

// Largest k in [lo, hi] with kappa(T_k) <= tol, given kappa(T_lo) <= tol
// (lo = 0 counts as trivially fine). Leading blocks of a triangular factor
// have nondecreasing condition numbers, so bisection applies.
std::size_t good_prefix(const SketchedQr& qr, std::size_t lo, std::size_t hi, double tol) {
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo + 1) / 2;
    if (cond_estimate(qr.T_leading(mid)) <= tol)
      lo = mid;
    else
      hi = mid - 1;
  }
  return lo;
}

void refine_into(SgmresResult& res, const LinearOperator& op, std::span<const double> f,
                 const DenseMatrix& b, const DenseMatrix& ab, const DenseMatrix& t, std::span<const double> r0,
                 std::span<const double> x_start, const Embedding& emb) {
  RefineResult rr = refine_coefficients(ab, t, r0, res.y);
  res.refine_iterations = rr.iterations;
  Vector x(x_start.begin(), x_start.end());
  accumulate(x, b, rr.y);
  const double refined = residual_norm(op, f, x);
  const double before = residual_norm(op, f, res.x);
  if (refined <= before) {
    res.x = std::move(x);
    res.y = std::move(rr.y);
    Vector rr_vec(r0.begin(), r0.end());
    for (std::size_t j = 0; j < res.y.size(); ++j) axpy(-res.y[j], ab.col(j), rr_vec);
    res.r_est = norm2(emb.apply(rr_vec));
  }
}

}  // namespace

std::string to_string(RestartPolicy p) {
  switch (p) {
    case RestartPolicy::none: return "none";
    case RestartPolicy::adaptive: return "adaptive";
    case RestartPolicy::whiten: return "whiten";
  }
  return "unknown";
}

RestartPolicy parse_restart_policy(const std::string& name) {
  if (name == "none") return RestartPolicy::none;
  if (name == "adaptive") return RestartPolicy::adaptive;
  if (name == "whiten") return RestartPolicy::whiten;
  throw ArgumentError("unknown restart policy '" + name + "' (expected none, adaptive or whiten)");
}

double residual_norm(const LinearOperator& op, std::span<const double> f, std::span<const double> x) {
  return norm2(residual(op, f, x));
}

SketchedLsqSolution sketched_lsq(const DenseMatrix& u, const DenseMatrix& t, std::span<const double> g) {
  if (u.rows() != g.size() || u.cols() != t.rows() || t.rows() != t.cols())
    throw ArgumentError("sketched_lsq: dimension mismatch");
  SketchedLsqSolution sol;
  const Vector z = matvec_t(u, g);
  Vector r(g.begin(), g.end());
  for (std::size_t j = 0; j < z.size(); ++j) axpy(-z[j], u.col(j), r);
  sol.r_est = norm2(r);
  sol.y = solve_upper_triangular(t, z);
  return sol;
}

// ---------------------------------------------------------------------------

SgmresResult sgmres_solve(const LinearOperator& op, std::span<const double> f, std::span<const double> x0,
                          const SgmresConfig& config) {
  check_inputs(op, f, x0, config);
  const auto t_start = Clock::now();
  const std::size_t n = op.rows();
  SgmresResult res;
  res.x.assign(x0.begin(), x0.end());
  const Vector r0 = residual(op, f, x0);
  if (norm2(r0) == 0.0) {
    res.status = "converged";
    return res;
  }

  const std::size_t d = std::min(config.d_max, n);
  KrylovBasis kb;
  {
    PhaseTimer t(res.timings.basis_ms);
    kb = build_basis(op, config.basis, r0, d);
  }
  std::size_t dim = kb.dim();
  bool dependent = false;
  const std::size_t s = sketch_rows(config, d, n);
  const Embedding emb(config.embedding, n, s, config.seed);

  DenseMatrix sab;
  Vector g;
  {
    PhaseTimer t(res.timings.sketch_ms);
    sab = emb.apply(kb.AB);
    g = emb.apply(r0);
  }
  res.rhs_sketch_norm = norm2(g);

  SketchedQr qr(s, dim);
  {
    PhaseTimer t(res.timings.solve_ms);
    qr.set_rhs(g);
    for (std::size_t j = 0; j < dim; ++j) {
      if (qr.append_column(sab.col(j)).rank_deficient) {
        // S A b_j adds nothing to the span: treat as breakdown and drop it
        dependent = true;
        break;
      }
      IterationRecord rec;
      rec.iteration = j + 1;
      rec.r_est = qr.residual_norm(j + 1);
      rec.elapsed_ms = ms_since(t_start);
      res.history.push_back(rec);
    }
    if (dependent) {
      dim = res.history.size();
      kb.B = kb.B.columns(0, dim);
      kb.AB = kb.AB.columns(0, dim);
    }
    res.cond = dim ? cond_estimate(qr.T_leading(dim)) : 1.0;
    if (!res.history.empty()) res.history.back().cond = res.cond;
  }
  res.iterations = dim;
  res.basis_dim = dim;

  if (res.cond > config.cond_tol) {
    if (config.restart != RestartPolicy::none) {
      SgmresResult it = sgmres_iterative(op, f, x0, config);
      it.warnings.insert(it.warnings.begin(), "batch basis has kappa_2(S A B) = " + fmt_g(res.cond) +
                                                  " > cond_tol; switched to the incremental solver");
      return it;
    }
    res.reliable = false;
    res.status = "ill-conditioned";
    res.warnings.push_back("kappa_2(S A B) = " + fmt_g(res.cond) + " exceeds cond_tol = " + fmt_g(config.cond_tol) +
                           "; the solution is unreliable");
  }

  SketchedQr::PrefixSolution sol;
  {
    PhaseTimer t(res.timings.solve_ms);
    try {
      sol = qr.solve_prefix(dim);
    } catch (const SingularityError& e) {
      res.reliable = false;
      res.status = "ill-conditioned";
      res.warnings.push_back(std::string("sketched triangular factor is singular: ") + e.what());
      res.true_residual = norm2(r0);
      res.r_est = res.rhs_sketch_norm;
      return res;
    }
  }
  res.y = sol.y;
  res.r_est = sol.r_est;
  {
    PhaseTimer t(res.timings.assembly_ms);
    accumulate(res.x, kb.B, res.y);
  }
  if (config.refine && res.reliable && dim > 0)
    refine_into(res, op, f, kb.B, kb.AB, qr.T_leading(dim), r0, x0, emb);
  res.true_residual = residual_norm(op, f, res.x);
  if (res.status.empty()) {
    if (dependent && res.r_est > kLuckyBreakdownTol * res.rhs_sketch_norm) {
      res.status = "breakdown";
      res.warnings.push_back("sketched basis became numerically dependent after " + std::to_string(dim) +
                             " columns; returning the solution on those columns");
    } else if (kb.breakdown || dependent ||
               (config.target > 0.0 && res.r_est <= config.target * res.rhs_sketch_norm)) {
      res.status = "converged";
    } else {
      res.status = "budget";
    }
  }
  return res;
}

// ---------------------------------------------------------------------------

SgmresResult sgmres_iterative(const LinearOperator& op, std::span<const double> f, std::span<const double> x0,
                              const SgmresConfig& config) {
  check_inputs(op, f, x0, config);
  const auto t_start = Clock::now();
  const std::size_t n = op.rows();
  const std::size_t d_max = std::min(config.d_max, n);
  const std::size_t s = sketch_rows(config, d_max, n);
  const std::size_t budget = config.max_iterations ? config.max_iterations : d_max;
  const std::size_t every = std::max<std::size_t>(1, config.cond_check_every);
  const Embedding emb(config.embedding, n, s, config.seed);

  SgmresResult res;
  res.x.assign(x0.begin(), x0.end());
  Vector r = residual(op, f, x0);
  double prev_true = norm2(r);
  std::size_t stagnant = 0;
  std::size_t whitenings = 0;
  bool first_cycle = true;

  while (true) {
    const Vector x_cycle = res.x;
    if (norm2(r) == 0.0) {
      res.status = "converged";
      res.r_est = 0.0;
      res.y.clear();
      break;
    }
    Vector g;
    {
      PhaseTimer t(res.timings.sketch_ms);
      g = emb.apply(r);
    }
    if (first_cycle) res.rhs_sketch_norm = norm2(g);
    first_cycle = false;

    auto gen = make_generator(op, config.basis, r);
    SketchedQr qr(s, d_max);
    qr.set_rhs(g);
    DenseMatrix b(n, 0), ab(n, 0);
    b.reserve_columns(d_max);
    ab.reserve_columns(d_max);
    Vector bj(n), abj(n);
    std::size_t last_good = 0;
    bool ill = false;
    bool broke = false;
    bool hit_target = false;
    double last_cond = 1.0;

    while (res.iterations < budget && b.cols() < d_max) {
      bool ok;
      {
        PhaseTimer t(res.timings.basis_ms);
        ok = gen->next(bj, abj);
      }
      if (!ok) {
        broke = true;
        break;
      }
      Vector sab;
      {
        PhaseTimer t(res.timings.sketch_ms);
        sab = emb.apply(abj);
      }
      IterationRecord rec;
      {
        PhaseTimer t(res.timings.solve_ms);
        const auto ar = qr.append_column(sab);
        if (ar.rank_deficient && qr.residual_norm(b.cols()) <= kLuckyBreakdownTol * norm2(g)) {
          // nothing left to gain in this direction: lucky breakdown
          broke = true;
          break;
        }
        b.append_column(bj);
        ab.append_column(abj);
        ++res.iterations;
        const std::size_t j = b.cols();
        rec.iteration = res.iterations;
        rec.restart = res.restarts;
        rec.r_est = qr.residual_norm(j);
        if (j % every == 0 || ar.rank_deficient || diag_ratio(qr) > config.cond_tol) {
          last_cond = cond_estimate(qr.T());
          rec.cond = last_cond;
          if (last_cond <= config.cond_tol)
            last_good = j;
          else
            ill = true;
        }
      }
      if (config.true_residual_every && res.iterations % config.true_residual_every == 0 && !ill) {
        try {
          const auto sol = qr.solve_prefix(b.cols());
          Vector xj = x_cycle;
          accumulate(xj, b, sol.y);
          rec.true_residual = residual_norm(op, f, xj);
        } catch (const SingularityError&) {
        }
      }
      rec.elapsed_ms = ms_since(t_start);
      res.history.push_back(rec);
      if (config.observer) config.observer(rec);
      if (ill) {
        if (config.restart == RestartPolicy::whiten) {
          // Keep the well-conditioned prefix, replace it by B T^{-1} (so the
          // sketched image becomes U) and carry on with the same generator.
          PhaseTimer t(res.timings.solve_ms);
          const std::size_t k = good_prefix(qr, last_good, b.cols() - 1, config.cond_tol);
          if (k == 0) break;
          const DenseMatrix tk = qr.T_leading(k);
          const DenseMatrix u = qr.U();
          DenseMatrix wb = whiten(b.columns(0, k), tk);
          DenseMatrix wab = whiten(ab.columns(0, k), tk);
          SketchedQr fresh(s, d_max);
          fresh.set_rhs(g);
          for (std::size_t j = 0; j < k; ++j) fresh.append_column(u.col(j));
          qr = std::move(fresh);
          b = std::move(wb);
          ab = std::move(wab);
          b.reserve_columns(d_max);
          ab.reserve_columns(d_max);
          last_good = k;
          last_cond = cond_estimate(qr.T());
          ill = false;
          ++whitenings;
          continue;
        }
        break;
      }
      if (config.target > 0.0 && rec.r_est <= config.target * res.rhs_sketch_norm) {
        hit_target = true;
        break;
      }
    }

    std::size_t j = b.cols();
    if (!ill && j > 0 && last_good != j) {
      PhaseTimer t(res.timings.solve_ms);
      last_cond = cond_estimate(qr.T_leading(j));
      if (!res.history.empty()) res.history.back().cond = last_cond;
      if (last_cond <= config.cond_tol)
        last_good = j;
      else
        ill = true;
    }

    std::size_t use = j;
    if (ill) {
      PhaseTimer t(res.timings.solve_ms);
      if (config.restart == RestartPolicy::none) {
        res.reliable = false;
        res.warnings.push_back("kappa_2(S A B) = " + fmt_g(last_cond) + " exceeds cond_tol = " +
                               fmt_g(config.cond_tol) + "; the solution is unreliable");
      } else {
        use = good_prefix(qr, std::min(last_good, j - 1), j - 1, config.cond_tol);
        last_cond = use ? cond_estimate(qr.T_leading(use)) : 1.0;
      }
    }

    res.cond = last_cond;
    res.basis_dim = use;
    SketchedQr::PrefixSolution sol;
    bool singular = false;
    {
      PhaseTimer t(res.timings.solve_ms);
      try {
        sol = qr.solve_prefix(use);
      } catch (const SingularityError& e) {
        singular = true;
        res.warnings.push_back(std::string("sketched triangular factor is singular: ") + e.what());
      }
    }
    if (singular || use == 0) {
      res.reliable = false;
      res.status = "ill-conditioned";
      res.y.clear();
      res.r_est = qr.residual_norm(0);
      break;
    }
    res.y = sol.y;
    res.r_est = sol.r_est;
    {
      PhaseTimer t(res.timings.assembly_ms);
      accumulate(res.x, b, res.y);
    }

    const bool final_cycle = hit_target || broke || res.iterations >= budget ||
                             (ill && config.restart == RestartPolicy::none);
    if (final_cycle) {
      if (config.refine && res.reliable && use > 0)
        refine_into(res, op, f, b.columns(0, use), ab.columns(0, use), qr.T_leading(use), r, x_cycle, emb);
      if (ill && config.restart == RestartPolicy::none)
        res.status = "ill-conditioned";
      else if (hit_target || broke)
        res.status = "converged";
      else
        res.status = "budget";
      break;
    }

    // Restart from the current iterate with an explicit residual.
    r = residual(op, f, res.x);
    const double now = norm2(r);
    stagnant = now > 0.99 * prev_true ? stagnant + 1 : 0;
    prev_true = std::min(prev_true, now);
    if (stagnant >= 2) {
      res.status = "stagnated";
      res.warnings.push_back("two consecutive restarts reduced the residual by less than 1%; stopping");
      break;
    }
    if (res.restarts >= config.max_restarts) {
      res.status = "budget";
      res.warnings.push_back("restart limit reached");
      break;
    }
    ++res.restarts;
  }

  if (whitenings) res.warnings.push_back("basis whitened " + std::to_string(whitenings) + " time(s)");
  res.true_residual = residual_norm(op, f, res.x);
  return res;
}

// ---------------------------------------------------------------------------

RefineResult refine_coefficients(const DenseMatrix& ab, const DenseMatrix& t, std::span<const double> r0,
                                 std::span<const double> y0, std::size_t max_iterations) {
  const std::size_t d = ab.cols();
  if (t.rows() != d || t.cols() != d || y0.size() != d || r0.size() != ab.rows())
    throw ArgumentError("refine: dimension mismatch");
  RefineResult out;
  out.y.assign(y0.begin(), y0.end());
  if (d == 0) return out;

  // M = AB T^{-1}
  auto m_apply = [&](std::span<const double> v) { return matvec(ab, solve_upper_triangular(t, v)); };
  auto mt_apply = [&](std::span<const double> u) { return solve_upper_triangular_transpose(t, matvec_t(ab, u)); };

  Vector u(r0.begin(), r0.end());
  for (std::size_t j = 0; j < d; ++j) axpy(-y0[j], ab.col(j), u);
  double beta = norm2(u);
  if (beta == 0.0) return out;
  scale(1.0 / beta, u);
  Vector v = mt_apply(u);
  double alpha = norm2(v);
  if (alpha == 0.0) return out;
  scale(1.0 / alpha, v);

  Vector w = v, z(d, 0.0);
  double phibar = beta, rhobar = alpha;
  double anorm2 = alpha * alpha;
  const double eps = std::numeric_limits<double>::epsilon();
  for (std::size_t it = 1; it <= max_iterations; ++it) {
    out.iterations = it;
    Vector mu = m_apply(v);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = mu[i] - alpha * u[i];
    beta = norm2(u);
    if (beta > 0.0) scale(1.0 / beta, u);
    Vector mv = mt_apply(u);
    for (std::size_t i = 0; i < d; ++i) v[i] = mv[i] - beta * v[i];
    alpha = norm2(v);
    if (alpha > 0.0) scale(1.0 / alpha, v);
    anorm2 += alpha * alpha + beta * beta;

    const double rho = std::hypot(rhobar, beta);
    const double c = rhobar / rho;
    const double sn = beta / rho;
    const double theta = sn * alpha;
    rhobar = -c * alpha;
    const double phi = c * phibar;
    phibar = sn * phibar;
    axpy(phi / rho, w, z);
    for (std::size_t i = 0; i < d; ++i) w[i] = v[i] - (theta / rho) * w[i];

    // ||M^T r|| = phibar * alpha * |c|; stop at machine level relative to ||M|| ||r||.
    if (beta == 0.0 || alpha == 0.0 || alpha * std::abs(c) <= 10.0 * eps * std::sqrt(anorm2)) break;
  }
  const Vector dy = solve_upper_triangular(t, z);
  for (std::size_t j = 0; j < d; ++j) out.y[j] += dy[j];
  return out;
}

// ---------------------------------------------------------------------------

GmresResult gmres_baseline(const LinearOperator& op, std::span<const double> f, std::span<const double> x0,
                           std::size_t d) {
  if (op.rows() != op.cols() || f.size() != op.rows() || x0.size() != op.rows())
    throw ArgumentError("gmres: dimension mismatch");
  if (d == 0 || d > op.rows()) throw ArgumentError("gmres: need 1 <= d <= n");
  const auto t0 = Clock::now();
  GmresResult out;
  out.x.assign(x0.begin(), x0.end());
  Vector r = residual(op, f, x0);
  const double beta = norm2(r);
  out.residuals.push_back(beta);
  if (beta == 0.0) return out;

  const std::size_t n = op.rows();
  DenseMatrix v(n, 0);
  v.reserve_columns(d + 1);
  scale(1.0 / beta, r);
  v.append_column(r);
  DenseMatrix h(d + 1, d);
  Vector cs(d), sn(d), gvec(d + 1, 0.0);
  gvec[0] = beta;
  std::size_t k = 0;
  double basis_ms = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    Vector w;
    double hnext;
    {
      PhaseTimer t(basis_ms);
      w = op.apply(v.col(j));
      const double wnorm = norm2(w);
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t i = 0; i <= j; ++i) {
          const double hij = dot(v.col(i), w);
          h(i, j) += hij;
          axpy(-hij, v.col(i), w);
        }
      hnext = norm2(w);
      h(j + 1, j) = hnext;
      if (hnext > kBreakdownTol * wnorm) {
        scale(1.0 / hnext, w);
        v.append_column(w);
      } else {
        out.breakdown = true;
      }
    }
    for (std::size_t i = 0; i < j; ++i) {
      const double a = h(i, j), bb = h(i + 1, j);
      h(i, j) = cs[i] * a + sn[i] * bb;
      h(i + 1, j) = -sn[i] * a + cs[i] * bb;
    }
    const double a = h(j, j), bb = h(j + 1, j);
    const double rr = std::hypot(a, bb);
    cs[j] = rr == 0.0 ? 1.0 : a / rr;
    sn[j] = rr == 0.0 ? 0.0 : bb / rr;
    h(j, j) = rr;
    h(j + 1, j) = 0.0;
    gvec[j + 1] = -sn[j] * gvec[j];
    gvec[j] = cs[j] * gvec[j];
    out.residuals.push_back(std::abs(gvec[j + 1]));
    out.step_ms.push_back(ms_since(t0));
    k = j + 1;
    if (out.breakdown) break;
  }
  Vector y(k);
  for (std::size_t i = k; i-- > 0;) {
    double sum = gvec[i];
    for (std::size_t l = i + 1; l < k; ++l) sum -= h(i, l) * y[l];
    y[i] = h(i, i) == 0.0 ? 0.0 : sum / h(i, i);
  }
  for (std::size_t j = 0; j < k; ++j) axpy(y[j], v.col(j), out.x);
  out.iterations = k;
  out.basis_ms = basis_ms;
  out.total_ms = ms_since(t0);
  return out;
}

}  // namespace sketchy
