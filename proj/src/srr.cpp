#include "sketchy/srr.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "sketchy/errors.hpp"
#include "sketchy/kernels.hpp"

namespace sketchy {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double cnorm(const ComplexVector& v) {
  double s = 0.0;
  for (const auto& z : v) s += std::norm(z);
  return std::sqrt(s);
}

void cnormalize(ComplexVector& v) {
  const double s = cnorm(v);
  if (s > 0.0)
    for (auto& z : v) z /= s;
}

// ||D y - theta C y|| / ||C y||
double sketched_residual(const DenseMatrix& c, const DenseMatrix& d, const ComplexVector& y, Complex theta) {
  const ComplexVector cy = matvec(c, y);
  ComplexVector dy = matvec(d, y);
  for (std::size_t i = 0; i < dy.size(); ++i) dy[i] -= theta * cy[i];
  const double den = cnorm(cy);
  return den > 0.0 ? cnorm(dy) / den : std::numeric_limits<double>::infinity();
}

// T^{-1} (U^T D)
DenseMatrix reduced_matrix(const QrFactors& qr, const DenseMatrix& d) {
  const DenseMatrix utd = matmul_tn(qr.U, d);
  DenseMatrix m(utd.rows(), utd.cols());
  for (std::size_t j = 0; j < utd.cols(); ++j) {
    const Vector col = solve_upper_triangular(qr.T, utd.col(j));
    std::copy(col.begin(), col.end(), m.col(j).begin());
  }
  return m;
}

void finish(SrrResult& res, const DenseMatrix& c, const DenseMatrix& d, const DenseMatrix& b,
            const SrrConfig& config) {
  if (config.symmetric) {
    symmetric_postprocess(res, c, d, b, config);
    return;
  }
  std::stable_sort(res.pairs.begin(), res.pairs.end(), [](const EigenPairEstimate& a, const EigenPairEstimate& e) {
    return eigenvalue_order(a.theta, e.theta);
  });
  res.accepted.clear();
  for (std::size_t i = 0; i < res.pairs.size(); ++i) {
    auto& p = res.pairs[i];
    p.accepted = p.r_est < config.tau * res.scale;
    if (!p.accepted) continue;
    res.accepted.push_back(i);
    if (config.assemble_vectors) {
      p.x = matvec(b, p.y);
      cnormalize(p.x);
    }
  }
}

SrrResult srr_impl(const DenseMatrix& b, const DenseMatrix& ab, const SrrConfig& config, bool force_stabilize) {
  if (b.rows() != ab.rows() || b.cols() != ab.cols()) throw ArgumentError("srr: B and AB must have equal shapes");
  const std::size_t n = b.rows();
  const std::size_t d = b.cols();
  if (d == 0) throw ArgumentError("srr: empty basis");
  if (!(config.tau > 0.0)) throw ArgumentError("srr: tau must be positive");
  if (!(config.cond_tol > 1.0)) throw ArgumentError("srr: cond_tol must exceed 1");
  const std::size_t s = config.sketch_size ? config.sketch_size : std::min(4 * d, n);
  if (s > n || s < d) throw ArgumentError("srr: sketch size must lie in [d, n]");

  SrrResult res;
  res.sketch_size = s;
  auto t0 = Clock::now();
  const Embedding emb(config.embedding, n, s, config.seed);
  const DenseMatrix c = emb.apply(b);
  const DenseMatrix dm = emb.apply(ab);
  res.sketch_ms = ms_since(t0);
  t0 = Clock::now();

  const double cf = frobenius_norm(c);
  if (cf == 0.0) throw ArgumentError("srr: basis is zero");
  res.scale = frobenius_norm(dm) / cf;
  if (res.scale == 0.0) res.scale = 1.0;

  const QrFactors qr = householder_qr(c);
  res.cond = cond_estimate(qr.T);
  const bool ill = res.cond > config.cond_tol;
  const bool stabilize =
      force_stabilize || config.stabilize == Stabilize::on || (config.stabilize == Stabilize::automatic && ill);

  if (!stabilize) {
    res.rank = d;
    bool singular = false;
    try {
      res.mhat = reduced_matrix(qr, dm);
    } catch (const SingularityError&) {
      singular = true;
    }
    if (!singular && res.mhat.all_finite()) {
      const auto eig = dense_eig(res.mhat);
      for (std::size_t i = 0; i < d; ++i) {
        EigenPairEstimate p;
        p.theta = eig.values[i];
        p.y = eig.vectors[i];
        p.r_est = sketched_residual(c, dm, p.y, p.theta);
        res.pairs.push_back(std::move(p));
      }
      finish(res, c, dm, b, config);
    }
    res.solve_ms = ms_since(t0);
    if (ill)
      throw ConditioningError("kappa_2(S B) = " + fmt_g(res.cond) + " exceeds cond_tol = " + fmt_g(config.cond_tol) +
                                  "; enable stabilization",
                              std::move(res));
    return res;
  }

  res.stabilized = true;
  const TruncatedSvd t = truncated_svd(c, config.cond_tol);
  res.rank = t.rank;
  if (t.rank == 0) throw BreakdownError("srr: sketched basis has numerical rank zero");
  // (U^T D V) z = theta Sigma z. Solved as (U^T D V Sigma^{-1}) w = theta w with
  // z = Sigma^{-1} w: columns of U^T D V belonging to small sigma are small
  // themselves, so column scaling keeps the reduced matrix balanced where row
  // scaling would inflate its norm by up to cond_tol.
  DenseMatrix k = matmul(matmul_tn(t.U, dm), t.V);
  for (std::size_t j = 0; j < t.rank; ++j)
    for (std::size_t i = 0; i < t.rank; ++i) k(i, j) /= t.sigma[j];
  const auto eig = dense_eig(k);
  for (std::size_t i = 0; i < t.rank; ++i) {
    EigenPairEstimate p;
    p.theta = eig.values[i];
    ComplexVector z = eig.vectors[i];
    for (std::size_t j = 0; j < t.rank; ++j) z[j] /= t.sigma[j];
    p.y = matvec(t.V, z);
    p.r_est = sketched_residual(c, dm, p.y, p.theta);
    res.pairs.push_back(std::move(p));
  }
  finish(res, c, dm, b, config);
  res.solve_ms = ms_since(t0);
  return res;
}

}  // namespace

std::string to_string(Stabilize s) {
  switch (s) {
    case Stabilize::off: return "off";
    case Stabilize::automatic: return "auto";
    case Stabilize::on: return "on";
  }
  return "unknown";
}

Stabilize parse_stabilize(const std::string& name) {
  if (name == "off") return Stabilize::off;
  if (name == "auto") return Stabilize::automatic;
  if (name == "on") return Stabilize::on;
  throw ArgumentError("unknown stabilization mode '" + name + "' (expected off, auto or on)");
}

SrrResult srr(const DenseMatrix& b, const DenseMatrix& ab, const SrrConfig& config) {
  return srr_impl(b, ab, config, false);
}

SrrResult srr(const KrylovBasis& basis, const SrrConfig& config) { return srr(basis.B, basis.AB, config); }

SrrResult srr_stabilized(const DenseMatrix& b, const DenseMatrix& ab, const SrrConfig& config) {
  return srr_impl(b, ab, config, true);
}

SrrResult srr_stabilized(const KrylovBasis& basis, const SrrConfig& config) {
  return srr_stabilized(basis.B, basis.AB, config);
}

void symmetric_postprocess(SrrResult& res, const DenseMatrix& sb, const DenseMatrix& sab, const DenseMatrix& b,
                           const SrrConfig& config) {
  std::vector<EigenPairEstimate> kept;
  res.max_imag_before_realify = 0.0;
  for (auto& p : res.pairs) {
    res.max_imag_before_realify = std::max(res.max_imag_before_realify, std::abs(p.theta.imag()));
    // The member with negative imaginary part realifies to the same pair as its partner.
    if (p.theta.imag() < 0.0) continue;
    p.theta = p.theta.real();
    for (auto& z : p.y) z = z.real();
    cnormalize(p.y);
    p.r_est = sketched_residual(sb, sab, p.y, p.theta);
    p.x.clear();
    kept.push_back(std::move(p));
  }
  res.pairs = std::move(kept);
  std::stable_sort(res.pairs.begin(), res.pairs.end(), [](const EigenPairEstimate& a, const EigenPairEstimate& e) {
    return eigenvalue_order(a.theta, e.theta);
  });
  res.accepted.clear();
  for (std::size_t i = 0; i < res.pairs.size(); ++i) {
    auto& p = res.pairs[i];
    p.accepted = p.r_est < config.tau * res.scale;
    if (!p.accepted) continue;
    res.accepted.push_back(i);
    if (config.assemble_vectors) {
      p.x = matvec(b, p.y);
      cnormalize(p.x);
    }
  }
}

RrResult rr_baseline(const LinearOperator& op, const DenseMatrix& b) {
  if (op.rows() != op.cols() || b.rows() != op.rows()) throw ArgumentError("rr_baseline: dimension mismatch");
  if (b.cols() == 0) throw ArgumentError("rr_baseline: empty basis");
  const auto t0 = Clock::now();
  const QrFactors qr = householder_qr(b);
  double tmax = 0.0;
  for (std::size_t j = 0; j < b.cols(); ++j) tmax = std::max(tmax, qr.T(j, j));
  for (std::size_t j = 0; j < b.cols(); ++j)
    if (!(qr.T(j, j) > kRankDeficiencyTol * tmax))
      throw ArgumentError("rr_baseline: basis is numerically rank deficient at column " + std::to_string(j));
  DenseMatrix aq(b.rows(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j) op.apply(qr.U.col(j), aq.col(j));
  const DenseMatrix h = matmul_tn(qr.U, aq);
  const auto eig = dense_eig(h);
  RrResult out;
  for (std::size_t i = 0; i < eig.values.size(); ++i) {
    RitzPair p;
    p.theta = eig.values[i];
    p.x = matvec(qr.U, eig.vectors[i]);
    ComplexVector ax = matvec(aq, eig.vectors[i]);
    for (std::size_t k = 0; k < ax.size(); ++k) ax[k] -= p.theta * p.x[k];
    p.residual = cnorm(ax) / cnorm(p.x);
    out.pairs.push_back(std::move(p));
  }
  out.solve_ms = ms_since(t0);
  return out;
}

SrrResult sketch_gep(const DenseMatrix& hb, const DenseMatrix& jb, const DenseMatrix& b, const SrrConfig& config) {
  if (hb.rows() != jb.rows() || hb.cols() != jb.cols() || b.cols() != hb.cols())
    throw ArgumentError("sketch_gep: HB, JB and B must have matching shapes");
  const std::size_t n = hb.rows();
  const std::size_t d = hb.cols();
  if (d == 0) throw ArgumentError("sketch_gep: empty basis");
  const std::size_t s = config.sketch_size ? config.sketch_size : std::min(4 * d, n);
  if (s > n || s < d) throw ArgumentError("sketch_gep: sketch size must lie in [d, n]");

  SrrResult res;
  res.sketch_size = s;
  const Embedding emb(config.embedding, n, s, config.seed);
  const DenseMatrix c = emb.apply(jb);
  const DenseMatrix dm = emb.apply(hb);
  const double cf = frobenius_norm(c);
  if (cf == 0.0) throw ArgumentError("sketch_gep: J B is zero");
  res.scale = frobenius_norm(dm) / cf;
  if (res.scale == 0.0) res.scale = 1.0;
  const QrFactors qr = householder_qr(c);
  res.cond = cond_estimate(qr.T);
  res.rank = d;
  if (res.cond > config.cond_tol)
    throw ConditioningError("kappa_2(S J B) = " + fmt_g(res.cond) + " exceeds cond_tol", std::move(res));
  res.mhat = reduced_matrix(qr, dm);
  const auto eig = dense_eig(res.mhat);
  for (std::size_t i = 0; i < d; ++i) {
    EigenPairEstimate p;
    p.theta = eig.values[i];
    p.y = eig.vectors[i];
    p.r_est = sketched_residual(c, dm, p.y, p.theta);
    res.pairs.push_back(std::move(p));
  }
  finish(res, c, dm, b, config);
  return res;
}

LowRankApprox lowrank_approx(const LinearOperator& op, const DenseMatrix& b, const LowRankConfig& config) {
  if (!op.has_transpose()) throw ArgumentError("lowrank_approx: operator must support transpose products");
  if (b.rows() != op.cols()) throw ArgumentError("lowrank_approx: B must have as many rows as A has columns");
  const std::size_t m = op.rows();
  const std::size_t n = op.cols();
  const std::size_t d = b.cols();
  if (d == 0) throw ArgumentError("lowrank_approx: empty basis");
  const std::size_t s = config.sketch_size ? config.sketch_size : std::min(2 * d, m);
  if (s > m || s < d) throw ArgumentError("lowrank_approx: sketch size must lie in [d, m]");

  DenseMatrix ab(m, d);
  for (std::size_t j = 0; j < d; ++j) op.apply(b.col(j), ab.col(j));
  const Embedding emb(config.embedding, m, s, config.seed);
  const DenseMatrix sab = emb.apply(ab);

  // S A, one row at a time: (S A)^T e_i = A^T (S^T e_i).
  DenseMatrix sa_t(n, s);
  Vector e(s, 0.0);
  for (std::size_t i = 0; i < s; ++i) {
    e[i] = 1.0;
    const Vector st = emb.apply_transpose(e);
    op.apply_transpose(st, sa_t.col(i));
    e[i] = 0.0;
  }

  LowRankApprox out;
  const QrFactors qr = householder_qr(sab);
  const double cond = cond_estimate(qr.T);
  if (cond <= config.cond_tol) {
    out.rank = d;
    out.F = whiten(ab, qr.T);
    out.G = matmul_tn(qr.U, sa_t.transpose());
    return out;
  }
  // Ill-conditioned S A B: truncate its SVD instead of inverting T.
  const TruncatedSvd t = truncated_svd(sab, config.cond_tol);
  out.rank = t.rank;
  out.warnings.push_back("kappa_2(S A B) = " + fmt_g(cond) + " exceeds cond_tol; truncated to rank " +
                         std::to_string(t.rank));
  DenseMatrix f = matmul(ab, t.V);
  for (std::size_t j = 0; j < t.rank; ++j) scale(1.0 / t.sigma[j], f.col(j));
  out.F = std::move(f);
  out.G = matmul_tn(t.U, sa_t.transpose());
  return out;
}

DenseMatrix adapted_basis(const LinearOperator& op, std::size_t d, std::size_t q, std::uint64_t seed) {
  if (!op.has_transpose()) throw ArgumentError("adapted_basis: operator must support transpose products");
  DenseMatrix y = householder_qr(random_block(op.cols(), d, seed)).U;
  Vector tmp(op.rows());
  for (std::size_t pass = 0; pass < q; ++pass) {
    DenseMatrix z(op.cols(), d);
    for (std::size_t j = 0; j < d; ++j) {
      op.apply(y.col(j), tmp);
      op.apply_transpose(tmp, z.col(j));
    }
    y = householder_qr(z).U;
  }
  return y;
}

}  // namespace sketchy
