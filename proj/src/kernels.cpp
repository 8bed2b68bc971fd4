#include "sketchy/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sketchy/errors.hpp"

namespace sketchy {

namespace {

struct Reflector {
  double tau = 0.0;
  double r = 0.0;  // resulting leading entry
};

// Householder vector for x (in place): on return x[0] = 1 (implicit),
// x[1:] holds the vector tail, and H x_orig = r e_1 with H = I - tau v v^T.
Reflector make_reflector(std::span<double> x) {
  Reflector h;
  const double alpha = x[0];
  const double xnorm = norm2(x.subspan(1));
  if (xnorm == 0.0) {
    h.tau = 0.0;
    h.r = alpha;
    x[0] = 1.0;
    return h;
  }
  const double beta = -std::copysign(std::hypot(alpha, xnorm), alpha);
  h.tau = (beta - alpha) / beta;
  const double inv = 1.0 / (alpha - beta);
  for (std::size_t i = 1; i < x.size(); ++i) x[i] *= inv;
  x[0] = 1.0;
  h.r = beta;
  return h;
}

// y <- (I - tau v v^T) y, where v and y have equal length and v[0] == 1.
void reflect(double tau, std::span<const double> v, std::span<double> y) noexcept {
  if (tau == 0.0) return;
  const double w = tau * dot(v, y);
  axpy(-w, v, y);
}

}  // namespace

// ---------------------------------------------------------------------------
// Batch Householder QR

QrFactors householder_qr(const DenseMatrix& m) {
  const std::size_t s = m.rows();
  const std::size_t d = m.cols();
  if (s < d) throw ArgumentError("householder_qr: requires rows >= cols");
  if (!m.all_finite()) throw ArgumentError("householder_qr: non-finite entries");

  DenseMatrix a = m;
  Vector tau(d, 0.0), diag(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    auto x = a.col(j).subspan(j);
    const Reflector h = make_reflector(x);
    tau[j] = h.tau;
    diag[j] = h.r;
    for (std::size_t k = j + 1; k < d; ++k) reflect(h.tau, x, a.col(k).subspan(j));
  }

  QrFactors f{DenseMatrix(s, d), DenseMatrix(d, d)};
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < j; ++i) f.T(i, j) = a(i, j);
    f.T(j, j) = diag[j];
  }
  for (std::size_t j = 0; j < d; ++j) f.U(j, j) = 1.0;
  for (std::size_t jj = d; jj-- > 0;) {
    auto v = a.col(jj).subspan(jj);
    for (std::size_t k = jj; k < d; ++k) reflect(tau[jj], v, f.U.col(k).subspan(jj));
  }
  for (std::size_t i = 0; i < d; ++i) {
    if (diag[i] >= 0.0) continue;
    for (std::size_t k = i; k < d; ++k) f.T(i, k) = -f.T(i, k);
    scale(-1.0, f.U.col(i));
  }
  return f;
}

// ---------------------------------------------------------------------------
// Incremental QR

SketchedQr::SketchedQr(std::size_t rows, std::size_t capacity) : rows_(rows) {
  grow(std::max<std::size_t>(capacity, 1));
}

void SketchedQr::grow(std::size_t needed) {
  if (needed <= capacity_) return;
  const std::size_t cap = std::max(needed, 2 * capacity_);
  std::vector<double> t(cap * cap, 0.0);
  for (std::size_t j = 0; j < size_; ++j)
    std::copy_n(t_.data() + j * capacity_, size_, t.data() + j * cap);
  t_ = std::move(t);
  v_.resize(cap * rows_, 0.0);
  capacity_ = cap;
}

void SketchedQr::apply_reflector(std::size_t j, std::span<double> x) const {
  std::span<const double> v(v_.data() + j * rows_ + j, rows_ - j);
  reflect(beta_[j], v, x.subspan(j));
}

SketchedQr::AppendResult SketchedQr::append_column(std::span<const double> c) {
  if (c.size() != rows_) throw ArgumentError("append_column: length mismatch");
  if (size_ >= rows_) throw ArgumentError("append_column: factor already square");
  for (double v : c)
    if (!std::isfinite(v)) throw ArgumentError("append_column: non-finite entries");
  const std::size_t j = size_;
  grow(j + 1);

  Vector x(c.begin(), c.end());
  for (std::size_t i = 0; i < j; ++i) apply_reflector(i, x);

  std::span<double> v(v_.data() + j * rows_, rows_);
  std::fill(v.begin(), v.end(), 0.0);
  std::copy(x.begin() + j, x.end(), v.begin() + j);
  const Reflector h = make_reflector(v.subspan(j));
  beta_.push_back(h.tau);
  sign_.push_back(h.r < 0.0 ? -1.0 : 1.0);

  double* tcol = t_.data() + j * capacity_;
  for (std::size_t i = 0; i < j; ++i) tcol[i] = sign_[i] * x[i];
  tcol[j] = std::abs(h.r);

  AppendResult res;
  res.diagonal = tcol[j];
  const double cnorm = norm2(c);
  res.rank_deficient = cnorm == 0.0 || tcol[j] < kRankDeficiencyTol * cnorm;
  deficient_ = deficient_ || res.rank_deficient;

  Vector e(rows_, 0.0);
  e[j] = 1.0;
  for (std::size_t i = j + 1; i-- > 0;) apply_reflector(i, e);
  if (sign_[j] < 0.0) scale(-1.0, e);
  u_.insert(u_.end(), e.begin(), e.end());

  if (has_rhs_) apply_reflector(j, qtg_);
  ++size_;
  return res;
}

void SketchedQr::set_rhs(std::span<const double> g) {
  if (g.size() != rows_) throw ArgumentError("set_rhs: length mismatch");
  qtg_.assign(g.begin(), g.end());
  for (std::size_t i = 0; i < size_; ++i) apply_reflector(i, qtg_);
  has_rhs_ = true;
}

DenseMatrix SketchedQr::U() const {
  DenseMatrix u(rows_, size_);
  std::copy(u_.begin(), u_.end(), u.data());
  return u;
}

DenseMatrix SketchedQr::T() const { return T_leading(size_); }

DenseMatrix SketchedQr::T_leading(std::size_t k) const {
  if (k > size_) throw ArgumentError("T_leading: k exceeds factor size");
  DenseMatrix t(k, k);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i <= j; ++i) t(i, j) = t_[j * capacity_ + i];
  return t;
}

SketchedQr::PrefixSolution SketchedQr::solve_prefix(std::size_t k) const {
  if (!has_rhs_) throw ArgumentError("solve_prefix: no right-hand side set");
  if (k > size_) throw ArgumentError("solve_prefix: k exceeds factor size");
  PrefixSolution sol;
  sol.y.resize(k);
  for (std::size_t i = 0; i < k; ++i) sol.y[i] = sign_[i] * qtg_[i];
  for (std::size_t jj = k; jj-- > 0;) {
    const double* tcol = t_.data() + jj * capacity_;
    if (tcol[jj] == 0.0) throw SingularityError("solve_prefix: zero pivot", jj);
    sol.y[jj] /= tcol[jj];
    const double yj = sol.y[jj];
    for (std::size_t i = 0; i < jj; ++i) sol.y[i] -= yj * tcol[i];
  }
  sol.r_est = norm2(std::span<const double>(qtg_).subspan(k));
  return sol;
}

double SketchedQr::residual_norm(std::size_t k) const {
  if (!has_rhs_) throw ArgumentError("residual_norm: no right-hand side set");
  if (k > size_) throw ArgumentError("residual_norm: k exceeds factor size");
  return norm2(std::span<const double>(qtg_).subspan(k));
}

SketchedQr qr_append_column(SketchedQr state, std::span<const double> c) {
  state.append_column(c);
  return state;
}

// ---------------------------------------------------------------------------
// One-sided Jacobi SVD

namespace {

// Orthogonalizes the columns of w in place; accumulates rotations into acc
// when non-null. Returns the number of sweeps used.
int hestenes_sweeps(DenseMatrix& w, DenseMatrix* acc) {
  const std::size_t n = w.cols();
  const double tol = std::max<double>(1.0, std::sqrt(static_cast<double>(w.rows()))) *
                     std::numeric_limits<double>::epsilon();
  Vector norms(n);
  constexpr int kMaxSweeps = 60;
  int sweep = 0;
  for (; sweep < kMaxSweeps; ++sweep) {
    for (std::size_t j = 0; j < n; ++j) norms[j] = dot(w.col(j), w.col(j));
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = norms[p];
        const double beta = norms[q];
        if (alpha == 0.0 || beta == 0.0) continue;
        const double gamma = dot(w.col(p), w.col(q));
        if (std::abs(gamma) <= tol * std::sqrt(alpha) * std::sqrt(beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::abs(zeta) > 1e150
                             ? 0.5 / zeta
                             : std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        auto rotate = [c, s](std::span<double> x, std::span<double> y) {
          for (std::size_t i = 0; i < x.size(); ++i) {
            const double xi = x[i];
            const double yi = y[i];
            x[i] = c * xi - s * yi;
            y[i] = s * xi + c * yi;
          }
        };
        rotate(w.col(p), w.col(q));
        if (acc) rotate(acc->col(p), acc->col(q));
        norms[p] = std::max(0.0, alpha - t * gamma);
        norms[q] = std::max(0.0, beta + t * gamma);
      }
    }
    if (!rotated) break;
  }
  return sweep;
}

}  // namespace

SvdResult jacobi_svd(const DenseMatrix& m, bool want_vectors) {
  if (!m.all_finite()) throw ArgumentError("jacobi_svd: non-finite entries");
  if (m.rows() < m.cols()) {
    SvdResult t = jacobi_svd(m.transpose(), want_vectors);
    std::swap(t.U, t.V);
    return t;
  }
  const std::size_t d = m.cols();
  SvdResult out;
  if (d == 0) {
    out.U = DenseMatrix(m.rows(), 0);
    out.V = DenseMatrix(0, 0);
    return out;
  }
  QrFactors qr = householder_qr(m);
  // Jacobi on R^T: R^T = W Sigma Acc^T after orthogonalization, so the left
  // singular vectors of R are the accumulated rotations.
  DenseMatrix w = qr.T.transpose();
  DenseMatrix acc;
  if (want_vectors) acc = DenseMatrix::identity(d);
  hestenes_sweeps(w, want_vectors ? &acc : nullptr);

  Vector sigma(d);
  for (std::size_t j = 0; j < d; ++j) sigma[j] = norm2(w.col(j));
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sigma[a] > sigma[b]; });

  out.sigma.resize(d);
  for (std::size_t k = 0; k < d; ++k) out.sigma[k] = sigma[order[k]];
  if (!want_vectors) return out;

  DenseMatrix left(d, d), right(d, d);
  for (std::size_t k = 0; k < d; ++k) {
    const std::size_t j = order[k];
    std::copy(acc.col(j).begin(), acc.col(j).end(), left.col(k).begin());
    if (sigma[j] > 0.0) {
      auto r = right.col(k);
      std::copy(w.col(j).begin(), w.col(j).end(), r.begin());
      scale(1.0 / sigma[j], r);
    }
  }
  out.U = matmul(qr.U, left);
  out.V = std::move(right);
  return out;
}

Vector singular_values(const DenseMatrix& m) { return jacobi_svd(m, false).sigma; }

TruncatedSvd truncated_svd(const DenseMatrix& m, double tol) {
  if (!(tol > 1.0)) throw ArgumentError("truncated_svd: tol must exceed 1");
  TruncatedSvd t;
  if (frobenius_norm(m) == 0.0) {
    t.U = DenseMatrix(m.rows(), 0);
    t.V = DenseMatrix(m.cols(), 0);
    return t;
  }
  SvdResult full = jacobi_svd(m, true);
  std::size_t r = 0;
  while (r < full.sigma.size() && full.sigma[r] > 0.0 && full.sigma[0] / full.sigma[r] <= tol) ++r;
  t.rank = r;
  t.U = full.U.columns(0, r);
  t.V = full.V.columns(0, r);
  t.sigma.assign(full.sigma.begin(), full.sigma.begin() + static_cast<std::ptrdiff_t>(r));
  return t;
}

// ---------------------------------------------------------------------------
// Triangular solves and conditioning

Vector solve_upper_triangular(const DenseMatrix& t, std::span<const double> b) {
  const std::size_t d = t.rows();
  if (t.cols() != d || b.size() != d) throw ArgumentError("solve_upper_triangular: dimension mismatch");
  Vector y(b.begin(), b.end());
  for (std::size_t j = d; j-- > 0;) {
    if (t(j, j) == 0.0) throw SingularityError("solve_upper_triangular: zero diagonal", j);
    y[j] /= t(j, j);
    const double yj = y[j];
    auto tc = t.col(j);
    for (std::size_t i = 0; i < j; ++i) y[i] -= yj * tc[i];
  }
  return y;
}

Vector solve_upper_triangular_transpose(const DenseMatrix& t, std::span<const double> b) {
  const std::size_t d = t.rows();
  if (t.cols() != d || b.size() != d) throw ArgumentError("solve_upper_triangular_transpose: dimension mismatch");
  Vector y(b.begin(), b.end());
  for (std::size_t j = 0; j < d; ++j) {
    if (t(j, j) == 0.0) throw SingularityError("solve_upper_triangular_transpose: zero diagonal", j);
    auto tc = t.col(j);
    double s = y[j];
    for (std::size_t i = 0; i < j; ++i) s -= tc[i] * y[i];
    y[j] = s / t(j, j);
  }
  return y;
}

double cond_estimate(const DenseMatrix& t) {
  if (t.empty()) return 1.0;
  const Vector sigma = singular_values(t);
  const double smax = sigma.front();
  const double smin = sigma.back();
  if (smax == 0.0) return std::numeric_limits<double>::infinity();
  if (smin <= smax * std::numeric_limits<double>::min()) return std::numeric_limits<double>::infinity();
  const double k = smax / smin;
  return std::isfinite(k) ? k : std::numeric_limits<double>::infinity();
}

bool eigenvalue_order(const Complex& a, const Complex& b) noexcept {
  if (a.real() != b.real()) return a.real() > b.real();
  return a.imag() > b.imag();
}

}  // namespace sketchy
