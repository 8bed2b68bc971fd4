// Nonsymmetric dense eigensolver: orthogonal Hessenberg reduction followed by
// the Francis double-shift QR iteration and back substitution on the real
// Schur form (the classic orthes / hqr2 pair).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sketchy/errors.hpp"
#include "sketchy/kernels.hpp"

namespace sketchy {

namespace {

void complex_divide(double xr, double xi, double yr, double yi, double& cr, double& ci) {
  if (std::abs(yr) > std::abs(yi)) {
    const double r = yi / yr;
    const double d = yr + r * yi;
    cr = (xr + r * xi) / d;
    ci = (xi - r * xr) / d;
  } else {
    const double r = yr / yi;
    const double d = yi + r * yr;
    cr = (r * xr + xi) / d;
    ci = (r * xi - xr) / d;
  }
}

class RealSchur {
 public:
  explicit RealSchur(const DenseMatrix& a)
      : nn_(static_cast<int>(a.rows())), h_(a), v_(DenseMatrix::identity(a.rows())),
        d_(a.rows(), 0.0), e_(a.rows(), 0.0) {}

  void reduce_to_hessenberg();
  // Returns false if the iteration budget ran out; `deflated_from` then marks
  // the first index whose eigenvalue is final.
  bool iterate(int max_iterations);
  void back_substitute();

  const Vector& re() const { return d_; }
  const Vector& im() const { return e_; }
  const DenseMatrix& vectors() const { return v_; }
  int deflated_from() const { return active_ + 1; }

 private:
  double& H(int i, int j) { return h_(static_cast<std::size_t>(i), static_cast<std::size_t>(j)); }
  double& V(int i, int j) { return v_(static_cast<std::size_t>(i), static_cast<std::size_t>(j)); }

  int nn_;
  DenseMatrix h_;
  DenseMatrix v_;
  Vector d_;
  Vector e_;
  double norm_ = 0.0;
  int active_ = -1;
};

void RealSchur::reduce_to_hessenberg() {
  const int low = 0;
  const int high = nn_ - 1;
  Vector ort(static_cast<std::size_t>(nn_), 0.0);
  for (int m = low + 1; m <= high - 1; ++m) {
    double scale = 0.0;
    for (int i = m; i <= high; ++i) scale += std::abs(H(i, m - 1));
    if (scale == 0.0) continue;
    double h = 0.0;
    for (int i = high; i >= m; --i) {
      ort[i] = H(i, m - 1) / scale;
      h += ort[i] * ort[i];
    }
    double g = std::sqrt(h);
    if (ort[m] > 0) g = -g;
    h -= ort[m] * g;
    ort[m] -= g;
    for (int j = m; j < nn_; ++j) {
      double f = 0.0;
      for (int i = high; i >= m; --i) f += ort[i] * H(i, j);
      f /= h;
      for (int i = m; i <= high; ++i) H(i, j) -= f * ort[i];
    }
    for (int i = 0; i <= high; ++i) {
      double f = 0.0;
      for (int j = high; j >= m; --j) f += ort[j] * H(i, j);
      f /= h;
      for (int j = m; j <= high; ++j) H(i, j) -= f * ort[j];
    }
    ort[m] = scale * ort[m];
    H(m, m - 1) = scale * g;
  }
  for (int m = high - 1; m >= low + 1; --m) {
    if (H(m, m - 1) == 0.0) continue;
    for (int i = m + 1; i <= high; ++i) ort[i] = H(i, m - 1);
    for (int j = m; j <= high; ++j) {
      double g = 0.0;
      for (int i = m; i <= high; ++i) g += ort[i] * V(i, j);
      g = (g / ort[m]) / H(m, m - 1);
      for (int i = m; i <= high; ++i) V(i, j) += g * ort[i];
    }
  }
}

bool RealSchur::iterate(int max_iterations) {
  const int low = 0;
  const int high = nn_ - 1;
  const double eps = std::numeric_limits<double>::epsilon();
  double exshift = 0.0;
  double p = 0, q = 0, r = 0, s = 0, z = 0, w, x, y;

  norm_ = 0.0;
  for (int i = 0; i < nn_; ++i)
    for (int j = std::max(i - 1, 0); j < nn_; ++j) norm_ += std::abs(H(i, j));

  int n = nn_ - 1;
  int iter = 0;
  int total = 0;
  while (n >= low) {
    active_ = n;
    int l = n;
    while (l > low) {
      s = std::abs(H(l - 1, l - 1)) + std::abs(H(l, l));
      if (s == 0.0) s = norm_;
      if (std::abs(H(l, l - 1)) < eps * s) break;
      --l;
    }
    if (l == n) {
      H(n, n) += exshift;
      d_[n] = H(n, n);
      e_[n] = 0.0;
      --n;
      iter = 0;
    } else if (l == n - 1) {
      w = H(n, n - 1) * H(n - 1, n);
      p = (H(n - 1, n - 1) - H(n, n)) / 2.0;
      q = p * p + w;
      z = std::sqrt(std::abs(q));
      H(n, n) += exshift;
      H(n - 1, n - 1) += exshift;
      x = H(n, n);
      if (q >= 0) {
        z = p >= 0 ? p + z : p - z;
        d_[n - 1] = x + z;
        d_[n] = d_[n - 1];
        if (z != 0.0) d_[n] = x - w / z;
        e_[n - 1] = 0.0;
        e_[n] = 0.0;
        x = H(n, n - 1);
        s = std::abs(x) + std::abs(z);
        p = x / s;
        q = z / s;
        r = std::sqrt(p * p + q * q);
        p /= r;
        q /= r;
        for (int j = n - 1; j < nn_; ++j) {
          z = H(n - 1, j);
          H(n - 1, j) = q * z + p * H(n, j);
          H(n, j) = q * H(n, j) - p * z;
        }
        for (int i = 0; i <= n; ++i) {
          z = H(i, n - 1);
          H(i, n - 1) = q * z + p * H(i, n);
          H(i, n) = q * H(i, n) - p * z;
        }
        for (int i = low; i <= high; ++i) {
          z = V(i, n - 1);
          V(i, n - 1) = q * z + p * V(i, n);
          V(i, n) = q * V(i, n) - p * z;
        }
      } else {
        d_[n - 1] = x + p;
        d_[n] = x + p;
        e_[n - 1] = z;
        e_[n] = -z;
      }
      n -= 2;
      iter = 0;
    } else {
      if (++total > max_iterations) return false;
      x = H(n, n);
      y = 0.0;
      w = 0.0;
      if (l < n) {
        y = H(n - 1, n - 1);
        w = H(n, n - 1) * H(n - 1, n);
      }
      if (iter == 10) {
        exshift += x;
        for (int i = low; i <= n; ++i) H(i, i) -= x;
        s = std::abs(H(n, n - 1)) + std::abs(H(n - 1, n - 2));
        x = y = 0.75 * s;
        w = -0.4375 * s * s;
      }
      if (iter == 30) {
        s = (y - x) / 2.0;
        s = s * s + w;
        if (s > 0) {
          s = std::sqrt(s);
          if (y < x) s = -s;
          s = x - w / ((y - x) / 2.0 + s);
          for (int i = low; i <= n; ++i) H(i, i) -= s;
          exshift += s;
          x = y = w = 0.964;
        }
      }
      ++iter;

      int m = n - 2;
      while (m >= l) {
        z = H(m, m);
        r = x - z;
        s = y - z;
        p = (r * s - w) / H(m + 1, m) + H(m, m + 1);
        q = H(m + 1, m + 1) - z - r - s;
        r = H(m + 2, m + 1);
        s = std::abs(p) + std::abs(q) + std::abs(r);
        p /= s;
        q /= s;
        r /= s;
        if (m == l) break;
        if (std::abs(H(m, m - 1)) * (std::abs(q) + std::abs(r)) <
            eps * (std::abs(p) * (std::abs(H(m - 1, m - 1)) + std::abs(z) + std::abs(H(m + 1, m + 1)))))
          break;
        --m;
      }
      for (int i = m + 2; i <= n; ++i) {
        H(i, i - 2) = 0.0;
        if (i > m + 2) H(i, i - 3) = 0.0;
      }

      for (int k = m; k <= n - 1; ++k) {
        const bool notlast = k != n - 1;
        if (k != m) {
          p = H(k, k - 1);
          q = H(k + 1, k - 1);
          r = notlast ? H(k + 2, k - 1) : 0.0;
          x = std::abs(p) + std::abs(q) + std::abs(r);
          if (x == 0.0) continue;
          p /= x;
          q /= x;
          r /= x;
        }
        s = std::sqrt(p * p + q * q + r * r);
        if (p < 0) s = -s;
        if (s == 0) continue;
        if (k != m)
          H(k, k - 1) = -s * x;
        else if (l != m)
          H(k, k - 1) = -H(k, k - 1);
        p += s;
        x = p / s;
        y = q / s;
        z = r / s;
        q /= p;
        r /= p;
        for (int j = k; j < nn_; ++j) {
          p = H(k, j) + q * H(k + 1, j);
          if (notlast) {
            p += r * H(k + 2, j);
            H(k + 2, j) -= p * z;
          }
          H(k, j) -= p * x;
          H(k + 1, j) -= p * y;
        }
        for (int i = 0; i <= std::min(n, k + 3); ++i) {
          p = x * H(i, k) + y * H(i, k + 1);
          if (notlast) {
            p += z * H(i, k + 2);
            H(i, k + 2) -= p * r;
          }
          H(i, k) -= p;
          H(i, k + 1) -= p * q;
        }
        for (int i = low; i <= high; ++i) {
          p = x * V(i, k) + y * V(i, k + 1);
          if (notlast) {
            p += z * V(i, k + 2);
            V(i, k + 2) -= p * r;
          }
          V(i, k) -= p;
          V(i, k + 1) -= p * q;
        }
      }
    }
  }
  active_ = -1;
  return true;
}

void RealSchur::back_substitute() {
  const int low = 0;
  const int high = nn_ - 1;
  const double eps = std::numeric_limits<double>::epsilon();
  if (norm_ == 0.0) return;
  double p, q, r = 0, s = 0, t, w, x, y, z = 0;
  double cr, ci;

  for (int n = nn_ - 1; n >= 0; --n) {
    p = d_[n];
    q = e_[n];
    if (q == 0) {
      int l = n;
      H(n, n) = 1.0;
      for (int i = n - 1; i >= 0; --i) {
        w = H(i, i) - p;
        r = 0.0;
        for (int j = l; j <= n; ++j) r += H(i, j) * H(j, n);
        if (e_[i] < 0.0) {
          z = w;
          s = r;
        } else {
          l = i;
          if (e_[i] == 0.0) {
            H(i, n) = w != 0.0 ? -r / w : -r / (eps * norm_);
          } else {
            x = H(i, i + 1);
            y = H(i + 1, i);
            q = (d_[i] - p) * (d_[i] - p) + e_[i] * e_[i];
            t = (x * s - z * r) / q;
            H(i, n) = t;
            H(i + 1, n) = std::abs(x) > std::abs(z) ? (-r - w * t) / x : (-s - y * t) / z;
          }
          t = std::abs(H(i, n));
          if ((eps * t) * t > 1)
            for (int j = i; j <= n; ++j) H(j, n) /= t;
        }
      }
    } else if (q < 0) {
      int l = n - 1;
      if (std::abs(H(n, n - 1)) > std::abs(H(n - 1, n))) {
        H(n - 1, n - 1) = q / H(n, n - 1);
        H(n - 1, n) = -(H(n, n) - p) / H(n, n - 1);
      } else {
        complex_divide(0.0, -H(n - 1, n), H(n - 1, n - 1) - p, q, cr, ci);
        H(n - 1, n - 1) = cr;
        H(n - 1, n) = ci;
      }
      H(n, n - 1) = 0.0;
      H(n, n) = 1.0;
      for (int i = n - 2; i >= 0; --i) {
        double ra = 0.0, sa = 0.0;
        for (int j = l; j <= n; ++j) {
          ra += H(i, j) * H(j, n - 1);
          sa += H(i, j) * H(j, n);
        }
        w = H(i, i) - p;
        if (e_[i] < 0.0) {
          z = w;
          r = ra;
          s = sa;
        } else {
          l = i;
          if (e_[i] == 0) {
            complex_divide(-ra, -sa, w, q, cr, ci);
            H(i, n - 1) = cr;
            H(i, n) = ci;
          } else {
            x = H(i, i + 1);
            y = H(i + 1, i);
            double vr = (d_[i] - p) * (d_[i] - p) + e_[i] * e_[i] - q * q;
            const double vi = (d_[i] - p) * 2.0 * q;
            if (vr == 0.0 && vi == 0.0)
              vr = eps * norm_ * (std::abs(w) + std::abs(q) + std::abs(x) + std::abs(y) + std::abs(z));
            complex_divide(x * r - z * ra + q * sa, x * s - z * sa - q * ra, vr, vi, cr, ci);
            H(i, n - 1) = cr;
            H(i, n) = ci;
            if (std::abs(x) > std::abs(z) + std::abs(q)) {
              H(i + 1, n - 1) = (-ra - w * H(i, n - 1) + q * H(i, n)) / x;
              H(i + 1, n) = (-sa - w * H(i, n) - q * H(i, n - 1)) / x;
            } else {
              complex_divide(-r - y * H(i, n - 1), -s - y * H(i, n), z, q, cr, ci);
              H(i + 1, n - 1) = cr;
              H(i + 1, n) = ci;
            }
          }
          t = std::max(std::abs(H(i, n - 1)), std::abs(H(i, n)));
          if ((eps * t) * t > 1)
            for (int j = i; j <= n; ++j) {
              H(j, n - 1) /= t;
              H(j, n) /= t;
            }
        }
      }
    }
  }

  // V <- V * (upper triangular part of H), column by column from the right.
  Vector tmp(static_cast<std::size_t>(nn_));
  for (int j = nn_ - 1; j >= low; --j) {
    std::fill(tmp.begin(), tmp.end(), 0.0);
    for (int k = low; k <= std::min(j, high); ++k) {
      const double hkj = H(k, j);
      if (hkj == 0.0) continue;
      for (int i = low; i <= high; ++i) tmp[i] += V(i, k) * hkj;
    }
    for (int i = low; i <= high; ++i) V(i, j) = tmp[i];
  }
}

void normalize(ComplexVector& v) {
  double s = 0.0;
  for (const auto& c : v) s += std::norm(c);
  s = std::sqrt(s);
  if (s == 0.0) return;
  // Rotate so the largest component is real and positive; keeps the output
  // deterministic without changing the eigenvector direction.
  std::size_t imax = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[imax])) imax = i;
  const Complex phase = std::abs(v[imax]) > 0 ? std::conj(v[imax]) / std::abs(v[imax]) : Complex(1.0);
  for (auto& c : v) c = c * phase / s;
}

}  // namespace

ComplexEigenDecomposition dense_eig(const DenseMatrix& m) {
  if (m.rows() != m.cols()) throw ArgumentError("dense_eig: matrix must be square");
  if (!m.all_finite()) throw ArgumentError("dense_eig: non-finite entries");
  const std::size_t d = m.rows();
  ComplexEigenDecomposition out;
  if (d == 0) return out;

  RealSchur schur(m);
  schur.reduce_to_hessenberg();
  if (!schur.iterate(60 * static_cast<int>(d))) {
    ComplexEigenDecomposition partial;
    for (std::size_t i = static_cast<std::size_t>(schur.deflated_from()); i < d; ++i)
      partial.values.emplace_back(schur.re()[i], schur.im()[i]);
    std::sort(partial.values.begin(), partial.values.end(), eigenvalue_order);
    throw ConvergenceError("dense_eig: QR iteration did not converge", std::move(partial));
  }
  schur.back_substitute();

  const Vector& re = schur.re();
  const Vector& im = schur.im();
  const DenseMatrix& v = schur.vectors();
  std::vector<ComplexVector> vecs(d);
  ComplexVector vals(d);
  for (std::size_t j = 0; j < d; ++j) {
    vals[j] = {re[j], im[j]};
    vecs[j].resize(d);
    if (im[j] == 0.0) {
      for (std::size_t i = 0; i < d; ++i) vecs[j][i] = v(i, j);
    } else if (im[j] > 0.0) {
      for (std::size_t i = 0; i < d; ++i) vecs[j][i] = {v(i, j), v(i, j + 1)};
    } else {
      for (std::size_t i = 0; i < d; ++i) vecs[j][i] = {v(i, j - 1), -v(i, j)};
    }
    normalize(vecs[j]);
  }

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return eigenvalue_order(vals[a], vals[b]); });
  out.values.reserve(d);
  out.vectors.reserve(d);
  for (std::size_t k : order) {
    out.values.push_back(vals[k]);
    out.vectors.push_back(std::move(vecs[k]));
  }
  return out;
}

}  // namespace sketchy
