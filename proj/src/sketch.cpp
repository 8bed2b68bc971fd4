#include "sketchy/sketch.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>

#include "sketchy/errors.hpp"
#include "sketchy/kernels.hpp"
#include "sketchy/rng.hpp"

namespace sketchy {

namespace {

// FFTW planning is not thread-safe; execution with fftw_execute is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

void run_r2r(double* data, std::size_t n, std::size_t k, fftw_r2r_kind kind) {
  if (n == 0 || k == 0) return;
  int len = static_cast<int>(n);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_many_r2r(1, &len, static_cast<int>(k), data, nullptr, 1, len, data, nullptr, 1,
                              len, &kind, FFTW_ESTIMATE);
  }
  if (!plan) throw std::runtime_error("fftw: plan creation failed");
  fftw_execute(plan);
  std::lock_guard<std::mutex> lock(fftw_planner_mutex());
  fftw_destroy_plan(plan);
}

constexpr std::size_t kColumnChunk = 32;

}  // namespace

EmbeddingKind parse_embedding_kind(const std::string& name) {
  if (name == "trig" || name == "srft" || name == "dct") return EmbeddingKind::trig;
  if (name == "sparse") return EmbeddingKind::sparse;
  throw ArgumentError("unknown embedding kind '" + name + "' (expected trig or sparse)");
}

std::string to_string(EmbeddingKind kind) { return kind == EmbeddingKind::trig ? "trig" : "sparse"; }

std::size_t sparse_zeta(std::size_t d) {
  return static_cast<std::size_t>(std::ceil(2.0 * std::log1p(static_cast<double>(d))));
}

std::size_t default_sketch_size(std::size_t d, std::size_t n) { return std::min(2 * d + 1, n); }

std::size_t sketch_size_for_distortion(std::size_t d, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw ArgumentError("sketch_size_for_distortion: eps must lie in (0, 1)");
  // the guard keeps eps = 1/sqrt(2) from rounding up past 2d
  return static_cast<std::size_t>(std::ceil(static_cast<double>(d) / (eps * eps) - 1e-9));
}

void dct2_orthonormal(double* data, std::size_t n, std::size_t k) {
  run_r2r(data, n, k, FFTW_REDFT10);
  const double s0 = 0.5 / std::sqrt(static_cast<double>(n));
  const double sk = 1.0 / std::sqrt(2.0 * static_cast<double>(n));
  for (std::size_t c = 0; c < k; ++c) {
    double* col = data + c * n;
    col[0] *= s0;
    for (std::size_t i = 1; i < n; ++i) col[i] *= sk;
  }
}

void dct3_orthonormal(double* data, std::size_t n, std::size_t k) {
  const double s0 = 1.0 / std::sqrt(static_cast<double>(n));
  const double sk = 1.0 / std::sqrt(2.0 * static_cast<double>(n));
  for (std::size_t c = 0; c < k; ++c) {
    double* col = data + c * n;
    col[0] *= s0;
    for (std::size_t i = 1; i < n; ++i) col[i] *= sk;
  }
  run_r2r(data, n, k, FFTW_REDFT01);
}

Embedding::Embedding(EmbeddingKind kind, std::size_t n, std::size_t s, std::uint64_t seed,
                     std::size_t zeta)
    : kind_(kind), n_(n), s_(s), seed_(seed) {
  if (s < 1 || n < 1) throw ArgumentError("embedding: dimensions must be positive");
  if (s > n) throw ArgumentError("embedding: sketch size s=" + std::to_string(s) +
                                 " exceeds ambient dimension n=" + std::to_string(n));
  Rng rng(derive_seed(seed, kind == EmbeddingKind::trig ? 1 : 2));
  if (kind == EmbeddingKind::trig) {
    values_.resize(n);
    for (auto& v : values_) v = rng.sign();
    rows_ = rng.sample_without_replacement(n, s);
    scale_ = std::sqrt(static_cast<double>(n) / static_cast<double>(s));
    return;
  }
  zeta_ = zeta ? zeta : sparse_zeta(std::max<std::size_t>(1, s / 2));
  zeta_ = std::clamp<std::size_t>(zeta_, 1, s);
  const double mag = 1.0 / std::sqrt(static_cast<double>(zeta_));
  rows_.resize(n * zeta_);
  values_.resize(n * zeta_);
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t* r = rows_.data() + j * zeta_;
    if (zeta_ * 4 > s) {
      auto pick = rng.sample_without_replacement(s, zeta_);
      std::copy(pick.begin(), pick.end(), r);
    } else {
      for (std::size_t l = 0; l < zeta_;) {
        const std::size_t cand = rng.index(s);
        if (std::find(r, r + l, cand) == r + l) r[l++] = cand;
      }
    }
    for (std::size_t l = 0; l < zeta_; ++l) values_[j * zeta_ + l] = mag * rng.sign();
  }
}

Embedding make_embedding(EmbeddingKind kind, std::size_t n, std::size_t s, std::uint64_t seed) {
  return Embedding(kind, n, s, seed);
}

void Embedding::force_unit_signs_for_testing() {
  for (auto& v : values_) v = std::abs(v);
}

Vector Embedding::apply(std::span<const double> x) const {
  if (x.size() != n_) throw ArgumentError("embedding apply: vector length " + std::to_string(x.size()) +
                                          " != n=" + std::to_string(n_));
  Vector out(s_, 0.0);
  if (kind_ == EmbeddingKind::sparse) {
    for (std::size_t j = 0; j < n_; ++j) {
      const double xj = x[j];
      if (xj == 0.0) continue;
      for (std::size_t l = 0; l < zeta_; ++l) out[rows_[j * zeta_ + l]] += values_[j * zeta_ + l] * xj;
    }
    return out;
  }
  Vector buf(n_);
  for (std::size_t i = 0; i < n_; ++i) buf[i] = values_[i] * x[i];
  dct2_orthonormal(buf.data(), n_, 1);
  for (std::size_t i = 0; i < s_; ++i) out[i] = scale_ * buf[rows_[i]];
  return out;
}

DenseMatrix Embedding::apply(const DenseMatrix& m) const {
  if (m.rows() != n_) throw ArgumentError("embedding apply: matrix has " + std::to_string(m.rows()) +
                                          " rows, expected n=" + std::to_string(n_));
  const std::size_t d = m.cols();
  DenseMatrix out(s_, d);
  if (kind_ == EmbeddingKind::sparse) {
    for (std::size_t c = 0; c < d; ++c) {
      auto x = m.col(c);
      auto y = out.col(c);
      for (std::size_t j = 0; j < n_; ++j) {
        const double xj = x[j];
        if (xj == 0.0) continue;
        const std::size_t* r = rows_.data() + j * zeta_;
        const double* v = values_.data() + j * zeta_;
        for (std::size_t l = 0; l < zeta_; ++l) y[r[l]] += v[l] * xj;
      }
    }
    return out;
  }
  std::vector<double> buf;
  for (std::size_t c0 = 0; c0 < d; c0 += kColumnChunk) {
    const std::size_t k = std::min(kColumnChunk, d - c0);
    buf.resize(n_ * k);
    for (std::size_t c = 0; c < k; ++c) {
      auto x = m.col(c0 + c);
      double* b = buf.data() + c * n_;
      for (std::size_t i = 0; i < n_; ++i) b[i] = values_[i] * x[i];
    }
    dct2_orthonormal(buf.data(), n_, k);
    for (std::size_t c = 0; c < k; ++c) {
      auto y = out.col(c0 + c);
      const double* b = buf.data() + c * n_;
      for (std::size_t i = 0; i < s_; ++i) y[i] = scale_ * b[rows_[i]];
    }
  }
  return out;
}

Vector Embedding::apply_transpose(std::span<const double> z) const {
  if (z.size() != s_) throw ArgumentError("embedding apply_transpose: length mismatch");
  Vector out(n_, 0.0);
  if (kind_ == EmbeddingKind::sparse) {
    for (std::size_t j = 0; j < n_; ++j) {
      double acc = 0.0;
      for (std::size_t l = 0; l < zeta_; ++l) acc += values_[j * zeta_ + l] * z[rows_[j * zeta_ + l]];
      out[j] = acc;
    }
    return out;
  }
  for (std::size_t i = 0; i < s_; ++i) out[rows_[i]] = scale_ * z[i];
  dct3_orthonormal(out.data(), n_, 1);
  for (std::size_t i = 0; i < n_; ++i) out[i] *= values_[i];
  return out;
}

DenseMatrix whiten(const DenseMatrix& b, const DenseMatrix& t) {
  const std::size_t d = b.cols();
  if (t.rows() != d || t.cols() != d) throw ArgumentError("whiten: T must be d x d");
  DenseMatrix w(b.rows(), d);
  for (std::size_t j = 0; j < d; ++j) {
    if (t(j, j) == 0.0 || !std::isfinite(1.0 / t(j, j)))
      throw SingularityError("whiten: triangular factor is singular", j);
    auto wj = w.col(j);
    std::copy(b.col(j).begin(), b.col(j).end(), wj.begin());
    for (std::size_t i = 0; i < j; ++i)
      if (t(i, j) != 0.0) axpy(-t(i, j), w.col(i), wj);
    scale(1.0 / t(j, j), wj);
  }
  return w;
}

double distortion_monte_carlo(const Embedding& s, const DenseMatrix& q, std::size_t trials,
                              std::uint64_t seed) {
  const DenseMatrix sq = s.apply(q);
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    Vector y = rng.normal_vector(q.cols());
    const double ny = norm2(y);
    scale(1.0 / ny, y);
    worst = std::max(worst, std::abs(norm2(matvec(sq, y)) - 1.0));
  }
  return worst;
}

double distortion_exact(const Embedding& s, const DenseMatrix& q) {
  const Vector sigma = singular_values(s.apply(q));
  return std::max(sigma.front() - 1.0, 1.0 - sigma.back());
}

}  // namespace sketchy
