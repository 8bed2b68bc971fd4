#include "sketchy/dense.hpp"

#include <algorithm>
#include <cmath>

#include "sketchy/errors.hpp"

namespace sketchy {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t nr = rows.size();
  const std::size_t nc = nr == 0 ? 0 : rows.begin()->size();
  DenseMatrix m(nr, nc);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != nc) throw ArgumentError("from_rows: ragged row lengths");
    std::size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

DenseMatrix DenseMatrix::from_columns(const std::vector<Vector>& columns) {
  if (columns.empty()) return {};
  DenseMatrix m(columns.front().size(), 0);
  m.reserve_columns(columns.size());
  for (const auto& c : columns) m.append_column(c);
  return m;
}

DenseMatrix DenseMatrix::columns(std::size_t first, std::size_t count) const {
  if (first + count > cols_) throw ArgumentError("columns: range exceeds matrix");
  DenseMatrix out(rows_, count);
  std::copy_n(data_.data() + first * rows_, count * rows_, out.data_.data());
  return out;
}

DenseMatrix DenseMatrix::block(std::size_t r0, std::size_t c0, std::size_t nr,
                               std::size_t nc) const {
  if (r0 + nr > rows_ || c0 + nc > cols_) throw ArgumentError("block: range exceeds matrix");
  DenseMatrix out(nr, nc);
  for (std::size_t j = 0; j < nc; ++j)
    std::copy_n(data_.data() + (c0 + j) * rows_ + r0, nr, out.data_.data() + j * nr);
  return out;
}

DenseMatrix DenseMatrix::transpose() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t j = 0; j < cols_; ++j)
    for (std::size_t i = 0; i < rows_; ++i) t(j, i) = (*this)(i, j);
  return t;
}

void DenseMatrix::append_column(std::span<const double> c) {
  if (cols_ == 0 && rows_ == 0) rows_ = c.size();
  if (c.size() != rows_) throw ArgumentError("append_column: length mismatch");
  data_.insert(data_.end(), c.begin(), c.end());
  ++cols_;
}

void DenseMatrix::truncate_columns(std::size_t count) {
  if (count >= cols_) return;
  cols_ = count;
  data_.resize(rows_ * cols_);
}

bool DenseMatrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double dot(std::span<const double> x, std::span<const double> y) noexcept {
  double s = 0.0;
  const std::size_t n = std::min(x.size(), y.size());
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

double norm2(std::span<const double> x) noexcept {
  // Scaled accumulation keeps tiny and huge vectors representable.
  double amax = 0.0;
  for (double v : x) amax = std::max(amax, std::abs(v));
  if (amax == 0.0 || !std::isfinite(amax)) return amax;
  if (amax > 1e-150 && amax < 1e150) return std::sqrt(dot(x, x));
  double s = 0.0;
  for (double v : x) {
    const double t = v / amax;
    s += t * t;
  }
  return amax * std::sqrt(s);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
  const std::size_t n = std::min(x.size(), y.size());
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, std::span<double> x) noexcept {
  for (double& v : x) v *= alpha;
}

double frobenius_norm(const DenseMatrix& m) noexcept {
  return norm2(std::span<const double>(m.data(), m.rows() * m.cols()));
}

DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ArgumentError("operator-: shape mismatch");
  DenseMatrix c = a;
  for (std::size_t k = 0; k < a.rows() * a.cols(); ++k) c.data()[k] -= b.data()[k];
  return c;
}

DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ArgumentError("operator+: shape mismatch");
  DenseMatrix c = a;
  for (std::size_t k = 0; k < a.rows() * a.cols(); ++k) c.data()[k] += b.data()[k];
  return c;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw ArgumentError("matmul: inner dimension mismatch");
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    auto cj = c.col(j);
    for (std::size_t l = 0; l < a.cols(); ++l) {
      const double blj = b(l, j);
      if (blj != 0.0) axpy(blj, a.col(l), cj);
    }
  }
  return c;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) throw ArgumentError("matmul_tn: row count mismatch");
  DenseMatrix c(a.cols(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j)
    for (std::size_t i = 0; i < a.cols(); ++i) c(i, j) = dot(a.col(i), b.col(j));
  return c;
}

Vector matvec(const DenseMatrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw ArgumentError("matvec: dimension mismatch");
  Vector y(a.rows(), 0.0);
  for (std::size_t j = 0; j < a.cols(); ++j)
    if (x[j] != 0.0) axpy(x[j], a.col(j), y);
  return y;
}

Vector matvec_t(const DenseMatrix& a, std::span<const double> x) {
  if (a.rows() != x.size()) throw ArgumentError("matvec_t: dimension mismatch");
  Vector y(a.cols());
  for (std::size_t j = 0; j < a.cols(); ++j) y[j] = dot(a.col(j), x);
  return y;
}

ComplexVector matvec(const DenseMatrix& a, std::span<const Complex> y) {
  if (a.cols() != y.size()) throw ArgumentError("matvec: dimension mismatch");
  Vector re(a.rows(), 0.0), im(a.rows(), 0.0);
  for (std::size_t j = 0; j < a.cols(); ++j) {
    if (y[j].real() != 0.0) axpy(y[j].real(), a.col(j), re);
    if (y[j].imag() != 0.0) axpy(y[j].imag(), a.col(j), im);
  }
  ComplexVector out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) out[i] = {re[i], im[i]};
  return out;
}

}  // namespace sketchy
