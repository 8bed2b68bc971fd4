#pragma once

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace sketchy {

using Vector = std::vector<double>;
using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;

/// Column-major dense real matrix. Columns are contiguous so that a column
/// can be handed out as a span (basis vectors, sketched columns, ...).
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);

  static DenseMatrix identity(std::size_t n);
  /// Row-major literal, handy in tests: from_rows({{1, 2}, {3, 4}}).
  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static DenseMatrix from_columns(const std::vector<Vector>& columns);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0 || cols_ == 0; }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[j * rows_ + i]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[j * rows_ + i]; }

  std::span<double> col(std::size_t j) noexcept { return {data_.data() + j * rows_, rows_}; }
  std::span<const double> col(std::size_t j) const noexcept {
    return {data_.data() + j * rows_, rows_};
  }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  /// Copy of columns [first, first + count).
  DenseMatrix columns(std::size_t first, std::size_t count) const;
  /// Copy of the block starting at (r0, c0) with the given extents.
  DenseMatrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const;
  DenseMatrix transpose() const;

  void append_column(std::span<const double> c);
  /// Drops trailing columns; no-op if count >= cols().
  void truncate_columns(std::size_t count);
  void reserve_columns(std::size_t count) { data_.reserve(count * rows_); }

  bool all_finite() const noexcept;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double dot(std::span<const double> x, std::span<const double> y) noexcept;
double norm2(std::span<const double> x) noexcept;
/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept;
void scale(double alpha, std::span<double> x) noexcept;

double frobenius_norm(const DenseMatrix& m) noexcept;
DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b);

/// a * b
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
/// a^T * b
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
/// a * x
Vector matvec(const DenseMatrix& a, std::span<const double> x);
/// a^T * x
Vector matvec_t(const DenseMatrix& a, std::span<const double> x);

/// a * y for complex coefficients y; the result is returned as a complex vector.
ComplexVector matvec(const DenseMatrix& a, std::span<const Complex> y);

}  // namespace sketchy
