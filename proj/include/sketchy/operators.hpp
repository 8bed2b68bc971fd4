#pragma once

// Matrix-free linear operators and the test-problem generators built on them.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sketchy/dense.hpp"

namespace sketchy {

class LinearOperator {
 public:
  virtual ~LinearOperator() = default;

  virtual std::size_t rows() const noexcept = 0;
  virtual std::size_t cols() const noexcept = 0;
  /// y = A x. x and y must not alias.
  virtual void apply(std::span<const double> x, std::span<double> y) const = 0;

  virtual bool has_transpose() const noexcept { return false; }
  /// y = A^T x; throws ArgumentError unless has_transpose().
  virtual void apply_transpose(std::span<const double> x, std::span<double> y) const;

  Vector apply(std::span<const double> x) const;
  Vector apply_transpose(std::span<const double> x) const;
  DenseMatrix to_dense() const;

 protected:
  void check_apply(std::span<const double> x, std::span<double> y) const;
  void check_apply_transpose(std::span<const double> x, std::span<double> y) const;
};

using OperatorPtr = std::shared_ptr<const LinearOperator>;

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Compressed sparse row matrix.
class SparseCsr : public LinearOperator {
 public:
  SparseCsr() = default;
  /// Validates every CSR invariant; throws ArgumentError on violation.
  SparseCsr(std::size_t n_rows, std::size_t n_cols, std::vector<std::size_t> row_starts,
            std::vector<std::size_t> col_indices, std::vector<double> values);
  /// Sorts and sums duplicate entries. Explicit zeros are kept.
  static SparseCsr from_triplets(std::size_t n_rows, std::size_t n_cols, std::vector<Triplet> entries);
  static SparseCsr from_dense(const DenseMatrix& m);
  static SparseCsr identity(std::size_t n);

  std::size_t rows() const noexcept override { return n_rows_; }
  std::size_t cols() const noexcept override { return n_cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }
  const std::vector<std::size_t>& row_starts() const noexcept { return row_starts_; }
  const std::vector<std::size_t>& col_indices() const noexcept { return col_indices_; }
  const std::vector<double>& values() const noexcept { return values_; }

  using LinearOperator::apply;
  using LinearOperator::apply_transpose;
  void apply(std::span<const double> x, std::span<double> y) const override;
  bool has_transpose() const noexcept override { return true; }
  void apply_transpose(std::span<const double> x, std::span<double> y) const override;

  SparseCsr transpose() const;
  bool operator==(const SparseCsr& other) const;

 private:
  std::size_t n_rows_ = 0;
  std::size_t n_cols_ = 0;
  std::vector<std::size_t> row_starts_{0};
  std::vector<std::size_t> col_indices_;
  std::vector<double> values_;
};

class DenseOperator : public LinearOperator {
 public:
  explicit DenseOperator(DenseMatrix m) : m_(std::move(m)) {}
  std::size_t rows() const noexcept override { return m_.rows(); }
  std::size_t cols() const noexcept override { return m_.cols(); }
  using LinearOperator::apply;
  using LinearOperator::apply_transpose;
  void apply(std::span<const double> x, std::span<double> y) const override;
  bool has_transpose() const noexcept override { return true; }
  void apply_transpose(std::span<const double> x, std::span<double> y) const override;
  const DenseMatrix& matrix() const noexcept { return m_; }

 private:
  DenseMatrix m_;
};

class DiagonalOperator : public LinearOperator {
 public:
  explicit DiagonalOperator(Vector diag) : diag_(std::move(diag)) {}
  std::size_t rows() const noexcept override { return diag_.size(); }
  std::size_t cols() const noexcept override { return diag_.size(); }
  using LinearOperator::apply;
  using LinearOperator::apply_transpose;
  void apply(std::span<const double> x, std::span<double> y) const override;
  bool has_transpose() const noexcept override { return true; }
  void apply_transpose(std::span<const double> x, std::span<double> y) const override;
  const Vector& diagonal() const noexcept { return diag_; }

 private:
  Vector diag_;
};

/// Block operator of the trust-region subproblem min g^T x + x^T A x / 2, ||x|| <= Delta.
///   as_printed:    (x1; x2) -> (A x1 + Delta^-2 g (g^T x2); -x1 + A x2)
///   trs_reduction: (x1; x2) -> (-A x1 + Delta^-2 g (g^T x2); x1 - A x2)
/// The reduction form has the Lagrange multiplier of the subproblem as its
/// rightmost (real) eigenvalue; the other form is kept for its simple block
/// structure.
enum class TrsForm { as_printed, trs_reduction };

class TrsOperator : public LinearOperator {
 public:
  TrsOperator(SparseCsr a, Vector g, double delta, TrsForm form = TrsForm::trs_reduction);
  std::size_t rows() const noexcept override { return 2 * a_.rows(); }
  std::size_t cols() const noexcept override { return 2 * a_.rows(); }
  using LinearOperator::apply;
  void apply(std::span<const double> x, std::span<double> y) const override;

  const SparseCsr& inner() const noexcept { return a_; }
  const Vector& g() const noexcept { return g_; }
  double delta() const noexcept { return delta_; }
  TrsForm form() const noexcept { return form_; }

 private:
  SparseCsr a_;
  Vector g_;
  double delta_;
  TrsForm form_;
};

using SolveHandle = std::function<void(std::span<const double>, std::span<double>)>;

/// x -> P^{-1} (A x)
class PreconditionedOperator : public LinearOperator {
 public:
  PreconditionedOperator(OperatorPtr inner, SolveHandle solve);
  std::size_t rows() const noexcept override { return inner_->rows(); }
  std::size_t cols() const noexcept override { return inner_->cols(); }
  using LinearOperator::apply;
  void apply(std::span<const double> x, std::span<double> y) const override;

 private:
  OperatorPtr inner_;
  SolveHandle solve_;
};

/// x -> A x - shift x
class ShiftedOperator : public LinearOperator {
 public:
  ShiftedOperator(OperatorPtr inner, double shift) : inner_(std::move(inner)), shift_(shift) {}
  std::size_t rows() const noexcept override { return inner_->rows(); }
  std::size_t cols() const noexcept override { return inner_->cols(); }
  using LinearOperator::apply;
  void apply(std::span<const double> x, std::span<double> y) const override;

 private:
  OperatorPtr inner_;
  double shift_;
};

/// 5-point graph Laplacian on an m x m grid with Neumann boundaries: the
/// diagonal holds the neighbour count, so constants span the kernel and the
/// spectrum is {4 - 2cos(pi i/m) - 2cos(pi j/m)} in [0, 8).
SparseCsr laplacian_2d(std::size_t m);

/// Symmetric tridiagonal n x n: diagonal equispaced on [-1, 1], off-diagonals 1.
SparseCsr trs_inner_matrix(std::size_t n);
TrsOperator trs_operator(std::size_t n, double g_scale = 0.01, double delta = 1.0,
                         std::uint64_t seed = 0, TrsForm form = TrsForm::trs_reduction);

/// Ten seeded values uniform in [-1, -0.1] followed by n-10 values equispaced on [0, 1].
DiagonalOperator planted_diagonal(std::size_t n, std::uint64_t seed);
inline constexpr std::size_t kPlantedCount = 10;

/// Random sparse nonsymmetric n x n matrix: about `per_row` off-diagonal
/// normal entries per row plus `diag_shift` on the diagonal.
SparseCsr random_sparse(std::size_t n, std::size_t per_row, double diag_shift, std::uint64_t seed);

SparseCsr read_matrix_market(const std::string& path);
SparseCsr read_matrix_market(std::istream& in);
/// Writes coordinate real general format with full precision.
void write_matrix_market(const std::string& path, const SparseCsr& a);
void write_matrix_market(std::ostream& out, const SparseCsr& a);

}  // namespace sketchy
