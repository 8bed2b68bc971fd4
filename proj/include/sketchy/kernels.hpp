#pragma once

// Small dense kernels: thin Householder QR (batch and column-append),
// one-sided Jacobi SVD, triangular solves, condition numbers and the
// Hessenberg/Francis nonsymmetric eigensolver. Everything here operates on
// the small sketched matrices (s x d with s = O(d)), so simplicity and
// robustness win over blocking.

#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sketchy/dense.hpp"

namespace sketchy {

struct QrFactors {
  DenseMatrix U;  // s x d, orthonormal columns
  DenseMatrix T;  // d x d, upper triangular, nonnegative diagonal
};

/// Thin QR of an s x d matrix with s >= d.
QrFactors householder_qr(const DenseMatrix& m);

/// Relative threshold below which an appended column counts as dependent.
inline constexpr double kRankDeficiencyTol = 1e-14;

/// Incrementally grown thin QR factorization M = U T, one column at a time.
///
/// Householder reflectors are kept so that the factors of the first j
/// columns never change when column j+1 arrives. An optional right-hand side
/// g can be tracked: the rotated vector Q^T g then gives the least-squares
/// solution and residual of min ||M y - g|| for every prefix in O(j^2).
class SketchedQr {
 public:
  SketchedQr() = default;
  explicit SketchedQr(std::size_t rows, std::size_t capacity = 0);

  struct AppendResult {
    bool rank_deficient = false;
    double diagonal = 0.0;  // new T(j, j)
  };

  /// Requires size() < rows().
  AppendResult append_column(std::span<const double> c);

  /// Starts tracking g; replays all reflectors already stored.
  void set_rhs(std::span<const double> g);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return size_; }
  bool rank_deficient() const noexcept { return deficient_; }

  DenseMatrix U() const;
  DenseMatrix T() const;
  /// Leading k x k block of T (the factor of the first k columns).
  DenseMatrix T_leading(std::size_t k) const;
  double t(std::size_t i, std::size_t j) const noexcept { return t_[j * capacity_ + i]; }
  std::span<const double> u_column(std::size_t j) const noexcept {
    return {u_.data() + j * rows_, rows_};
  }

  struct PrefixSolution {
    Vector y;
    double r_est = 0.0;
  };
  /// Least-squares solution using the first k columns (k <= size()).
  /// Requires set_rhs. Throws SingularityError on a zero pivot.
  PrefixSolution solve_prefix(std::size_t k) const;
  /// Residual norm of the prefix-k least-squares problem, O(rows).
  double residual_norm(std::size_t k) const;

 private:
  void grow(std::size_t needed);
  void apply_reflector(std::size_t j, std::span<double> x) const;

  std::size_t rows_ = 0;
  std::size_t size_ = 0;
  std::size_t capacity_ = 0;
  bool deficient_ = false;
  std::vector<double> v_;     // reflector j stored in rows [j, rows_)
  std::vector<double> beta_;
  std::vector<double> sign_;  // +-1 so that T has a nonnegative diagonal
  std::vector<double> t_;     // capacity_ x capacity_, column-major
  std::vector<double> u_;     // rows_ x size_, column-major
  bool has_rhs_ = false;
  Vector qtg_;                // Q^T g
};

/// Same as SketchedQr::append_column but on an explicit (U, T) pair; returns
/// the new state. Prefer the member function for repeated appends.
SketchedQr qr_append_column(SketchedQr state, std::span<const double> c);

struct SvdResult {
  DenseMatrix U;        // rows x r
  Vector sigma;         // nonincreasing
  DenseMatrix V;        // cols x r
};

/// Full thin SVD by one-sided Jacobi (after a QR preconditioning step).
SvdResult jacobi_svd(const DenseMatrix& m, bool want_vectors = true);
Vector singular_values(const DenseMatrix& m);

struct TruncatedSvd {
  DenseMatrix U;  // s x r
  Vector sigma;   // r positive values, nonincreasing, sigma[0]/sigma[r-1] <= tol
  DenseMatrix V;  // d x r
  std::size_t rank = 0;
};

/// Keeps the largest r with sigma_1 / sigma_r <= tol. tol must exceed 1.
TruncatedSvd truncated_svd(const DenseMatrix& m, double tol);

/// Back substitution. Throws SingularityError naming the first zero pivot.
Vector solve_upper_triangular(const DenseMatrix& t, std::span<const double> b);
/// Solves t^T x = b (forward substitution with the transpose).
Vector solve_upper_triangular_transpose(const DenseMatrix& t, std::span<const double> b);

/// sigma_max / sigma_min from the full SVD; +infinity when sigma_min underflows.
double cond_estimate(const DenseMatrix& t);

struct ComplexEigenDecomposition {
  ComplexVector values;                // descending real part, then imaginary part
  std::vector<ComplexVector> vectors;  // vectors[j] pairs with values[j], unit 2-norm
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, ComplexEigenDecomposition partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  /// Eigenvalues deflated before the failure; vectors are empty.
  const ComplexEigenDecomposition& partial() const noexcept { return partial_; }

 private:
  ComplexEigenDecomposition partial_;
};

/// Eigenvalues and eigenvectors of a real square matrix: Hessenberg
/// reduction, Francis double-shift QR, back substitution on the real Schur
/// form. Throws ConvergenceError after 60*d iterations without deflation.
ComplexEigenDecomposition dense_eig(const DenseMatrix& m);

/// Sort key shared by every eigen routine in the library.
bool eigenvalue_order(const Complex& a, const Complex& b) noexcept;

}  // namespace sketchy
