#pragma once

// Krylov basis constructions. Every construction is exposed twice: as a
// generator that hands out one (b_j, A b_j) pair at a time, which is what the
// iterative solvers consume, and as a one-shot builder returning a full
// KrylovBasis.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sketchy/dense.hpp"
#include "sketchy/operators.hpp"

namespace sketchy {

enum class BasisMethod {
  arnoldi,        // k-partial Arnoldi (k = SIZE_MAX: full)
  lanczos,        // partial Arnoldi with k = 2
  chebyshev,      // shifted and scaled Chebyshev in a spectral box
  newton,         // Newton polynomial with given shifts
  monomial,       // normalized powers A^j r
  block_monomial, // B_1 = orth(Omega), B_j = orth(A B_{j-1})
  block_partial,  // block k-partial Arnoldi
  block_chebyshev // Chebyshev recurrence on each column of Omega
};

std::string to_string(BasisMethod m);
bool is_block_method(BasisMethod m) noexcept;

struct SpectralBox {
  double c = 0.0;
  double dx = 1.0;
  double dy = 0.0;
  double rho() const noexcept { return dx > dy ? dx : dy; }
};

inline constexpr double kBreakdownTol = 1e-14;
inline constexpr std::size_t kFullOrthogonalization = static_cast<std::size_t>(-1);

struct BasisSpec {
  BasisMethod method = BasisMethod::arnoldi;
  std::size_t k = kFullOrthogonalization;  // arnoldi / block_partial window, in vectors or blocks
  SpectralBox box;                         // chebyshev variants
  ComplexVector shifts;                    // newton; cycled if shorter than needed
  std::size_t block_size = 1;              // block variants
};

struct KrylovBasis {
  DenseMatrix B;
  DenseMatrix AB;
  BasisMethod method = BasisMethod::arnoldi;
  std::size_t block_size = 1;
  std::size_t depth = 0;   // number of blocks (= columns for single-vector methods)
  Vector column_norms;     // 2-norms of the stored columns of B
  bool breakdown = false;
  std::size_t dim() const noexcept { return B.cols(); }
};

/// Produces basis columns one at a time. The generator owns its recurrence
/// state, so callers may transform the columns they have received (for
/// example whiten them) without disturbing later columns.
class BasisGenerator {
 public:
  virtual ~BasisGenerator() = default;
  /// Writes the next column and its image under the operator. Returns false
  /// (and sets broken()) when the recurrence breaks down; nothing is written.
  virtual bool next(std::span<double> b, std::span<double> ab) = 0;
  bool broken() const noexcept { return broken_; }
  std::size_t produced() const noexcept { return produced_; }

 protected:
  bool broken_ = false;
  std::size_t produced_ = 0;
};

/// Single-vector methods start from r; block methods from the columns of omega.
std::unique_ptr<BasisGenerator> make_generator(const LinearOperator& op, const BasisSpec& spec,
                                               std::span<const double> r);
std::unique_ptr<BasisGenerator> make_block_generator(const LinearOperator& op, const BasisSpec& spec,
                                                     const DenseMatrix& omega);

/// Runs a generator for up to d columns.
KrylovBasis build_basis(const LinearOperator& op, const BasisSpec& spec, std::span<const double> r,
                        std::size_t d);

KrylovBasis partial_arnoldi(const LinearOperator& op, std::span<const double> r, std::size_t d, std::size_t k);
KrylovBasis full_arnoldi(const LinearOperator& op, std::span<const double> r, std::size_t d);
KrylovBasis lanczos(const LinearOperator& op, std::span<const double> r, std::size_t d);
KrylovBasis chebyshev_basis(const LinearOperator& op, std::span<const double> r, std::size_t d,
                            const SpectralBox& box);
KrylovBasis newton_basis(const LinearOperator& op, std::span<const double> r, std::size_t d,
                         const ComplexVector& shifts);
KrylovBasis monomial_basis(const LinearOperator& op, std::span<const double> r, std::size_t d);

/// Block Krylov basis with p blocks of width omega.cols(). spec.method must be a block method.
KrylovBasis block_basis(const LinearOperator& op, const DenseMatrix& omega, std::size_t p, const BasisSpec& spec);

/// Standard normal n x b starting block.
DenseMatrix random_block(std::size_t n, std::size_t b, std::uint64_t seed);

struct SpectralEstimate {
  ComplexVector ritz;  // eigenvalues of the projected m x m matrix
  SpectralBox box;
};

/// m steps of full Arnoldi from a seeded random vector; the box is the
/// bounding rectangle of the Ritz values with half-widths enlarged by 10%.
/// Throws BreakdownError if fewer than two steps succeed or the box is a point.
SpectralEstimate estimate_spectrum(const LinearOperator& op, std::size_t m = 20, std::uint64_t seed = 0);
SpectralBox estimate_spectral_box(const LinearOperator& op, std::size_t m = 20, std::uint64_t seed = 0);

/// Leja ordering of shifts: each next shift maximizes the product of
/// distances to those already chosen. Conjugate pairs stay adjacent, the one
/// with positive imaginary part first.
ComplexVector leja_order(const ComplexVector& shifts);

}  // namespace sketchy
