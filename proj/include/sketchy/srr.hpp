#pragma once

// Sketched Rayleigh-Ritz eigenvalue extraction and related sketched
// projections: generalized eigenproblems restricted to a basis and
// low-rank approximation from a sketch.

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sketchy/basis.hpp"
#include "sketchy/dense.hpp"
#include "sketchy/operators.hpp"
#include "sketchy/sketch.hpp"

namespace sketchy {

enum class Stabilize { off, automatic, on };

std::string to_string(Stabilize s);
Stabilize parse_stabilize(const std::string& name);

struct SrrConfig {
  std::size_t sketch_size = 0;  // 0: 4d clamped to n
  EmbeddingKind embedding = EmbeddingKind::trig;
  std::uint64_t seed = 0;
  /// A pair is accepted when r_est < tau * scale, scale = ||S A B||_F / ||S B||_F.
  double tau = 1e-6;
  double cond_tol = 1e14;
  Stabilize stabilize = Stabilize::automatic;
  bool symmetric = false;
  bool assemble_vectors = true;
};

struct EigenPairEstimate {
  Complex theta;
  double r_est = 0.0;        // ||D y - theta C y|| / ||C y||, C = S B, D = S A B
  bool accepted = false;
  ComplexVector y;           // coefficients in the basis
  ComplexVector x;           // B y, assembled for accepted pairs only
};

struct SrrResult {
  std::vector<EigenPairEstimate> pairs;  // sorted by descending real part, then imaginary part
  std::vector<std::size_t> accepted;     // indices into pairs
  double cond = 1.0;                     // kappa_2(S B)
  bool stabilized = false;
  std::size_t rank = 0;                  // retained rank (d when not stabilized)
  std::size_t sketch_size = 0;
  double scale = 1.0;
  double max_imag_before_realify = 0.0;  // symmetric mode only
  DenseMatrix mhat;                      // reduced matrix, plain path only
  double sketch_ms = 0.0;
  double solve_ms = 0.0;
};

/// kappa_2(S B) above cond_tol with stabilization off. The partial result is
/// computed anyway and must be treated as unreliable.
class ConditioningError : public std::runtime_error {
 public:
  ConditioningError(const std::string& what, SrrResult partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const SrrResult& partial() const noexcept { return partial_; }

 private:
  SrrResult partial_;
};

/// Sketched Rayleigh-Ritz on (B, AB); AB must equal A applied to B.
SrrResult srr(const DenseMatrix& b, const DenseMatrix& ab, const SrrConfig& config);
SrrResult srr(const KrylovBasis& basis, const SrrConfig& config);
/// Always takes the truncated-SVD path.
SrrResult srr_stabilized(const DenseMatrix& b, const DenseMatrix& ab, const SrrConfig& config);
SrrResult srr_stabilized(const KrylovBasis& basis, const SrrConfig& config);

/// Realifies thetas and coefficient vectors, drops the second member of
/// each conjugate pair, recomputes residual estimates and re-filters.
void symmetric_postprocess(SrrResult& result, const DenseMatrix& sb, const DenseMatrix& sab,
                           const DenseMatrix& b, const SrrConfig& config);

struct RitzPair {
  Complex theta;
  ComplexVector x;          // unit 2-norm
  double residual = 0.0;    // ||A x - theta x|| / ||x||
};

struct RrResult {
  std::vector<RitzPair> pairs;  // sorted like SrrResult
  double solve_ms = 0.0;
};

/// Classical Rayleigh-Ritz: orthonormalize B, form Q^T A Q, exact residuals.
/// Throws ArgumentError if B is numerically rank deficient.
RrResult rr_baseline(const LinearOperator& op, const DenseMatrix& b);

/// Sketched generalized eigenproblem H x = theta J x over range(B), given
/// HB = H B and JB = J B.
SrrResult sketch_gep(const DenseMatrix& hb, const DenseMatrix& jb, const DenseMatrix& b, const SrrConfig& config);

struct LowRankConfig {
  std::size_t sketch_size = 0;  // 0: 2d clamped to the row count
  EmbeddingKind embedding = EmbeddingKind::trig;
  std::uint64_t seed = 0;
  double cond_tol = 1e14;
};

struct LowRankApprox {
  DenseMatrix F;  // m x r
  DenseMatrix G;  // r x n
  std::size_t rank = 0;
  std::vector<std::string> warnings;
};

/// A ~ (AB) (SAB)^+ (SA) evaluated stably as F = AB T^{-1}, G = U^T (S A),
/// with S A formed through transpose products. op must provide apply_transpose.
LowRankApprox lowrank_approx(const LinearOperator& op, const DenseMatrix& b, const LowRankConfig& config);

/// Range-finder basis for A: orth((A^T A)^q Omega) with Omega standard normal n x d.
DenseMatrix adapted_basis(const LinearOperator& op, std::size_t d, std::size_t q, std::uint64_t seed);

}  // namespace sketchy
