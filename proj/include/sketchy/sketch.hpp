#pragma once

// Subspace embeddings S: R^n -> R^s. Two kinds are provided:
//   trig   - sqrt(n/s) * rows_D( DCT2( E x ) ), E random signs, D a random row subset
//   sparse - each column of S holds zeta entries +-1/sqrt(zeta) in distinct rows

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sketchy/dense.hpp"

namespace sketchy {

enum class EmbeddingKind { trig, sparse };

EmbeddingKind parse_embedding_kind(const std::string& name);
std::string to_string(EmbeddingKind kind);

/// Column sparsity ceil(2 ln(1 + d)) for a target subspace dimension d.
std::size_t sparse_zeta(std::size_t d);

/// Default sketch size 2d + 1, clamped to n.
std::size_t default_sketch_size(std::size_t d, std::size_t n);

/// Rows needed for distortion eps on a d-dimensional subspace: ceil(d / eps^2).
std::size_t sketch_size_for_distortion(std::size_t d, double eps);

class Embedding {
 public:
  /// zeta = 0 picks sparse_zeta(s / 2) (the subspace dimension an s-row
  /// sketch is normally sized for); it is clamped to s.
  Embedding(EmbeddingKind kind, std::size_t n, std::size_t s, std::uint64_t seed,
            std::size_t zeta = 0);

  EmbeddingKind kind() const noexcept { return kind_; }
  std::size_t n() const noexcept { return n_; }
  std::size_t s() const noexcept { return s_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t zeta() const noexcept { return zeta_; }

  /// Trig kind: selected DCT rows. Sparse kind: row positions, zeta per column.
  const std::vector<std::size_t>& rows() const noexcept { return rows_; }
  /// Trig kind: the sign diagonal E. Sparse kind: signed entries, zeta per column.
  const std::vector<double>& values() const noexcept { return values_; }

  Vector apply(std::span<const double> x) const;
  DenseMatrix apply(const DenseMatrix& m) const;
  /// S^T z for an s-vector z.
  Vector apply_transpose(std::span<const double> z) const;

  /// Test hook: replaces the random signs by +1 (trig) or |entry| (sparse).
  void force_unit_signs_for_testing();

 private:
  EmbeddingKind kind_;
  std::size_t n_;
  std::size_t s_;
  std::uint64_t seed_;
  std::size_t zeta_ = 0;
  double scale_ = 1.0;
  std::vector<std::size_t> rows_;
  std::vector<double> values_;
};

Embedding make_embedding(EmbeddingKind kind, std::size_t n, std::size_t s, std::uint64_t seed);

/// Orthonormal DCT-II of each column of an n x k column-major block, in place.
void dct2_orthonormal(double* data, std::size_t n, std::size_t k);
/// Inverse (= transpose) of dct2_orthonormal.
void dct3_orthonormal(double* data, std::size_t n, std::size_t k);

/// B T^{-1}, computed column by column. Throws SingularityError on a zero
/// diagonal in T.
DenseMatrix whiten(const DenseMatrix& b, const DenseMatrix& t);

/// max over `trials` random unit y of | ||S Q y|| - 1 |, Q with orthonormal columns.
double distortion_monte_carlo(const Embedding& s, const DenseMatrix& q, std::size_t trials,
                              std::uint64_t seed);
/// max(sigma_max(SQ) - 1, 1 - sigma_min(SQ)); the exact worst case over range(Q).
double distortion_exact(const Embedding& s, const DenseMatrix& q);

}  // namespace sketchy
