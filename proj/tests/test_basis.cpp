#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "sketchy/basis.hpp"
#include "sketchy/errors.hpp"
#include "sketchy/operators.hpp"

using namespace sketchy;

namespace {

Vector ones(std::size_t n) { return Vector(n, 1.0); }

DenseMatrix symmetric_gaussian(std::size_t n, std::uint64_t seed) {
  const DenseMatrix g = oracle::gaussian(n, n, seed);
  DenseMatrix a(n, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) a(i, j) = 0.5 * (g(i, j) + g(j, i));
  return a;
}

// Largest entry of m outside the band |i - j| <= 1.
double off_tridiagonal(const DenseMatrix& m) {
  double worst = 0.0;
  for (std::size_t j = 0; j < m.cols(); ++j)
    for (std::size_t i = 0; i < m.rows(); ++i)
      if (i + 1 < j || j + 1 < i) worst = std::max(worst, std::abs(m(i, j)));
  return worst;
}

void expect_images_consistent(const LinearOperator& op, const KrylovBasis& kb) {
  for (std::size_t j = 0; j < kb.dim(); ++j) {
    const Vector ab = op.apply(kb.B.col(j));
    double err = 0.0;
    for (std::size_t i = 0; i < ab.size(); ++i) err = std::max(err, std::abs(ab[i] - kb.AB(i, j)));
    EXPECT_LE(err, 1e-12 * (1.0 + norm2(ab))) << "column " << j;
  }
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  double worst = 0.0;
  for (std::size_t j = 0; j < a.cols(); ++j)
    for (std::size_t i = 0; i < a.rows(); ++i) worst = std::max(worst, std::abs(a(i, j) - b(i, j)));
  return worst;
}

}  // namespace

TEST(Arnoldi, IdentityBreaksDownAfterOneColumn) {
  const SparseCsr id = SparseCsr::identity(10);
  Vector e1(10, 0.0);
  e1[0] = 1.0;
  const KrylovBasis kb = full_arnoldi(id, e1, 3);
  EXPECT_EQ(kb.dim(), 1u);
  EXPECT_TRUE(kb.breakdown);
}

TEST(Arnoldi, FullOrthogonalizationIsOrthonormal) {
  const SparseCsr a = random_sparse(100, 5, 1.0, 3);
  const KrylovBasis kb = full_arnoldi(a, oracle::gaussian_vector(100, 4), 20);
  ASSERT_EQ(kb.dim(), 20u);
  const DenseMatrix g = matmul_tn(kb.B, kb.B);
  EXPECT_LE(max_abs_diff(g, DenseMatrix::identity(20)), 1e-10);
  expect_images_consistent(a, kb);
}

TEST(Arnoldi, TruncatedWindowSpansSameKrylovSpace) {
  const SparseCsr a = laplacian_2d(32);
  const Vector r = oracle::gaussian_vector(a.rows(), 5);
  const KrylovBasis partial = partial_arnoldi(a, r, 60, 4);
  const KrylovBasis full = full_arnoldi(a, r, 60);
  ASSERT_EQ(partial.dim(), 60u);
  // Columns are unit vectors; only orthogonality to the window is enforced.
  for (double c : partial.column_norms) EXPECT_NEAR(c, 1.0, 1e-13);
  EXPECT_LE(oracle::subspace_distance(partial.B, full.B), 1e-8);
}

TEST(Arnoldi, WindowOfOneOrthogonalizesAgainstPrevious) {
  const SparseCsr a = random_sparse(80, 4, 2.0, 1);
  const KrylovBasis kb = partial_arnoldi(a, oracle::gaussian_vector(80, 2), 12, 1);
  for (std::size_t j = 1; j < kb.dim(); ++j) EXPECT_NEAR(dot(kb.B.col(j), kb.B.col(j - 1)), 0.0, 1e-13);
}

TEST(Lanczos, DiagonalGivesTridiagonalProjection) {
  const DiagonalOperator a(Vector{1.0, 2.0, 3.0});
  Vector r = ones(3);
  for (auto& v : r) v /= std::sqrt(3.0);
  const KrylovBasis kb = lanczos(a, r, 3);
  ASSERT_EQ(kb.dim(), 3u);
  EXPECT_LE(off_tridiagonal(matmul_tn(kb.B, kb.AB)), 1e-12);
}

TEST(Lanczos, RandomSymmetricProjectionIsTridiagonal) {
  const DenseMatrix m = symmetric_gaussian(200, 7);
  const DenseOperator a(m);
  const KrylovBasis kb = lanczos(a, oracle::gaussian_vector(200, 8), 20);
  ASSERT_EQ(kb.dim(), 20u);
  EXPECT_LE(off_tridiagonal(matmul_tn(kb.B, kb.AB)), 1e-8 * oracle::norm2(m));
}

TEST(Chebyshev, BreaksDownWhenOperatorIsTheCenter) {
  const SparseCsr id = SparseCsr::identity(5);
  const KrylovBasis kb = chebyshev_basis(id, ones(5), 4, SpectralBox{1.0, 1.0, 0.0});
  EXPECT_EQ(kb.dim(), 1u);
  EXPECT_TRUE(kb.breakdown);
}

TEST(Chebyshev, BetterConditionedThanMonomial) {
  const SparseCsr a = laplacian_2d(32);
  const Vector r = oracle::gaussian_vector(a.rows(), 9);
  const KrylovBasis cheb = chebyshev_basis(a, r, 100, SpectralBox{4.0, 4.0, 0.0});
  const KrylovBasis mono = monomial_basis(a, r, 100);
  ASSERT_EQ(cheb.dim(), 100u);
  ASSERT_EQ(mono.dim(), 100u);
  expect_images_consistent(a, cheb);
  const double kc = oracle::cond(cheb.AB), km = oracle::cond(mono.AB);
  EXPECT_LE(std::log10(kc), std::log10(km) - 4.0) << "chebyshev " << kc << " monomial " << km;
}

TEST(Chebyshev, ColumnsAreNormalizedScaledPolynomials) {
  // On a diagonal operator column j is T_j((lambda_i - c) / rho) r_i, normalized.
  const std::size_t n = 30, d = 8;
  Vector diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = 1.0 + 2.0 * i / (n - 1);
  const DiagonalOperator a(diag);
  const Vector r = oracle::gaussian_vector(n, 10);
  const SpectralBox box{2.0, 1.0, 0.0};
  const KrylovBasis kb = chebyshev_basis(a, r, d, box);
  ASSERT_EQ(kb.dim(), d);
  DenseMatrix u(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = (diag[i] - box.c) / box.rho();
    double t0 = 1.0, t1 = x;
    for (std::size_t j = 0; j < d; ++j) {
      const double t = j == 0 ? t0 : t1;
      u(i, j) = t * r[i];
      if (j >= 1) {
        const double t2 = 2 * x * t1 - t0;
        t0 = t1;
        t1 = t2;
      }
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    const double nu = norm2(u.col(j));
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(kb.B(i, j), u(i, j) / nu, 1e-12);
  }
}

TEST(Newton, ZeroShiftsReproduceMonomial) {
  const SparseCsr a = random_sparse(60, 4, 3.0, 11);
  const Vector r = oracle::gaussian_vector(60, 12);
  const KrylovBasis newton = newton_basis(a, r, 10, ComplexVector(9, 0.0));
  const KrylovBasis mono = monomial_basis(a, r, 10);
  EXPECT_LE(max_abs_diff(newton.B, mono.B), 1e-12);
}

TEST(Newton, ExactEigenvalueShiftsAnnihilate) {
  DenseMatrix m(5, 5);
  for (std::size_t i = 0; i < 5; ++i) {
    m(i, i) = 1.0 + i;
    for (std::size_t j = i + 1; j < 5; ++j) m(i, j) = 0.5;
  }
  const DenseOperator a(m);
  const ComplexVector shifts = leja_order({1.0, 2.0, 3.0, 4.0, 5.0});
  BasisSpec spec;
  spec.method = BasisMethod::newton;
  spec.shifts = shifts;
  const Vector r = ones(5);
  auto gen = make_generator(a, spec, r);
  Vector b(5), ab(5);
  for (int j = 0; j < 5; ++j) ASSERT_TRUE(gen->next(b, ab)) << j;
  EXPECT_FALSE(gen->next(b, ab));
  EXPECT_TRUE(gen->broken());
}

TEST(Newton, ComplexPairMatchesRealQuadratic) {
  // (A - z)(A - conj z) = A^2 - 2 Re z A + |z|^2, applied to r.
  const SparseCsr a = random_sparse(40, 4, 2.0, 13);
  const Vector r = oracle::gaussian_vector(40, 14);
  const Complex z(0.5, 1.5);
  const KrylovBasis kb = newton_basis(a, r, 3, {z, std::conj(z)});
  const Vector ar = a.apply(r);
  const Vector aar = a.apply(ar);
  Vector q(40);
  for (std::size_t i = 0; i < 40; ++i) q[i] = aar[i] - 2 * z.real() * ar[i] + std::norm(z) * r[i];
  const double nq = norm2(q);
  for (std::size_t i = 0; i < 40; ++i) EXPECT_NEAR(kb.B(i, 2), q[i] / nq, 1e-12);
}

TEST(Newton, RitzShiftsBetterConditionedThanMonomial) {
  const SparseCsr a = laplacian_2d(32);
  const Vector r = oracle::gaussian_vector(a.rows(), 15);
  const SpectralEstimate est = estimate_spectrum(a, 40, 16);
  const KrylovBasis newton = newton_basis(a, r, 40, leja_order(est.ritz));
  const KrylovBasis mono = monomial_basis(a, r, 40);
  const double kn = oracle::cond(newton.B), km = oracle::cond(mono.B);
  EXPECT_LE(std::log10(kn), std::log10(km) - 4.0) << "newton " << kn << " monomial " << km;
}

TEST(Newton, RejectsUnpairedComplexShift) {
  const SparseCsr a = laplacian_2d(4);
  EXPECT_THROW(newton_basis(a, ones(16), 3, {Complex(1, 1), Complex(2, 0)}), ArgumentError);
  EXPECT_THROW(newton_basis(a, ones(16), 5, {Complex(1, 0)}), ArgumentError);
}

TEST(LejaOrder, KeepsConjugatesAdjacentAndStartsLargest) {
  const ComplexVector z{Complex(1, 0), Complex(-3, 0), Complex(2, 1), Complex(2, -1), Complex(0.5, 0)};
  const ComplexVector o = leja_order(z);
  ASSERT_EQ(o.size(), z.size());
  EXPECT_EQ(o.front(), Complex(-3, 0));
  for (std::size_t i = 0; i < o.size(); ++i)
    if (o[i].imag() > 0) {
      ASSERT_LT(i + 1, o.size());
      EXPECT_EQ(o[i + 1], std::conj(o[i]));
    }
}

TEST(BlockBasis, WidthOneReducesToSingleVectorMethods) {
  const SparseCsr a = random_sparse(70, 4, 3.0, 17);
  const Vector r = oracle::gaussian_vector(70, 18);
  DenseMatrix omega(70, 0);
  omega.append_column(r);
  const SpectralBox box{3.0, 3.5, 0.5};

  BasisSpec spec;
  spec.method = BasisMethod::block_monomial;
  EXPECT_LE(max_abs_diff(block_basis(a, omega, 12, spec).B, monomial_basis(a, r, 12).B), 1e-12);

  spec.method = BasisMethod::block_partial;
  spec.k = 3;
  EXPECT_LE(max_abs_diff(block_basis(a, omega, 12, spec).B, partial_arnoldi(a, r, 12, 3).B), 1e-12);

  spec.method = BasisMethod::block_chebyshev;
  spec.box = box;
  EXPECT_LE(max_abs_diff(block_basis(a, omega, 12, spec).B, chebyshev_basis(a, r, 12, box).B), 1e-12);
}

TEST(BlockBasis, FullWidthIdentityStartIsIdentity) {
  const SparseCsr a = random_sparse(12, 3, 1.0, 19);
  BasisSpec spec;
  spec.method = BasisMethod::block_monomial;
  const KrylovBasis kb = block_basis(a, DenseMatrix::identity(12), 1, spec);
  ASSERT_EQ(kb.dim(), 12u);
  EXPECT_LE(max_abs_diff(kb.B, DenseMatrix::identity(12)), 1e-15);
  EXPECT_EQ(kb.depth, 1u);
  expect_images_consistent(a, kb);
}

TEST(BlockBasis, PartialArnoldiBlocksAreOrthonormal) {
  const SparseCsr a = laplacian_2d(16);
  BasisSpec spec;
  spec.method = BasisMethod::block_partial;
  spec.k = 2;
  const KrylovBasis kb = block_basis(a, random_block(a.rows(), 4, 3), 6, spec);
  ASSERT_EQ(kb.dim(), 24u);
  EXPECT_EQ(kb.depth, 6u);
  expect_images_consistent(a, kb);
  // consecutive blocks are orthogonal to each other
  for (std::size_t blk = 1; blk < 6; ++blk)
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j)
        EXPECT_NEAR(dot(kb.B.col(4 * blk + i), kb.B.col(4 * (blk - 1) + j)), 0.0, 1e-12);
}

TEST(BlockBasis, ChebyshevConditioningGrowsWithDepthOnPlantedSpectrum) {
  const DiagonalOperator a = planted_diagonal(2048, 20);
  BasisSpec spec;
  spec.method = BasisMethod::block_chebyshev;
  spec.box = SpectralBox{0.5, 0.505, 0.0};
  const DenseMatrix omega = random_block(2048, 10, 21);
  double previous = 0.0;
  for (std::size_t p : {2u, 6u, 12u, 24u}) {
    const KrylovBasis kb = block_basis(a, omega, p, spec);
    ASSERT_EQ(kb.dim(), 10 * p);
    const double k = oracle::cond(kb.B);
    EXPECT_GT(k, previous) << "p=" << p;
    previous = k;
  }
  EXPECT_GT(previous, 1e10);
}

TEST(RandomBlock, Deterministic) {
  const DenseMatrix a = random_block(50, 3, 9), b = random_block(50, 3, 9), c = random_block(50, 3, 10);
  EXPECT_EQ(max_abs_diff(a, b), 0.0);
  EXPECT_GT(max_abs_diff(a, c), 0.0);
}

TEST(Generator, StreamsSameColumnsAsBatch) {
  const SparseCsr a = laplacian_2d(10);
  const Vector r = oracle::gaussian_vector(100, 22);
  BasisSpec spec;
  spec.method = BasisMethod::chebyshev;
  spec.box = SpectralBox{4.0, 4.0, 0.0};
  const KrylovBasis batch = build_basis(a, spec, r, 15);
  auto gen = make_generator(a, spec, r);
  Vector b(100), ab(100);
  for (std::size_t j = 0; j < 15; ++j) {
    ASSERT_TRUE(gen->next(b, ab));
    for (std::size_t i = 0; i < 100; ++i) {
      EXPECT_EQ(b[i], batch.B(i, j));
      EXPECT_EQ(ab[i], batch.AB(i, j));
    }
  }
  EXPECT_EQ(gen->produced(), 15u);
}

TEST(Generator, RejectsBadInput) {
  const SparseCsr a = laplacian_2d(4);
  EXPECT_THROW(full_arnoldi(a, Vector(16, 0.0), 3), ArgumentError);
  EXPECT_THROW(full_arnoldi(a, Vector(15, 1.0), 3), ArgumentError);
  EXPECT_THROW(full_arnoldi(a, ones(16), 17), ArgumentError);
  EXPECT_THROW(chebyshev_basis(a, ones(16), 3, SpectralBox{0.0, 0.0, 0.0}), ArgumentError);
}

TEST(SpectralBox, CoversEquispacedDiagonal) {
  Vector diag(200);
  for (std::size_t i = 0; i < 200; ++i) diag[i] = 8.0 * i / 199.0;
  const DiagonalOperator a(diag);
  const SpectralBox box = estimate_spectral_box(a, 20, 1);
  EXPECT_LE(box.c - box.dx, 0.0);
  EXPECT_GE(box.c + box.dx, 8.0);
  EXPECT_NEAR(box.c, 4.0, 0.15 * 4.0);
  EXPECT_EQ(box.dy, 0.0);
}

TEST(SpectralBox, SymmetricOperatorHasFlatBox) {
  const SparseCsr a = laplacian_2d(20);
  const SpectralBox box = estimate_spectral_box(a, 20, 2);
  EXPECT_LE(box.dy, 1e-8 * box.rho());
  EXPECT_GT(box.dx, 0.0);
}

TEST(SpectralBox, DegenerateOperatorThrows) {
  const SparseCsr id = SparseCsr::identity(30);
  EXPECT_THROW(estimate_spectral_box(id, 20, 3), BreakdownError);
}
