#pragma once

// Sketched GMRES: x = x0 + B y with y minimizing ||S (AB y - r0)||, plus the
// incremental variant with restarting/whitening, an LSQR refinement that uses
// the sketched triangular factor as preconditioner, and plain GMRES.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sketchy/basis.hpp"
#include "sketchy/dense.hpp"
#include "sketchy/kernels.hpp"
#include "sketchy/operators.hpp"
#include "sketchy/sketch.hpp"

namespace sketchy {

enum class RestartPolicy { none, adaptive, whiten };

std::string to_string(RestartPolicy p);
RestartPolicy parse_restart_policy(const std::string& name);

inline constexpr double kDefaultCondTol = 1e14;

struct IterationRecord {
  std::size_t iteration = 0;  // 1-based, counted across restarts
  double r_est = 0.0;         // sketched residual norm after this step
  double cond = std::numeric_limits<double>::quiet_NaN();        // kappa_2(T_j) when measured
  double true_residual = std::numeric_limits<double>::quiet_NaN();  // ||f - A x_j|| when measured
  double elapsed_ms = 0.0;
  std::size_t restart = 0;    // cycle index
};

struct SgmresConfig {
  std::size_t d_max = 50;
  std::size_t sketch_size = 0;  // 0: 2 d_max + 1 clamped to n
  BasisSpec basis;
  EmbeddingKind embedding = EmbeddingKind::trig;
  std::uint64_t seed = 0;
  RestartPolicy restart = RestartPolicy::adaptive;
  double cond_tol = kDefaultCondTol;
  /// Stop once r_est <= target * ||S r0||. Zero or negative: never stop early.
  double target = 0.0;
  bool refine = false;
  /// Total step budget across restarts for the incremental solver; 0 means d_max.
  std::size_t max_iterations = 0;
  std::size_t max_restarts = 20;
  /// Full SVD of T every this many appended columns (plus cheap checks each step).
  std::size_t cond_check_every = 32;
  /// Record ||f - A x_j|| every this many steps (0: never; the final value is always computed).
  std::size_t true_residual_every = 0;
  std::function<void(const IterationRecord&)> observer;
};

struct PhaseTimings {
  double basis_ms = 0.0;
  double sketch_ms = 0.0;
  double solve_ms = 0.0;
  double assembly_ms = 0.0;
  double total_ms() const noexcept { return basis_ms + sketch_ms + solve_ms + assembly_ms; }
};

struct SgmresResult {
  Vector x;
  Vector y;                       // coefficients of the final cycle
  double r_est = 0.0;
  double rhs_sketch_norm = 0.0;   // ||S r0|| of the first cycle
  double true_residual = 0.0;     // ||f - A x||, always recomputed
  double cond = 1.0;              // kappa_2(T) of the final cycle
  std::size_t iterations = 0;
  std::size_t basis_dim = 0;      // columns in the final cycle
  std::size_t restarts = 0;
  std::size_t refine_iterations = 0;
  std::vector<IterationRecord> history;
  std::string status;             // converged | budget | breakdown | stagnated | ill-conditioned
  bool reliable = true;
  std::vector<std::string> warnings;
  PhaseTimings timings;
};

struct SketchedLsqSolution {
  Vector y;
  double r_est = 0.0;
};

/// y = T^{-1} U^T g and r_est = ||g - U U^T g||.
SketchedLsqSolution sketched_lsq(const DenseMatrix& u, const DenseMatrix& t, std::span<const double> g);

/// Builds the whole basis, sketches it once and solves. If kappa_2(T) exceeds
/// cond_tol, policy none records a warning; other policies hand over to
/// sgmres_iterative.
SgmresResult sgmres_solve(const LinearOperator& op, std::span<const double> f, std::span<const double> x0,
                          const SgmresConfig& config);

/// Grows the basis one column at a time with a fixed embedding, updating the
/// QR factor of S AB incrementally.
SgmresResult sgmres_iterative(const LinearOperator& op, std::span<const double> f, std::span<const double> x0,
                              const SgmresConfig& config);

struct RefineResult {
  Vector y;
  std::size_t iterations = 0;
};

/// LSQR on min ||AB y - r0|| right-preconditioned by T^{-1}, warm-started at y0.
RefineResult refine_coefficients(const DenseMatrix& ab, const DenseMatrix& t, std::span<const double> r0,
                                 std::span<const double> y0, std::size_t max_iterations = 50);

struct GmresResult {
  Vector x;
  std::vector<double> residuals;  // ||f - A x_j|| from the Givens recurrence, j = 0..iterations
  std::vector<double> step_ms;    // cumulative wall time after step j+1
  std::size_t iterations = 0;
  bool breakdown = false;
  double basis_ms = 0.0;
  double total_ms = 0.0;
};

/// Full GMRES with double-orthogonalized Arnoldi and Givens rotations.
GmresResult gmres_baseline(const LinearOperator& op, std::span<const double> f, std::span<const double> x0,
                           std::size_t d);

/// ||f - A x||
double residual_norm(const LinearOperator& op, std::span<const double> f, std::span<const double> x);

}  // namespace sketchy
