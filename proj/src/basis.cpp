#include "sketchy/basis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sketchy/errors.hpp"
#include "sketchy/kernels.hpp"
#include "sketchy/rng.hpp"

namespace sketchy {

std::string to_string(BasisMethod m) {
  switch (m) {
    case BasisMethod::arnoldi: return "arnoldi";
    case BasisMethod::lanczos: return "lanczos";
    case BasisMethod::chebyshev: return "chebyshev";
    case BasisMethod::newton: return "newton";
    case BasisMethod::monomial: return "monomial";
    case BasisMethod::block_monomial: return "block-monomial";
    case BasisMethod::block_partial: return "block-arnoldi";
    case BasisMethod::block_chebyshev: return "block-chebyshev";
  }
  return "unknown";
}

bool is_block_method(BasisMethod m) noexcept {
  return m == BasisMethod::block_monomial || m == BasisMethod::block_partial ||
         m == BasisMethod::block_chebyshev;
}

namespace {

Vector unit_start(std::span<const double> r, std::size_t n) {
  if (r.size() != n) throw ArgumentError("basis: starting vector has length " + std::to_string(r.size()) +
                                         ", operator has dimension " + std::to_string(n));
  for (double v : r)
    if (!std::isfinite(v)) throw ArgumentError("basis: starting vector has non-finite entries");
  const double nr = norm2(r);
  if (nr == 0.0) throw ArgumentError("basis: starting vector is zero");
  Vector b(r.begin(), r.end());
  scale(1.0 / nr, b);
  return b;
}

void check_square(const LinearOperator& op) {
  if (op.rows() != op.cols()) throw ArgumentError("basis: operator must be square");
}

class ArnoldiGenerator final : public BasisGenerator {
 public:
  ArnoldiGenerator(const LinearOperator& op, std::span<const double> r, std::size_t k)
      : op_(op), k_(k), start_(unit_start(r, op.rows())) {
    check_square(op);
    if (k_ == 0) throw ArgumentError("arnoldi: window k must be at least 1");
  }

  bool next(std::span<double> b, std::span<double> ab) override {
    if (broken_) return false;
    Vector w;
    if (produced_ == 0) {
      w = start_;
    } else {
      w = last_image_;
      const double ref = norm2(last_image_);
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& q : window_) axpy(-dot(q, w), q, w);
      const double nw = norm2(w);
      if (!(nw > kBreakdownTol * ref)) {
        broken_ = true;
        return false;
      }
      scale(1.0 / nw, w);
    }
    std::copy(w.begin(), w.end(), b.begin());
    op_.apply(b, ab);
    last_image_.assign(ab.begin(), ab.end());
    window_.push_back(std::move(w));
    if (window_.size() > k_) window_.pop_front();
    ++produced_;
    return true;
  }

 private:
  const LinearOperator& op_;
  std::size_t k_;
  Vector start_;
  Vector last_image_;
  std::deque<Vector> window_;
};

// Recurrences of the form u_j = (A - a) u_{j-1} + beta u_{j-2} run on the
// unnormalized iterates u_j = sigma_j b_j while only unit vectors b_j are kept:
// dividing by sigma_{j-1} gives w = (A - a) b_{j-1} + beta (sigma_{j-2}/sigma_{j-1}) b_{j-2},
// and sigma_{j-1}/sigma_j = 1/||w||.
class ScaledRecurrence {
 public:
  explicit ScaledRecurrence(Vector start) : start_(std::move(start)) {}

  // w = factor * [(A - a) b_{j-1} + beta * ratio * b_{j-2}]; returns false on breakdown.
  bool step(double a, double beta, double factor, Vector& w) {
    const double ref = norm2(prev_image_) + std::abs(a) + std::abs(beta) * ratio_;
    w = prev_image_;
    axpy(-a, prev_, w);
    if (beta != 0.0) axpy(beta * ratio_, prevprev_, w);
    scale(factor, w);
    const double nw = norm2(w);
    if (!std::isfinite(nw))
      throw BreakdownError("basis recurrence overflowed; the spectral box is probably too small, try a larger box");
    if (!(nw > kBreakdownTol * std::abs(factor) * ref)) return false;
    scale(1.0 / nw, w);
    ratio_ = 1.0 / nw;
    return true;
  }

  void accept(Vector b, std::span<const double> image) {
    prevprev_ = std::move(prev_);
    prev_ = std::move(b);
    prev_image_.assign(image.begin(), image.end());
  }

  const Vector& start() const { return start_; }

 private:
  Vector start_;
  Vector prev_, prevprev_, prev_image_;
  double ratio_ = 1.0;  // sigma_{j-1} / sigma_j for the most recent step
};

class ChebyshevGenerator final : public BasisGenerator {
 public:
  ChebyshevGenerator(const LinearOperator& op, std::span<const double> r, const SpectralBox& box)
      : op_(op), box_(box), rec_(unit_start(r, op.rows())) {
    check_square(op);
    if (!(box.dx >= 0.0 && box.dy >= 0.0) || !(box.rho() > 0.0) || !std::isfinite(box.c))
      throw ArgumentError("chebyshev: box needs nonnegative half-widths and rho > 0");
  }

  bool next(std::span<double> b, std::span<double> ab) override {
    if (broken_) return false;
    Vector w;
    const double rho = box_.rho();
    if (produced_ == 0) {
      w = rec_.start();
    } else if (produced_ == 1) {
      if (!rec_.step(box_.c, 0.0, 1.0 / (2.0 * rho), w)) return fail();
    } else {
      const double alpha = (box_.dx * box_.dx - box_.dy * box_.dy) / (4.0 * rho);
      if (!rec_.step(box_.c, -alpha, 1.0 / rho, w)) return fail();
    }
    std::copy(w.begin(), w.end(), b.begin());
    op_.apply(b, ab);
    rec_.accept(std::move(w), ab);
    ++produced_;
    return true;
  }

 private:
  bool fail() {
    broken_ = true;
    return false;
  }

  const LinearOperator& op_;
  SpectralBox box_;
  ScaledRecurrence rec_;
};

void validate_shifts(const ComplexVector& shifts) {
  if (shifts.empty()) throw ArgumentError("newton: shift list is empty");
  for (std::size_t i = 0; i < shifts.size(); ++i) {
    const Complex z = shifts[i];
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) throw ArgumentError("newton: non-finite shift");
    if (z.imag() == 0.0) continue;
    if (i + 1 >= shifts.size() || shifts[i + 1] != std::conj(z))
      throw ArgumentError("newton: complex shift " + std::to_string(i) +
                          " must be followed immediately by its conjugate");
    ++i;
  }
}

class NewtonGenerator final : public BasisGenerator {
 public:
  NewtonGenerator(const LinearOperator& op, std::span<const double> r, ComplexVector shifts)
      : op_(op), shifts_(std::move(shifts)), rec_(unit_start(r, op.rows())) {
    check_square(op);
    validate_shifts(shifts_);
  }

  bool next(std::span<double> b, std::span<double> ab) override {
    if (broken_) return false;
    Vector w;
    if (produced_ > 0) {
      const Complex theta = shifts_[pos_ % shifts_.size()];
      ++pos_;
      double beta = 0.0;
      if (second_half_) {
        beta = pair_imag_ * pair_imag_;
        second_half_ = false;
      } else if (theta.imag() != 0.0) {
        second_half_ = true;
        pair_imag_ = theta.imag();
      }
      if (!rec_.step(theta.real(), beta, 1.0, w)) {
        broken_ = true;
        return false;
      }
    } else {
      w = rec_.start();
    }
    std::copy(w.begin(), w.end(), b.begin());
    op_.apply(b, ab);
    rec_.accept(std::move(w), ab);
    ++produced_;
    return true;
  }

 private:
  const LinearOperator& op_;
  ComplexVector shifts_;
  ScaledRecurrence rec_;
  std::size_t pos_ = 0;
  bool second_half_ = false;
  double pair_imag_ = 0.0;
};

class BlockGenerator final : public BasisGenerator {
 public:
  BlockGenerator(const LinearOperator& op, const BasisSpec& spec, const DenseMatrix& omega)
      : op_(op), spec_(spec) {
    check_square(op);
    if (!is_block_method(spec.method)) throw ArgumentError("block basis: method is not a block variant");
    if (omega.rows() != op.rows()) throw ArgumentError("block basis: starting block has the wrong row count");
    if (omega.cols() == 0 || omega.cols() > op.rows())
      throw ArgumentError("block basis: block width must lie in [1, n]");
    if (!omega.all_finite()) throw ArgumentError("block basis: starting block has non-finite entries");
    Vector ref(omega.cols());
    for (std::size_t j = 0; j < omega.cols(); ++j) ref[j] = norm2(omega.col(j));
    orthonormalize_and_queue(omega, ref);
    if (spec_.method == BasisMethod::block_chebyshev) {
      for (std::size_t j = 0; j < queue_.cols(); ++j)
        columns_.push_back(std::make_unique<ChebyshevGenerator>(op_, queue_.col(j), spec_.box));
      queue_ = DenseMatrix();
    }
  }

  bool next(std::span<double> b, std::span<double> ab) override {
    if (spec_.method == BasisMethod::block_chebyshev) return next_chebyshev(b, ab);
    if (head_ == queue_.cols()) {
      if (broken_ || !advance()) return false;
    }
    std::copy(queue_.col(head_).begin(), queue_.col(head_).end(), b.begin());
    std::copy(images_.col(head_).begin(), images_.col(head_).end(), ab.begin());
    ++head_;
    ++produced_;
    return true;
  }

 private:
  bool next_chebyshev(std::span<double> b, std::span<double> ab) {
    if (broken_) return false;
    auto& gen = *columns_[produced_ % columns_.size()];
    if (!gen.next(b, ab)) {
      broken_ = true;
      return false;
    }
    ++produced_;
    return true;
  }

  // QR of the block; keeps the columns up to the first numerically dependent one.
  void orthonormalize_and_queue(const DenseMatrix& block, const Vector& ref) {
    QrFactors f = householder_qr(block);
    std::size_t keep = 0;
    while (keep < block.cols() && f.T(keep, keep) > kBreakdownTol * std::max(ref[keep], 1e-300)) ++keep;
    if (keep < block.cols()) broken_ = true;
    queue_ = f.U.columns(0, keep);
    images_ = DenseMatrix(op_.rows(), keep);
    for (std::size_t j = 0; j < keep; ++j) op_.apply(queue_.col(j), images_.col(j));
    head_ = 0;
    if (spec_.method == BasisMethod::block_partial && keep > 0) {
      history_.push_back(queue_);
      const std::size_t window = spec_.k == 0 ? 1 : spec_.k;
      while (history_.size() > window) history_.pop_front();
    }
  }

  bool advance() {
    if (queue_.cols() == 0) {
      broken_ = true;
      return false;
    }
    DenseMatrix next = images_;
    Vector ref(next.cols());
    for (std::size_t j = 0; j < next.cols(); ++j) ref[j] = norm2(next.col(j));
    if (spec_.method == BasisMethod::block_partial) {
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& q : history_)
          for (std::size_t j = 0; j < next.cols(); ++j) {
            auto c = next.col(j);
            for (std::size_t i = 0; i < q.cols(); ++i) axpy(-dot(q.col(i), c), q.col(i), c);
          }
    }
    orthonormalize_and_queue(next, ref);
    if (queue_.cols() == 0) {
      broken_ = true;
      return false;
    }
    return true;
  }

  const LinearOperator& op_;
  BasisSpec spec_;
  DenseMatrix queue_;
  DenseMatrix images_;
  std::size_t head_ = 0;
  std::deque<DenseMatrix> history_;
  std::vector<std::unique_ptr<ChebyshevGenerator>> columns_;
};

KrylovBasis run_generator(BasisGenerator& gen, std::size_t n, std::size_t d, BasisMethod method,
                          std::size_t block) {
  if (d == 0) throw ArgumentError("basis: dimension d must be positive");
  if (d > n) throw ArgumentError("basis: dimension d=" + std::to_string(d) + " exceeds n=" + std::to_string(n));
  KrylovBasis kb;
  kb.method = method;
  kb.block_size = block;
  kb.B = DenseMatrix(n, 0);
  kb.AB = DenseMatrix(n, 0);
  kb.B.reserve_columns(d);
  kb.AB.reserve_columns(d);
  Vector b(n), ab(n);
  while (kb.B.cols() < d) {
    if (!gen.next(b, ab)) {
      kb.breakdown = true;
      break;
    }
    kb.B.append_column(b);
    kb.AB.append_column(ab);
    kb.column_norms.push_back(norm2(b));
  }
  kb.depth = (kb.B.cols() + block - 1) / block;
  return kb;
}

}  // namespace

std::unique_ptr<BasisGenerator> make_generator(const LinearOperator& op, const BasisSpec& spec,
                                               std::span<const double> r) {
  switch (spec.method) {
    case BasisMethod::arnoldi: return std::make_unique<ArnoldiGenerator>(op, r, spec.k);
    case BasisMethod::lanczos: return std::make_unique<ArnoldiGenerator>(op, r, 2);
    case BasisMethod::chebyshev: return std::make_unique<ChebyshevGenerator>(op, r, spec.box);
    case BasisMethod::newton: return std::make_unique<NewtonGenerator>(op, r, spec.shifts);
    case BasisMethod::monomial: return std::make_unique<NewtonGenerator>(op, r, ComplexVector{0.0});
    default: break;
  }
  DenseMatrix omega(op.rows(), 0);
  omega.append_column(r);
  return make_block_generator(op, spec, omega);
}

std::unique_ptr<BasisGenerator> make_block_generator(const LinearOperator& op, const BasisSpec& spec,
                                                     const DenseMatrix& omega) {
  return std::make_unique<BlockGenerator>(op, spec, omega);
}

KrylovBasis build_basis(const LinearOperator& op, const BasisSpec& spec, std::span<const double> r,
                        std::size_t d) {
  auto gen = make_generator(op, spec, r);
  return run_generator(*gen, op.rows(), d, spec.method, 1);
}

KrylovBasis partial_arnoldi(const LinearOperator& op, std::span<const double> r, std::size_t d, std::size_t k) {
  BasisSpec spec;
  spec.k = k;
  return build_basis(op, spec, r, d);
}

KrylovBasis full_arnoldi(const LinearOperator& op, std::span<const double> r, std::size_t d) {
  return partial_arnoldi(op, r, d, kFullOrthogonalization);
}

KrylovBasis lanczos(const LinearOperator& op, std::span<const double> r, std::size_t d) {
  BasisSpec spec;
  spec.method = BasisMethod::lanczos;
  return build_basis(op, spec, r, d);
}

KrylovBasis chebyshev_basis(const LinearOperator& op, std::span<const double> r, std::size_t d,
                            const SpectralBox& box) {
  BasisSpec spec;
  spec.method = BasisMethod::chebyshev;
  spec.box = box;
  return build_basis(op, spec, r, d);
}

KrylovBasis newton_basis(const LinearOperator& op, std::span<const double> r, std::size_t d,
                         const ComplexVector& shifts) {
  if (d > 1 && shifts.size() < d - 1)
    throw ArgumentError("newton: need at least d-1 shifts (got " + std::to_string(shifts.size()) + ")");
  BasisSpec spec;
  spec.method = BasisMethod::newton;
  spec.shifts = shifts;
  return build_basis(op, spec, r, d);
}

KrylovBasis monomial_basis(const LinearOperator& op, std::span<const double> r, std::size_t d) {
  BasisSpec spec;
  spec.method = BasisMethod::monomial;
  return build_basis(op, spec, r, d);
}

KrylovBasis block_basis(const LinearOperator& op, const DenseMatrix& omega, std::size_t p, const BasisSpec& spec) {
  if (p == 0) throw ArgumentError("block basis: depth p must be positive");
  auto gen = make_block_generator(op, spec, omega);
  return run_generator(*gen, op.rows(), omega.cols() * p, spec.method, omega.cols());
}

DenseMatrix random_block(std::size_t n, std::size_t b, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 21));
  DenseMatrix omega(n, b);
  for (std::size_t j = 0; j < b; ++j)
    for (auto& v : omega.col(j)) v = rng.normal();
  return omega;
}

SpectralEstimate estimate_spectrum(const LinearOperator& op, std::size_t m, std::uint64_t seed) {
  check_square(op);
  if (m < 2) throw ArgumentError("estimate_spectral_box: need at least 2 Arnoldi steps");
  m = std::min(m, op.rows());
  Rng rng(derive_seed(seed, 22));
  const Vector v = rng.normal_vector(op.rows());
  const KrylovBasis kb = full_arnoldi(op, v, m);
  if (kb.dim() < 2)
    throw BreakdownError("degenerate spectral box: Arnoldi broke down after one step; pass a box explicitly");
  const DenseMatrix h = matmul_tn(kb.B, kb.AB);
  SpectralEstimate est;
  est.ritz = dense_eig(h).values;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo, im = 0.0;
  for (const auto& z : est.ritz) {
    lo = std::min(lo, z.real());
    hi = std::max(hi, z.real());
    im = std::max(im, std::abs(z.imag()));
  }
  est.box.c = 0.5 * (lo + hi);
  est.box.dx = 1.1 * 0.5 * (hi - lo);
  est.box.dy = 1.1 * im;
  if (!(est.box.rho() > 0.0))
    throw BreakdownError("degenerate spectral box: all Ritz values coincide; pass a box explicitly");
  return est;
}

SpectralBox estimate_spectral_box(const LinearOperator& op, std::size_t m, std::uint64_t seed) {
  return estimate_spectrum(op, m, seed).box;
}

ComplexVector leja_order(const ComplexVector& shifts) {
  ComplexVector reps;
  for (const auto& z : shifts)
    if (z.imag() >= 0.0) reps.push_back(z);
  ComplexVector out;
  out.reserve(shifts.size());
  std::vector<bool> used(reps.size(), false);
  for (std::size_t step = 0; step < reps.size(); ++step) {
    std::size_t best = reps.size();
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < reps.size(); ++i) {
      if (used[i]) continue;
      double score = 0.0;
      if (out.empty()) {
        score = std::abs(reps[i]);
      } else {
        for (const auto& z : out) score += std::log(std::max(std::abs(reps[i] - z), 1e-300));
      }
      if (score > best_score) {
        best_score = score;
        best = i;
      }
    }
    used[best] = true;
    out.push_back(reps[best]);
    if (reps[best].imag() > 0.0) out.push_back(std::conj(reps[best]));
  }
  return out;
}

}  // namespace sketchy
