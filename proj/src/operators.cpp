#include "sketchy/operators.hpp"

#include <algorithm>
#include <cmath>

#include "sketchy/errors.hpp"
#include "sketchy/rng.hpp"

namespace sketchy {

// ---------------------------------------------------------------------------
// LinearOperator

void LinearOperator::apply_transpose(std::span<const double>, std::span<double>) const {
  throw ArgumentError("operator does not provide a transpose product");
}

void LinearOperator::check_apply(std::span<const double> x, std::span<double> y) const {
  if (x.size() != cols() || y.size() != rows())
    throw ArgumentError("matvec: dimension mismatch (operator " + std::to_string(rows()) + "x" +
                        std::to_string(cols()) + ", input length " + std::to_string(x.size()) + ")");
}

void LinearOperator::check_apply_transpose(std::span<const double> x, std::span<double> y) const {
  if (x.size() != rows() || y.size() != cols())
    throw ArgumentError("transpose matvec: dimension mismatch");
}

Vector LinearOperator::apply(std::span<const double> x) const {
  Vector y(rows());
  apply(x, y);
  return y;
}

Vector LinearOperator::apply_transpose(std::span<const double> x) const {
  Vector y(cols());
  apply_transpose(x, y);
  return y;
}

DenseMatrix LinearOperator::to_dense() const {
  DenseMatrix m(rows(), cols());
  Vector e(cols(), 0.0);
  for (std::size_t j = 0; j < cols(); ++j) {
    e[j] = 1.0;
    apply(e, m.col(j));
    e[j] = 0.0;
  }
  return m;
}

// ---------------------------------------------------------------------------
// SparseCsr

SparseCsr::SparseCsr(std::size_t n_rows, std::size_t n_cols, std::vector<std::size_t> row_starts,
                     std::vector<std::size_t> col_indices, std::vector<double> values)
    : n_rows_(n_rows), n_cols_(n_cols), row_starts_(std::move(row_starts)),
      col_indices_(std::move(col_indices)), values_(std::move(values)) {
  if (row_starts_.size() != n_rows_ + 1) throw ArgumentError("csr: row_starts must have n_rows+1 entries");
  if (row_starts_.front() != 0) throw ArgumentError("csr: row_starts must begin at 0");
  if (col_indices_.size() != values_.size()) throw ArgumentError("csr: index/value length mismatch");
  if (row_starts_.back() != values_.size()) throw ArgumentError("csr: final row offset must equal nnz");
  for (std::size_t i = 0; i < n_rows_; ++i) {
    if (row_starts_[i + 1] < row_starts_[i]) throw ArgumentError("csr: row_starts must be nondecreasing");
    for (std::size_t k = row_starts_[i]; k < row_starts_[i + 1]; ++k) {
      if (col_indices_[k] >= n_cols_) throw ArgumentError("csr: column index out of range");
      if (k > row_starts_[i] && col_indices_[k] <= col_indices_[k - 1])
        throw ArgumentError("csr: column indices must increase within a row");
      if (!std::isfinite(values_[k])) throw ArgumentError("csr: non-finite value");
    }
  }
}

SparseCsr SparseCsr::from_triplets(std::size_t n_rows, std::size_t n_cols, std::vector<Triplet> entries) {
  for (const auto& t : entries)
    if (t.row >= n_rows || t.col >= n_cols) throw ArgumentError("csr: triplet index out of range");
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<std::size_t> starts(n_rows + 1, 0), cols;
  std::vector<double> vals;
  cols.reserve(entries.size());
  vals.reserve(entries.size());
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& t = entries[k];
    if (k > 0 && t.row == entries[k - 1].row && t.col == entries[k - 1].col) {
      vals.back() += t.value;
      continue;
    }
    cols.push_back(t.col);
    vals.push_back(t.value);
    ++starts[t.row + 1];
  }
  for (std::size_t i = 0; i < n_rows; ++i) starts[i + 1] += starts[i];
  return SparseCsr(n_rows, n_cols, std::move(starts), std::move(cols), std::move(vals));
}

SparseCsr SparseCsr::from_dense(const DenseMatrix& m) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      if (m(i, j) != 0.0) t.push_back({i, j, m(i, j)});
  return from_triplets(m.rows(), m.cols(), std::move(t));
}

SparseCsr SparseCsr::identity(std::size_t n) {
  std::vector<std::size_t> starts(n + 1), cols(n);
  for (std::size_t i = 0; i <= n; ++i) starts[i] = i;
  for (std::size_t i = 0; i < n; ++i) cols[i] = i;
  return SparseCsr(n, n, std::move(starts), std::move(cols), std::vector<double>(n, 1.0));
}

void SparseCsr::apply(std::span<const double> x, std::span<double> y) const {
  check_apply(x, y);
  for (std::size_t i = 0; i < n_rows_; ++i) {
    double acc = 0.0;
    for (std::size_t k = row_starts_[i]; k < row_starts_[i + 1]; ++k) acc += values_[k] * x[col_indices_[k]];
    y[i] = acc;
  }
}

void SparseCsr::apply_transpose(std::span<const double> x, std::span<double> y) const {
  check_apply_transpose(x, y);
  std::fill(y.begin(), y.end(), 0.0);
  for (std::size_t i = 0; i < n_rows_; ++i) {
    const double xi = x[i];
    for (std::size_t k = row_starts_[i]; k < row_starts_[i + 1]; ++k) y[col_indices_[k]] += values_[k] * xi;
  }
}

SparseCsr SparseCsr::transpose() const {
  std::vector<Triplet> t;
  t.reserve(nnz());
  for (std::size_t i = 0; i < n_rows_; ++i)
    for (std::size_t k = row_starts_[i]; k < row_starts_[i + 1]; ++k) t.push_back({col_indices_[k], i, values_[k]});
  return from_triplets(n_cols_, n_rows_, std::move(t));
}

bool SparseCsr::operator==(const SparseCsr& o) const {
  return n_rows_ == o.n_rows_ && n_cols_ == o.n_cols_ && row_starts_ == o.row_starts_ &&
         col_indices_ == o.col_indices_ && values_ == o.values_;
}

// ---------------------------------------------------------------------------
// Other operators

void DenseOperator::apply(std::span<const double> x, std::span<double> y) const {
  check_apply(x, y);
  std::fill(y.begin(), y.end(), 0.0);
  for (std::size_t j = 0; j < m_.cols(); ++j)
    if (x[j] != 0.0) axpy(x[j], m_.col(j), y);
}

void DenseOperator::apply_transpose(std::span<const double> x, std::span<double> y) const {
  check_apply_transpose(x, y);
  for (std::size_t j = 0; j < m_.cols(); ++j) y[j] = dot(m_.col(j), x);
}

void DiagonalOperator::apply(std::span<const double> x, std::span<double> y) const {
  check_apply(x, y);
  for (std::size_t i = 0; i < diag_.size(); ++i) y[i] = diag_[i] * x[i];
}

void DiagonalOperator::apply_transpose(std::span<const double> x, std::span<double> y) const {
  apply(x, y);
}

TrsOperator::TrsOperator(SparseCsr a, Vector g, double delta, TrsForm form)
    : a_(std::move(a)), g_(std::move(g)), delta_(delta), form_(form) {
  if (a_.rows() != a_.cols()) throw ArgumentError("trs: inner matrix must be square");
  if (g_.size() != a_.rows()) throw ArgumentError("trs: g has the wrong length");
  if (!(delta_ > 0.0)) throw ArgumentError("trs: radius must be positive");
}

void TrsOperator::apply(std::span<const double> x, std::span<double> y) const {
  check_apply(x, y);
  const std::size_t n = a_.rows();
  auto x1 = x.first(n), x2 = x.subspan(n);
  auto y1 = y.first(n), y2 = y.subspan(n);
  const double coef = dot(g_, x2) / (delta_ * delta_);
  a_.apply(x1, y1);
  a_.apply(x2, y2);
  const double sign = form_ == TrsForm::as_printed ? 1.0 : -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    y1[i] = sign * y1[i] + coef * g_[i];
    y2[i] = sign * y2[i] - sign * x1[i];
  }
}

PreconditionedOperator::PreconditionedOperator(OperatorPtr inner, SolveHandle solve)
    : inner_(std::move(inner)), solve_(std::move(solve)) {
  if (!inner_ || !solve_) throw ArgumentError("preconditioned operator: null component");
  if (inner_->rows() != inner_->cols()) throw ArgumentError("preconditioned operator: must be square");
}

void PreconditionedOperator::apply(std::span<const double> x, std::span<double> y) const {
  check_apply(x, y);
  Vector tmp(rows());
  inner_->apply(x, tmp);
  solve_(tmp, y);
}

void ShiftedOperator::apply(std::span<const double> x, std::span<double> y) const {
  check_apply(x, y);
  inner_->apply(x, y);
  axpy(-shift_, x, y);
}

// ---------------------------------------------------------------------------
// Generators

SparseCsr laplacian_2d(std::size_t m) {
  if (m < 2) throw ArgumentError("laplacian_2d: grid side must be at least 2");
  const std::size_t n = m * m;
  std::vector<Triplet> t;
  t.reserve(5 * n);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < m; ++c) {
      const std::size_t i = r * m + c;
      double deg = 0.0;
      auto link = [&](std::size_t j) {
        t.push_back({i, j, -1.0});
        deg += 1.0;
      };
      if (r > 0) link(i - m);
      if (c > 0) link(i - 1);
      if (c + 1 < m) link(i + 1);
      if (r + 1 < m) link(i + m);
      t.push_back({i, i, deg});
    }
  }
  return SparseCsr::from_triplets(n, n, std::move(t));
}

SparseCsr trs_inner_matrix(std::size_t n) {
  if (n < 2) throw ArgumentError("trs: n must be at least 2");
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < n; ++i) {
    const double diag = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
    if (i > 0) t.push_back({i, i - 1, 1.0});
    t.push_back({i, i, diag});
    if (i + 1 < n) t.push_back({i, i + 1, 1.0});
  }
  return SparseCsr::from_triplets(n, n, std::move(t));
}

TrsOperator trs_operator(std::size_t n, double g_scale, double delta, std::uint64_t seed, TrsForm form) {
  SparseCsr a = trs_inner_matrix(n);
  Rng rng(derive_seed(seed, 11));
  Vector g = rng.normal_vector(n);
  scale(g_scale / norm2(g), g);
  return TrsOperator(std::move(a), std::move(g), delta, form);
}

DiagonalOperator planted_diagonal(std::size_t n, std::uint64_t seed) {
  if (n <= kPlantedCount) throw ArgumentError("planted_diagonal: n must exceed 10");
  Rng rng(derive_seed(seed, 12));
  Vector d(n);
  for (std::size_t i = 0; i < kPlantedCount; ++i) d[i] = rng.uniform(-1.0, -0.1);
  const std::size_t rest = n - kPlantedCount;
  for (std::size_t i = 0; i < rest; ++i)
    d[kPlantedCount + i] = rest == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(rest - 1);
  return DiagonalOperator(std::move(d));
}

SparseCsr random_sparse(std::size_t n, std::size_t per_row, double diag_shift, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 13));
  std::vector<Triplet> t;
  t.reserve(n * (per_row + 1));
  for (std::size_t i = 0; i < n; ++i) {
    t.push_back({i, i, diag_shift});
    for (std::size_t k = 0; k < per_row; ++k) t.push_back({i, rng.index(n), rng.normal() / std::sqrt(static_cast<double>(per_row))});
  }
  return SparseCsr::from_triplets(n, n, std::move(t));
}

}  // namespace sketchy
