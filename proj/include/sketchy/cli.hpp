#pragma once

// Command-line harness: problem loading, run records and the solve / eig /
// bench commands. The entry point takes argv so tests can drive it in-process.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sketchy/basis.hpp"
#include "sketchy/dense.hpp"
#include "sketchy/operators.hpp"

namespace sketchy::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitConditioning = 2;

// ---------------------------------------------------------------------------
// Run records

struct RunRow {
  std::size_t iter = 0;
  double r_est = std::numeric_limits<double>::quiet_NaN();
  double true_res = std::numeric_limits<double>::quiet_NaN();
  double cond = std::numeric_limits<double>::quiet_NaN();
  double ms = 0.0;
};

/// Ordered key/value summary; values are preformatted strings or numbers.
struct SummaryEntry {
  std::string key;
  std::string text;   // used when is_number is false
  double number = 0.0;
  bool is_number = false;
};

class Summary {
 public:
  void set(const std::string& key, double value);
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, const char* value) { set(key, std::string(value)); }
  void set(const std::string& key, std::size_t value) { set(key, static_cast<double>(value)); }
  void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }
  const std::vector<SummaryEntry>& entries() const noexcept { return entries_; }
  const SummaryEntry* find(const std::string& key) const;

 private:
  std::vector<SummaryEntry> entries_;
};

struct SolveRecord {
  std::string problem;
  std::string method;
  std::size_t d = 0;
  std::vector<RunRow> rows;
  Summary summary;
};

struct EigRow {
  double theta_re = 0.0;
  double theta_im = 0.0;
  double r_est = 0.0;
};

struct EigRecord {
  std::string problem;
  std::string method;
  std::size_t d = 0;
  std::vector<EigRow> pairs;
  Summary summary;
};

/// Empty field for NaN, otherwise %.10e. Deterministic across runs.
std::string format_number(double v);

void write_solve_csv(std::ostream& out, const SolveRecord& rec);
void write_solve_json(std::ostream& out, const SolveRecord& rec);
void write_eig_csv(std::ostream& out, const EigRecord& rec);
void write_eig_json(std::ostream& out, const EigRecord& rec);

/// Throws ArgumentError if rows are out of order or times are negative or decreasing.
void check_rows(const std::vector<RunRow>& rows);

// ---------------------------------------------------------------------------
// Problems

enum class ProblemKind { matrix, laplacian2d, trs, planted, random };

struct Problem {
  std::string id;
  ProblemKind kind = ProblemKind::matrix;
  std::size_t param = 0;  // grid side, TRS half-size, ...
  OperatorPtr op;
  /// Explicit matrix when one exists (everything but trs).
  std::shared_ptr<const SparseCsr> csr;
  bool symmetric = false;
  /// Spectral box used by Chebyshev bases when none is given.
  std::optional<SpectralBox> box;
};

/// "laplacian2d:<m>", "trs:<n>", "planted:<n>" or "random:<n>".
Problem generate_problem(const std::string& spec, std::uint64_t seed);
Problem load_problem(const std::string& path);

/// "random": seeded standard normal (orthogonal to the constants for the
/// singular Laplacian); "ones"; otherwise a path to whitespace-separated values.
Vector make_rhs(const Problem& problem, const std::string& spec, std::uint64_t seed);

/// "arnoldi[:k]", "lanczos", "chebyshev", "newton", "monomial", "blockcheb",
/// "blockmono" or "blockarnoldi[:k]". Spectral information is estimated from
/// the operator when the problem has no default box.
BasisSpec parse_basis(const std::string& text, const Problem& problem, std::uint64_t seed,
                      std::optional<SpectralBox> box_override = std::nullopt);

// ---------------------------------------------------------------------------
// Benchmark

struct BenchOptions {
  std::vector<std::size_t> n_list{std::size_t{1} << 14, std::size_t{1} << 16, std::size_t{1} << 18};
  std::vector<std::size_t> d_list{100, 200, 400};
  std::size_t d_fixed = 50;
  std::size_t n_fixed = std::size_t{1} << 14;
  std::size_t repeat = 3;
  std::uint64_t seed = 0;
};

struct BenchRow {
  std::string section;  // "sgmres" or "gmres"
  std::size_t n = 0;
  std::size_t d = 0;
  double basis_ms = 0.0;
  double sketch_ms = 0.0;
  double solve_ms = 0.0;
  double assembly_ms = 0.0;
  double total_ms = 0.0;     // measured around the whole call
  double ls_ms() const noexcept { return sketch_ms + solve_ms + assembly_ms; }
  double phase_sum() const noexcept { return basis_ms + sketch_ms + solve_ms + assembly_ms; }
};

struct BenchReport {
  std::vector<BenchRow> rows;
  double ls_exponent_n = std::numeric_limits<double>::quiet_NaN();
  double gmres_basis_exponent_d = std::numeric_limits<double>::quiet_NaN();
  double max_accounting_gap = 0.0;  // max |phase sum - total| / total
};

BenchReport run_bench(const BenchOptions& options);
/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);
void write_bench_csv(std::ostream& out, const BenchReport& report);
void write_bench_json(std::ostream& out, const BenchReport& report);

// ---------------------------------------------------------------------------
// Entry point

/// Parses argv (argv[0] is the program name) and runs the command. Output
/// files go where --out says, or to `out` when --out is absent; warnings go to
/// `err` as "WARN: ..." lines.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sketchy::cli
