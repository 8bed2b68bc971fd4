#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include <json.hpp>

#include "sketchy/cli.hpp"
#include "sketchy/errors.hpp"
#include "sketchy/rng.hpp"
#include "sketchy/sgmres.hpp"

namespace sketchy::cli {

namespace {

using Clock = std::chrono::steady_clock;

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Laplacian on a square grid when n is a perfect square, a random sparse
// matrix otherwise.
std::shared_ptr<const SparseCsr> bench_matrix(std::size_t n, std::uint64_t seed, bool& singular) {
  const auto m = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  singular = m * m == n;
  if (singular) return std::make_shared<SparseCsr>(laplacian_2d(m));
  return std::make_shared<SparseCsr>(random_sparse(n, 5, 10.0, seed));
}

Vector bench_rhs(std::size_t n, bool singular, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 41));
  Vector f = rng.normal_vector(n);
  if (singular) {
    double mean = 0.0;
    for (double v : f) mean += v;
    mean /= static_cast<double>(n);
    for (double& v : f) v -= mean;
  }
  return f;
}

BenchRow median_row(const std::vector<BenchRow>& runs) {
  BenchRow out = runs.front();
  auto pick = [&](double BenchRow::*field) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(r.*field);
    return median(v);
  };
  out.basis_ms = pick(&BenchRow::basis_ms);
  out.sketch_ms = pick(&BenchRow::sketch_ms);
  out.solve_ms = pick(&BenchRow::solve_ms);
  out.assembly_ms = pick(&BenchRow::assembly_ms);
  out.total_ms = pick(&BenchRow::total_ms);
  return out;
}

}  // namespace

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ArgumentError("loglog_slope: need at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ArgumentError("loglog_slope: values must be positive");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw ArgumentError("loglog_slope: x values must not all coincide");
  return sxy / sxx;
}

BenchReport run_bench(const BenchOptions& options) {
  if (options.repeat == 0) throw ArgumentError("bench: --repeat must be positive");
  BenchReport report;

  std::vector<double> ns, ls;
  for (std::size_t n : options.n_list) {
    bool singular = false;
    const auto a = bench_matrix(n, options.seed, singular);
    const Vector f = bench_rhs(n, singular, options.seed);
    const Vector x0(n, 0.0);
    SgmresConfig cfg;
    cfg.d_max = options.d_fixed;
    cfg.basis.method = BasisMethod::arnoldi;
    cfg.basis.k = 2;
    cfg.restart = RestartPolicy::none;
    cfg.seed = options.seed;
    std::vector<BenchRow> runs;
    for (std::size_t rep = 0; rep < options.repeat; ++rep) {
      const auto t0 = Clock::now();
      const SgmresResult res = sgmres_solve(*a, f, x0, cfg);
      BenchRow row;
      row.total_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
      row.section = "sgmres";
      row.n = n;
      row.d = options.d_fixed;
      row.basis_ms = res.timings.basis_ms;
      row.sketch_ms = res.timings.sketch_ms;
      row.solve_ms = res.timings.solve_ms;
      row.assembly_ms = res.timings.assembly_ms;
      runs.push_back(row);
    }
    const BenchRow med = median_row(runs);
    report.rows.push_back(med);
    ns.push_back(static_cast<double>(n));
    ls.push_back(med.ls_ms());
  }
  if (ns.size() >= 2) report.ls_exponent_n = loglog_slope(ns, ls);

  std::vector<double> ds, basis;
  if (!options.d_list.empty()) {
    bool singular = false;
    const std::size_t n = options.n_fixed;
    const auto a = bench_matrix(n, options.seed, singular);
    const Vector f = bench_rhs(n, singular, options.seed);
    const Vector x0(n, 0.0);
    for (std::size_t d : options.d_list) {
      std::vector<BenchRow> runs;
      for (std::size_t rep = 0; rep < options.repeat; ++rep) {
        const auto t0 = Clock::now();
        const GmresResult res = gmres_baseline(*a, f, x0, d);
        BenchRow row;
        row.total_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
        row.section = "gmres";
        row.n = n;
        row.d = d;
        row.basis_ms = res.basis_ms;
        row.solve_ms = res.total_ms - res.basis_ms;
        runs.push_back(row);
      }
      const BenchRow med = median_row(runs);
      report.rows.push_back(med);
      ds.push_back(static_cast<double>(d));
      basis.push_back(med.basis_ms);
    }
  }
  if (ds.size() >= 2) report.gmres_basis_exponent_d = loglog_slope(ds, basis);

  for (const auto& r : report.rows)
    if (r.total_ms > 0.0)
      report.max_accounting_gap = std::max(report.max_accounting_gap, std::abs(r.phase_sum() - r.total_ms) / r.total_ms);
  return report;
}

void write_bench_csv(std::ostream& out, const BenchReport& report) {
  out << "# ls_exponent_n=" << format_number(report.ls_exponent_n) << '\n';
  out << "# gmres_basis_exponent_d=" << format_number(report.gmres_basis_exponent_d) << '\n';
  out << "# max_accounting_gap=" << format_number(report.max_accounting_gap) << '\n';
  out << "section,n,d,basis_ms,sketch_ms,solve_ms,assembly_ms,total_ms\n";
  for (const auto& r : report.rows)
    out << r.section << ',' << r.n << ',' << r.d << ',' << format_number(r.basis_ms) << ','
        << format_number(r.sketch_ms) << ',' << format_number(r.solve_ms) << ',' << format_number(r.assembly_ms)
        << ',' << format_number(r.total_ms) << '\n';
}

void write_bench_json(std::ostream& out, const BenchReport& report) {
  nlohmann::ordered_json j;
  auto num = [](double v) -> nlohmann::ordered_json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  j["ls_exponent_n"] = num(report.ls_exponent_n);
  j["gmres_basis_exponent_d"] = num(report.gmres_basis_exponent_d);
  j["max_accounting_gap"] = report.max_accounting_gap;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    nlohmann::ordered_json row;
    row["section"] = r.section;
    row["n"] = r.n;
    row["d"] = r.d;
    row["basis_ms"] = r.basis_ms;
    row["sketch_ms"] = r.sketch_ms;
    row["solve_ms"] = r.solve_ms;
    row["assembly_ms"] = r.assembly_ms;
    row["total_ms"] = r.total_ms;
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  out << j.dump(2) << '\n';
}

}  // namespace sketchy::cli
