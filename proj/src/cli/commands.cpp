#include <cmath>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "sketchy/cli.hpp"
#include "sketchy/errors.hpp"
#include "sketchy/rng.hpp"
#include "sketchy/sgmres.hpp"
#include "sketchy/srr.hpp"

namespace sketchy::cli {

namespace {

struct CommonOptions {
  std::string matrix;
  std::string gen;
  std::string basis = "arnoldi:2";
  std::string box;
  std::size_t d = 50;
  std::uint64_t seed = 0;
  std::string embedding = "trig";
  std::size_t sketch_size = 0;
  std::string out_path;
  std::string format = "csv";
  bool timing = false;
};

struct SolveOptions {
  CommonOptions common;
  std::string rhs = "random";
  std::string method = "sgmres";
  std::string restart = "adaptive";
  double tol = 1e-10;
  std::size_t maxit = 0;
  std::size_t true_every = 25;
  bool refine = false;
};

struct EigOptions {
  CommonOptions common;
  std::string method = "srr";
  std::size_t block = 0;
  std::size_t depth = 0;
  double tau = 1e-6;
  bool symmetric = false;
};

struct BenchCli {
  BenchOptions options;
  std::string out_path;
  std::string format = "csv";
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--matrix", o.matrix, "MatrixMarket file with a square matrix");
  cmd->add_option("--gen", o.gen, "Generated problem: laplacian2d:<m>, trs:<n>, planted:<n>, random:<n>");
  cmd->add_option("--basis", o.basis, "arnoldi[:k], lanczos, chebyshev, newton, monomial, blockcheb, blockmono, "
                                      "blockarnoldi[:k]");
  cmd->add_option("--box", o.box, "Spectral box c,dx,dy for Chebyshev bases");
  cmd->add_option("--d", o.d, "Basis dimension")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "Random seed (SKETCHY_SEED overrides)");
  cmd->add_option("--sketch", o.embedding, "Embedding kind")->check(CLI::IsMember({"trig", "sparse"}));
  cmd->add_option("--sketch-size", o.sketch_size, "Sketch rows (0: default)");
  cmd->add_option("--out", o.out_path, "Output file (default: stdout)");
  cmd->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_flag("--timing", o.timing, "Record wall-clock times (output is then not reproducible)");
}

std::uint64_t effective_seed(std::uint64_t seed) {
  const char* env = std::getenv("SKETCHY_SEED");
  if (!env || !*env) return seed;
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(env, &pos);
    if (pos != std::string(env).size()) throw std::invalid_argument(env);
    return v;
  } catch (const std::exception&) {
    throw ArgumentError(std::string("SKETCHY_SEED: expected a nonnegative integer, got '") + env + "'");
  }
}

Problem resolve_problem(const CommonOptions& o, std::uint64_t seed) {
  if (o.matrix.empty() == o.gen.empty()) throw ArgumentError("exactly one of --matrix and --gen is required");
  return o.matrix.empty() ? generate_problem(o.gen, seed) : load_problem(o.matrix);
}

std::optional<SpectralBox> parse_box(const std::string& text) {
  if (text.empty()) return std::nullopt;
  std::stringstream ss(text);
  std::string part;
  std::vector<double> v;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t pos = 0;
      v.push_back(std::stod(part, &pos));
      if (pos != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ArgumentError("--box: bad number '" + part + "'");
    }
  }
  if (v.size() != 3 || v[1] < 0.0 || v[2] < 0.0 || (v[1] == 0.0 && v[2] == 0.0))
    throw ArgumentError("--box: expected c,dx,dy with nonnegative half-widths, not both zero");
  return SpectralBox{v[0], v[1], v[2]};
}

// Writes to --out when given, otherwise to `out`.
template <typename Fn>
void emit(const std::string& path, std::ostream& out, Fn&& write) {
  if (path.empty()) {
    write(out);
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw ArgumentError("--out: cannot open '" + path + "' for writing");
  write(file);
  if (!file) throw ArgumentError("--out: write to '" + path + "' failed");
}

void print_summary(std::ostream& out, const Summary& s) {
  for (const auto& e : s.entries()) out << e.key << '=' << (e.is_number ? format_number(e.number) : e.text) << '\n';
}

void warn(std::ostream& err, const std::string& msg) { err << "WARN: " << msg << '\n'; }

int cmd_solve(const SolveOptions& o, std::ostream& out, std::ostream& err) {
  const std::uint64_t seed = effective_seed(o.common.seed);
  const Problem problem = resolve_problem(o.common, seed);
  const std::size_t n = problem.op->rows();
  const Vector f = make_rhs(problem, o.rhs, seed);
  const Vector x0(n, 0.0);
  const double fnorm = norm2(f);
  const double rel = fnorm > 0.0 ? 1.0 / fnorm : 1.0;
  if (!(o.tol >= 0.0)) throw ArgumentError("--tol must be nonnegative");

  SolveRecord rec;
  rec.problem = problem.id;
  rec.method = o.method;
  rec.d = o.common.d;
  int code = kExitOk;

  if (o.method == "gmres") {
    const GmresResult g = gmres_baseline(*problem.op, f, x0, o.common.d);
    for (std::size_t j = 0; j < g.iterations; ++j) {
      RunRow row;
      row.iter = j + 1;
      row.r_est = g.residuals[j + 1] * rel;
      row.ms = o.common.timing ? g.step_ms[j] : 0.0;
      rec.rows.push_back(row);
    }
    const double true_res = residual_norm(*problem.op, f, g.x) * rel;
    if (!rec.rows.empty()) rec.rows.back().true_res = true_res;
    const bool reached = true_res <= o.tol || g.breakdown;
    rec.summary.set("status", reached ? "converged" : "budget");
    rec.summary.set("iterations", g.iterations);
    rec.summary.set("residual", true_res);
    rec.summary.set("breakdown", g.breakdown);
    if (o.common.timing) {
      rec.summary.set("basis_ms", g.basis_ms);
      rec.summary.set("total_ms", g.total_ms);
    }
    if (!reached) warn(err, "tolerance " + format_number(o.tol) + " not reached within d = " + std::to_string(o.common.d));
  } else if (o.method == "sgmres") {
    SgmresConfig cfg;
    cfg.d_max = o.common.d;
    cfg.sketch_size = o.common.sketch_size;
    cfg.basis = parse_basis(o.common.basis, problem, seed, parse_box(o.common.box));
    if (is_block_method(cfg.basis.method)) throw ArgumentError("--basis: block bases are for eig runs only");
    cfg.embedding = parse_embedding_kind(o.common.embedding);
    cfg.seed = seed;
    cfg.restart = parse_restart_policy(o.restart);
    cfg.target = o.tol;
    cfg.refine = o.refine;
    cfg.max_iterations = o.maxit;
    cfg.true_residual_every = o.true_every;

    const SgmresResult res = cfg.restart == RestartPolicy::none ? sgmres_solve(*problem.op, f, x0, cfg)
                                                                 : sgmres_iterative(*problem.op, f, x0, cfg);
    for (const auto& h : res.history) {
      RunRow row;
      row.iter = h.iteration;
      row.r_est = h.r_est * rel;
      row.true_res = h.true_residual * rel;
      row.cond = h.cond;
      row.ms = o.common.timing ? h.elapsed_ms : 0.0;
      rec.rows.push_back(row);
    }
    if (!rec.rows.empty()) rec.rows.back().true_res = res.true_residual * rel;
    rec.summary.set("status", res.status);
    rec.summary.set("reliable", res.reliable);
    rec.summary.set("iterations", res.iterations);
    rec.summary.set("restarts", res.restarts);
    rec.summary.set("basis_dim", res.basis_dim);
    rec.summary.set("r_est", res.r_est * rel);
    rec.summary.set("residual", res.true_residual * rel);
    rec.summary.set("cond", res.cond);
    rec.summary.set("refine_iterations", res.refine_iterations);
    rec.summary.set("seed", static_cast<double>(seed));
    if (o.common.timing) {
      rec.summary.set("basis_ms", res.timings.basis_ms);
      rec.summary.set("sketch_ms", res.timings.sketch_ms);
      rec.summary.set("solve_ms", res.timings.solve_ms);
      rec.summary.set("assembly_ms", res.timings.assembly_ms);
    }
    for (const auto& w : res.warnings) warn(err, w);
    if (!res.reliable) {
      code = kExitConditioning;
    } else if (res.status == "stagnated") {
      warn(err, "stagnated after " + std::to_string(res.restarts) + " restarts");
    } else if (res.status != "converged") {
      warn(err, "tolerance " + format_number(o.tol) + " not reached (" + res.status + ")");
    }
  } else {
    throw ArgumentError("--method: expected sgmres or gmres for solve, got '" + o.method + "'");
  }

  check_rows(rec.rows);
  emit(o.common.out_path, out, [&](std::ostream& os) {
    if (o.common.format == "json")
      write_solve_json(os, rec);
    else
      write_solve_csv(os, rec);
  });
  if (!o.common.out_path.empty()) print_summary(out, rec.summary);
  return code;
}

void fill_from_srr(EigRecord& rec, const SrrResult& res, bool timing) {
  for (std::size_t i : res.accepted) {
    const auto& p = res.pairs[i];
    rec.pairs.push_back(EigRow{p.theta.real(), p.theta.imag(), p.r_est});
  }
  rec.summary.set("cond_sb", res.cond);
  rec.summary.set("stabilized", res.stabilized);
  rec.summary.set("rank", res.rank);
  rec.summary.set("sketch_size", res.sketch_size);
  rec.summary.set("scale", res.scale);
  rec.summary.set("accepted", res.accepted.size());
  if (timing) {
    rec.summary.set("sketch_ms", res.sketch_ms);
    rec.summary.set("solve_ms", res.solve_ms);
  }
}

int cmd_eig(const EigOptions& o, std::ostream& out, std::ostream& err) {
  const std::uint64_t seed = effective_seed(o.common.seed);
  const Problem problem = resolve_problem(o.common, seed);
  const std::size_t n = problem.op->rows();
  if (o.method != "srr" && o.method != "srrstab" && o.method != "rr")
    throw ArgumentError("--method: expected srr, srrstab or rr for eig, got '" + o.method + "'");

  BasisSpec spec = parse_basis(o.common.basis, problem, seed, parse_box(o.common.box));
  KrylovBasis kb;
  if (is_block_method(spec.method)) {
    if (o.block == 0) throw ArgumentError("--basis " + o.common.basis + " needs --block");
    const std::size_t depth = o.depth ? o.depth : std::max<std::size_t>(1, o.common.d / o.block);
    spec.block_size = o.block;
    kb = block_basis(*problem.op, random_block(n, o.block, seed), depth, spec);
  } else {
    if (o.block > 1 || o.depth) throw ArgumentError("--block/--depth need a block basis (blockcheb, blockmono, blockarnoldi)");
    Rng rng(derive_seed(seed, 32));
    kb = build_basis(*problem.op, spec, rng.normal_vector(n), std::min(o.common.d, n));
  }
  if (kb.breakdown) warn(err, "basis recurrence broke down after " + std::to_string(kb.dim()) + " columns");

  EigRecord rec;
  rec.problem = problem.id;
  rec.method = o.method;
  rec.d = kb.dim();
  int code = kExitOk;

  if (o.method == "rr") {
    const RrResult rr = rr_baseline(*problem.op, kb.B);
    const double scale = frobenius_norm(kb.AB) / frobenius_norm(kb.B);
    std::size_t accepted = 0;
    for (const auto& p : rr.pairs) {
      if (o.symmetric && p.theta.imag() < 0.0) continue;
      if (!(p.residual < o.tau * scale)) continue;
      rec.pairs.push_back(EigRow{p.theta.real(), o.symmetric ? 0.0 : p.theta.imag(), p.residual});
      ++accepted;
    }
    rec.summary.set("scale", scale);
    rec.summary.set("accepted", accepted);
    if (o.common.timing) rec.summary.set("solve_ms", rr.solve_ms);
  } else {
    SrrConfig cfg;
    cfg.sketch_size = o.common.sketch_size;
    cfg.embedding = parse_embedding_kind(o.common.embedding);
    cfg.seed = seed;
    cfg.tau = o.tau;
    cfg.symmetric = o.symmetric;
    cfg.stabilize = o.method == "srrstab" ? Stabilize::on : Stabilize::automatic;
    cfg.assemble_vectors = false;
    try {
      const SrrResult res = srr(kb, cfg);
      if (res.stabilized && o.method == "srr")
        warn(err, "kappa_2(S B) = " + format_number(res.cond) + " exceeds cond_tol; used the stabilized extraction");
      fill_from_srr(rec, res, o.common.timing);
    } catch (const ConditioningError& e) {
      fill_from_srr(rec, e.partial(), o.common.timing);
      warn(err, e.what());
      rec.summary.set("status", "ill-conditioned");
      code = kExitConditioning;
    }
  }
  rec.summary.set("tau", o.tau);
  rec.summary.set("seed", static_cast<double>(seed));

  emit(o.common.out_path, out, [&](std::ostream& os) {
    if (o.common.format == "json")
      write_eig_json(os, rec);
    else
      write_eig_csv(os, rec);
  });
  if (!o.common.out_path.empty()) print_summary(out, rec.summary);
  return code;
}

int cmd_bench(const BenchCli& o, std::ostream& out, std::ostream& err) {
  BenchOptions opts = o.options;
  opts.seed = effective_seed(opts.seed);
  const BenchReport report = run_bench(opts);
  if (report.max_accounting_gap > 0.1)
    warn(err, "phase times cover only " + format_number(100.0 * (1.0 - report.max_accounting_gap)) +
                  "% of the measured total");
  emit(o.out_path, out, [&](std::ostream& os) {
    if (o.format == "json")
      write_bench_json(os, report);
    else
      write_bench_csv(os, report);
  });
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sketched Krylov solvers and eigensolvers"};
  app.require_subcommand(1);

  SolveOptions solve;
  auto* solve_cmd = app.add_subcommand("solve", "Solve A x = f with sGMRES or GMRES");
  add_common(solve_cmd, solve.common);
  solve_cmd->add_option("--rhs", solve.rhs, "random, ones or a file of values");
  solve_cmd->add_option("--method", solve.method, "sgmres or gmres");
  solve_cmd->add_option("--restart", solve.restart, "adaptive, whiten or none");
  solve_cmd->add_option("--tol", solve.tol, "Relative residual target");
  solve_cmd->add_option("--maxit", solve.maxit, "Total step budget across restarts (0: d)");
  solve_cmd->add_option("--true-every", solve.true_every, "Recompute the true residual every this many steps");
  solve_cmd->add_flag("--refine", solve.refine, "Refine coefficients with preconditioned LSQR");

  EigOptions eig;
  eig.common.basis = "arnoldi";
  auto* eig_cmd = app.add_subcommand("eig", "Eigenvalue estimates with sRR or Rayleigh-Ritz");
  add_common(eig_cmd, eig.common);
  eig_cmd->add_option("--method", eig.method, "srr, srrstab or rr");
  eig_cmd->add_option("--block", eig.block, "Block width for block bases");
  eig_cmd->add_option("--depth", eig.depth, "Number of blocks (default d / block)");
  eig_cmd->add_option("--tau", eig.tau, "Acceptance tolerance relative to ||SAB||_F / ||SB||_F");
  eig_cmd->add_flag("--symmetric", eig.symmetric, "Treat the operator as symmetric");

  BenchCli bench;
  auto* bench_cmd = app.add_subcommand("bench", "Phase timings and scaling fits");
  bench_cmd->add_option("--n-list", bench.options.n_list, "Problem sizes for the sGMRES sweep")->delimiter(',');
  bench_cmd->add_option("--d-list", bench.options.d_list, "Basis sizes for the GMRES sweep")->delimiter(',');
  bench_cmd->add_option("--d-fixed", bench.options.d_fixed, "Basis size for the sGMRES sweep");
  bench_cmd->add_option("--n-fixed", bench.options.n_fixed, "Problem size for the GMRES sweep");
  bench_cmd->add_option("--repeat", bench.options.repeat, "Repetitions per point (median reported)");
  bench_cmd->add_option("--seed", bench.options.seed, "Random seed (SKETCHY_SEED overrides)");
  bench_cmd->add_option("--out", bench.out_path, "Output file (default: stdout)");
  bench_cmd->add_option("--format", bench.format, "Output format")->check(CLI::IsMember({"csv", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*solve_cmd) return cmd_solve(solve, out, err);
    if (*eig_cmd) return cmd_eig(eig, out, err);
    return cmd_bench(bench, out, err);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const BreakdownError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("sketchy");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace sketchy::cli
