#include <cmath>
#include <fstream>
#include <sstream>

#include "sketchy/cli.hpp"
#include "sketchy/errors.hpp"
#include "sketchy/rng.hpp"

namespace sketchy::cli {

namespace {

std::size_t parse_size(const std::string& text, const std::string& what) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    throw ArgumentError(what + ": expected a positive integer, got '" + text + "'");
  }
  if (pos != text.size() || v == 0) throw ArgumentError(what + ": expected a positive integer, got '" + text + "'");
  return static_cast<std::size_t>(v);
}

std::pair<std::string, std::string> split_colon(const std::string& text) {
  const auto pos = text.find(':');
  if (pos == std::string::npos) return {text, {}};
  return {text.substr(0, pos), text.substr(pos + 1)};
}

bool is_symmetric(const SparseCsr& a) {
  if (a.rows() != a.cols()) return false;
  const SparseCsr at = a.transpose();
  return a == at;
}

}  // namespace

Problem generate_problem(const std::string& spec, std::uint64_t seed) {
  const auto [name, arg] = split_colon(spec);
  if (arg.empty()) throw ArgumentError("--gen " + spec + ": expected <name>:<size>");
  const std::size_t size = parse_size(arg, "--gen " + name);
  Problem p;
  p.id = spec;
  p.param = size;
  if (name == "laplacian2d") {
    auto a = std::make_shared<SparseCsr>(laplacian_2d(size));
    p.kind = ProblemKind::laplacian2d;
    p.csr = a;
    p.op = a;
    p.symmetric = true;
    p.box = SpectralBox{4.0, 4.0, 0.0};
  } else if (name == "trs") {
    p.kind = ProblemKind::trs;
    p.op = std::make_shared<TrsOperator>(trs_operator(size, 0.01, 1.0, seed));
  } else if (name == "planted") {
    if (size <= kPlantedCount) throw ArgumentError("--gen planted: size must exceed " + std::to_string(kPlantedCount));
    auto diag = std::make_shared<DiagonalOperator>(planted_diagonal(size, seed));
    p.kind = ProblemKind::planted;
    p.op = diag;
    p.symmetric = true;
    // Chebyshev damping on the bulk [0, 1] amplifies the planted negatives.
    p.box = SpectralBox{0.5, 0.505, 0.0};
  } else if (name == "random") {
    auto a = std::make_shared<SparseCsr>(random_sparse(size, 5, 10.0, seed));
    p.kind = ProblemKind::random;
    p.csr = a;
    p.op = a;
  } else {
    throw ArgumentError("--gen: unknown generator '" + name + "' (expected laplacian2d, trs, planted or random)");
  }
  return p;
}

Problem load_problem(const std::string& path) {
  auto a = std::make_shared<SparseCsr>(read_matrix_market(path));
  if (a->rows() != a->cols())
    throw ArgumentError("--matrix " + path + ": matrix is " + std::to_string(a->rows()) + " x " +
                        std::to_string(a->cols()) + ", expected square");
  Problem p;
  p.id = path;
  p.kind = ProblemKind::matrix;
  p.param = a->rows();
  p.csr = a;
  p.op = a;
  p.symmetric = is_symmetric(*a);
  return p;
}

Vector make_rhs(const Problem& problem, const std::string& spec, std::uint64_t seed) {
  const std::size_t n = problem.op->rows();
  Vector f;
  if (spec == "random") {
    Rng rng(derive_seed(seed, 31));
    f = rng.normal_vector(n);
    if (problem.kind == ProblemKind::laplacian2d) {
      // constants span the kernel; keep the system consistent
      double mean = 0.0;
      for (double v : f) mean += v;
      mean /= static_cast<double>(n);
      for (double& v : f) v -= mean;
    }
    return f;
  }
  if (spec == "ones") return Vector(n, 1.0);
  std::ifstream in(spec);
  if (!in) throw ArgumentError("--rhs: cannot open '" + spec + "'");
  std::string tok;
  while (in >> tok) {
    if (tok[0] == '%' || tok[0] == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    try {
      std::size_t pos = 0;
      f.push_back(std::stod(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ParseError("--rhs " + spec + ": bad value '" + tok + "'", f.size() + 1);
    }
  }
  if (f.size() != n)
    throw ArgumentError("--rhs " + spec + ": has " + std::to_string(f.size()) + " values, operator dimension is " +
                        std::to_string(n));
  return f;
}

BasisSpec parse_basis(const std::string& text, const Problem& problem, std::uint64_t seed,
                      std::optional<SpectralBox> box_override) {
  const auto [name, arg] = split_colon(text);
  BasisSpec spec;
  auto box = [&]() {
    if (box_override) return *box_override;
    if (problem.box) return *problem.box;
    return estimate_spectral_box(*problem.op, 20, seed);
  };
  if (name == "arnoldi") {
    spec.method = BasisMethod::arnoldi;
    if (!arg.empty()) spec.k = parse_size(arg, "--basis arnoldi");
  } else if (name == "lanczos") {
    spec.method = BasisMethod::lanczos;
    spec.k = 2;
  } else if (name == "chebyshev") {
    spec.method = BasisMethod::chebyshev;
    spec.box = box();
  } else if (name == "newton") {
    spec.method = BasisMethod::newton;
    spec.shifts = leja_order(estimate_spectrum(*problem.op, 20, seed).ritz);
  } else if (name == "monomial") {
    spec.method = BasisMethod::monomial;
  } else if (name == "blockcheb") {
    spec.method = BasisMethod::block_chebyshev;
    spec.box = box();
  } else if (name == "blockmono") {
    spec.method = BasisMethod::block_monomial;
  } else if (name == "blockarnoldi") {
    spec.method = BasisMethod::block_partial;
    if (!arg.empty()) spec.k = parse_size(arg, "--basis blockarnoldi");
  } else {
    throw ArgumentError("--basis: unknown basis '" + text +
                        "' (expected arnoldi[:k], lanczos, chebyshev, newton, monomial, blockcheb, blockmono or "
                        "blockarnoldi[:k])");
  }
  if (!arg.empty() && name != "arnoldi" && name != "blockarnoldi")
    throw ArgumentError("--basis " + name + " takes no parameter");
  return spec;
}

}  // namespace sketchy::cli
