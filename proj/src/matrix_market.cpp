#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "sketchy/errors.hpp"
#include "sketchy/operators.hpp"

namespace sketchy {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool blank_or_comment(const std::string& line) {
  for (char c : line) {
    if (c == '%') return true;
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

}  // namespace

SparseCsr read_matrix_market(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError("empty input, expected %%MatrixMarket header", 1);
  ++lineno;
  std::istringstream hs(line);
  std::string banner, object, format, field, symmetry;
  hs >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket") throw ParseError("missing %%MatrixMarket banner", lineno);
  object = lower(object);
  format = lower(format);
  field = lower(field);
  symmetry = lower(symmetry);
  if (object != "matrix") throw ParseError("unsupported object '" + object + "'", lineno);
  if (format != "coordinate") throw ParseError("only coordinate format is supported", lineno);
  if (field != "real" && field != "integer") throw ParseError("unsupported field '" + field + "'", lineno);
  if (symmetry != "general" && symmetry != "symmetric")
    throw ParseError("unsupported symmetry '" + symmetry + "'", lineno);
  const bool symmetric = symmetry == "symmetric";

  std::size_t rows = 0, cols = 0, nnz = 0;
  bool have_size = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank_or_comment(line)) continue;
    std::istringstream ss(line);
    long long r, c, z;
    if (!(ss >> r >> c >> z) || r < 0 || c < 0 || z < 0) throw ParseError("malformed size line", lineno);
    std::string extra;
    if (ss >> extra) throw ParseError("trailing characters on size line", lineno);
    rows = static_cast<std::size_t>(r);
    cols = static_cast<std::size_t>(c);
    nnz = static_cast<std::size_t>(z);
    have_size = true;
    break;
  }
  if (!have_size) throw ParseError("missing size line", lineno);
  if (symmetric && rows != cols) throw ParseError("symmetric matrix must be square", lineno);

  std::vector<Triplet> entries;
  entries.reserve(symmetric ? 2 * nnz : nnz);
  std::size_t seen = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank_or_comment(line)) continue;
    if (seen == nnz) throw ParseError("more entries than declared", lineno);
    std::istringstream ss(line);
    long long i, j;
    double v;
    if (!(ss >> i >> j >> v)) throw ParseError("malformed entry", lineno);
    std::string extra;
    if (ss >> extra) throw ParseError("trailing characters on entry line", lineno);
    if (i < 1 || j < 1 || static_cast<std::size_t>(i) > rows || static_cast<std::size_t>(j) > cols)
      throw ParseError("index (" + std::to_string(i) + ", " + std::to_string(j) + ") out of range", lineno);
    if (!std::isfinite(v)) throw ParseError("non-finite value", lineno);
    const auto r = static_cast<std::size_t>(i - 1);
    const auto c = static_cast<std::size_t>(j - 1);
    entries.push_back({r, c, v});
    if (symmetric && r != c) entries.push_back({c, r, v});
    ++seen;
  }
  if (seen != nnz)
    throw ParseError("expected " + std::to_string(nnz) + " entries, found " + std::to_string(seen), lineno);
  return SparseCsr::from_triplets(rows, cols, std::move(entries));
}

SparseCsr read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'", 0);
  return read_matrix_market(in);
}

void write_matrix_market(std::ostream& out, const SparseCsr& a) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows() << ' ' << a.cols() << ' ' << a.nnz() << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  const auto& rs = a.row_starts();
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = rs[i]; k < rs[i + 1]; ++k)
      out << (i + 1) << ' ' << (a.col_indices()[k] + 1) << ' ' << a.values()[k] << '\n';
}

void write_matrix_market(const std::string& path, const SparseCsr& a) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write '" + path + "'");
  write_matrix_market(out, a);
}

}  // namespace sketchy
