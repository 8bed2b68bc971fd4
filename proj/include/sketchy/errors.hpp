#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sketchy {

/// Bad shapes, out-of-range parameters, non-finite input.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A triangular factor had a zero (or numerically zero) pivot.
class SingularityError : public std::runtime_error {
 public:
  SingularityError(const std::string& what, std::size_t column)
      : std::runtime_error(what + " (column " + std::to_string(column) + ")"), column_(column) {}
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

/// A Krylov recurrence or spectral estimate could not proceed.
class BreakdownError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// MatrixMarket and other input parsing failures; line is 1-based, 0 if unknown.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace sketchy
