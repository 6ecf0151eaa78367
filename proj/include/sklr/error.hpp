#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sklr {

/// Malformed or unreadable input file. Carries the 1-based line number when
/// the failure is tied to a particular line (0 otherwise).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line == 0 ? what
                                     : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A numerical breakdown: loss of positive definiteness, a singular 2x2 middle
/// factor, or an eigenvalue sign pattern that a valid constraint cannot produce.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sklr
