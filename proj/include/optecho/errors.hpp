#pragma once

#include <stdexcept>
#include <string>

namespace optecho {

/// Fit-stage failures (as opposed to precondition violations, which throw
/// std::invalid_argument).
class FitError : public std::runtime_error {
 public:
  explicit FitError(const std::string& msg) : std::runtime_error(msg) {}
};

/// An iterative search ran out of iterations or stopped against a bound.
class NoConvergenceError : public FitError {
 public:
  explicit NoConvergenceError(const std::string& msg) : FitError(msg) {}
};

/// Malformed input file; message names the offending line where known.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace optecho
