#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace proxdiv {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of a function
/// (t <= 0 for a divergence generator, gamma in {0,1}, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Parameter point or configuration violates a model/config invariant.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A density or conditional probability underflowed where a positive value
/// is required.
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

/// Adaptive and fallback quadrature both failed.
class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, std::vector<double> failed_panels,
                   double last_estimate)
      : Error(what),
        failed_panels_(std::move(failed_panels)),
        last_estimate_(last_estimate) {}

  /// Left endpoints of the panels on which evaluation broke down.
  const std::vector<double>& failed_panels() const noexcept { return failed_panels_; }
  double last_estimate() const noexcept { return last_estimate_; }

 private:
  std::vector<double> failed_panels_;
  double last_estimate_;
};

/// An objective could not be evaluated at a parameter point.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// Nelder-Mead could not be started or produced no usable point.
class OptimizerError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace proxdiv
