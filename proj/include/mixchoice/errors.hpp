#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mixchoice {

// Input errors (CLI exit status 2) derive from std::invalid_argument or
// std::out_of_range; numerical failures (exit status 3) derive from
// NumericalError.

class RegionViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnsupportedDimension : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidCovariance : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularInformation : public NumericalError {
 public:
  explicit SingularInformation(const std::string& what, std::ptrdiff_t draw = -1)
      : NumericalError(what), draw_(draw) {}

  /// Index of the prior draw that produced the singular matrix, or -1.
  std::ptrdiff_t draw() const noexcept { return draw_; }

 private:
  std::ptrdiff_t draw_;
};

class AllStartsSingular : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace mixchoice
