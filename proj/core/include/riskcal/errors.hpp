#pragma once

#include <stdexcept>
#include <string>

namespace riskcal {

// Base of every domain error raised by the library. The CLI maps these to
// exit status 1; anything else escaping is a bug.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or mutually inconsistent arguments (mismatched p, bad weight...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Exhaustive enumeration requested beyond the fixed size guards.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// A requested target cannot be met inside a prior family.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, double lo, double hi);
  double attainable_lo() const noexcept { return lo_; }
  double attainable_hi() const noexcept { return hi_; }

 private:
  double lo_;
  double hi_;
};

// No closed-form route exists for a (loss, prior) pair.
class UnsupportedMethodError : public Error {
 public:
  using Error::Error;
};

// Every model was excluded from the posterior.
class DegeneratePosteriorError : public Error {
 public:
  using Error::Error;
};

}  // namespace riskcal
