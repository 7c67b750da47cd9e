#pragma once

#include <stdexcept>
#include <string>

namespace ddsynth {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-conformal matrix shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Malformed or out-of-contract user input (bad JSON, non-PD multiplier, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Iterative method did not converge, singular Newton system, overflow.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

/// Kernel components are (numerically) linearly dependent on the delay window.
class DependentBasisError : public Error {
 public:
  using Error::Error;
};

/// Least-squares fit without enough independent samples.
class UnderdeterminedError : public Error {
 public:
  using Error::Error;
};

}  // namespace ddsynth
