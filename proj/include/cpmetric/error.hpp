#pragma once

#include <stdexcept>
#include <string>

namespace cpmetric {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed CP-net or manifest text.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a semantic invariant (cycle, missing row,
/// degenerate edge, mismatched variable sets, out-of-range parameter).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A combinatorial computation would exceed the configured size bound.
class BudgetError : public Error {
 public:
  using Error::Error;
};

/// Tensor or encoding shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// File could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cpmetric
