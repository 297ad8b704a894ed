#pragma once

#include <stdexcept>
#include <string>

namespace bmix {

/// Base of every error raised by the library. Each subclass corresponds to
/// one failure family so callers (and the CLI) can map them to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Level sequence is empty, non-positive, or not strictly increasing.
class InvalidSequenceError : public Error {
 public:
  using Error::Error;
};

/// A value or a workload does not fit the configured integer width or budget.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// A rate budget could not be evaluated, or is not positive and decreasing.
class BudgetError : public Error {
 public:
  using Error::Error;
};

/// A stencil was evaluated outside the sampled interval of a field.
class CoverageError : public Error {
 public:
  using Error::Error;
};

/// An index, scale or N-range lies outside what the operation accepts.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Malformed scenario, flag, or report input.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Two report inputs cannot be merged.
class MergeError : public Error {
 public:
  using Error::Error;
};

}  // namespace bmix
