#pragma once

#include <stdexcept>
#include <string>

namespace pme {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad arguments or configuration: violated preconditions, out-of-range
/// options, inconsistent shapes.
struct ValidationError : Error {
  using Error::Error;
};

/// Numerical failure: singular systems, non-finite intermediates, degenerate
/// bandwidths, failed chart inversions.
struct NumericalError : Error {
  using Error::Error;
};

/// An iteration hit its cap without meeting its stopping rule.
struct ConvergenceError : NumericalError {
  using NumericalError::NumericalError;
};

/// Malformed input files: bad CSV rows, wrong column counts. Reported with
/// file name and line number.
struct ParseError : Error {
  using Error::Error;
};

/// Filesystem failures: missing files, unwritable outputs.
struct IoError : Error {
  using Error::Error;
};

}  // namespace pme
