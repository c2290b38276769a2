#pragma once

#include <stdexcept>
#include <string>

namespace tfcast {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad invocation: violated precondition on arguments (empty input, bad fraction, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, zero scales, diverged losses.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Operation invoked in the wrong lifecycle state (backward before forward, ...).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Input data could not be interpreted (missing columns, bad rows, empty selections).
class DataError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

class RowError : public DataError {
 public:
  RowError(std::size_t row, const std::string& what)
      : DataError("row " + std::to_string(row) + ": " + what), row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

}  // namespace tfcast
