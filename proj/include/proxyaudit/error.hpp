#pragma once

#include <stdexcept>
#include <string>

namespace proxyaudit {

/// Bad or inconsistent input: schema violations, malformed files, invalid specs.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A cell-level ingestion failure carrying 1-based data row and column name.
class DataError : public InputError {
 public:
  DataError(const std::string& message, long row, std::string column)
      : InputError(message + " (row " + std::to_string(row) + ", column '" + column + "')"),
        row_(row),
        column_(std::move(column)) {}

  long row() const { return row_; }
  const std::string& column() const { return column_; }

 private:
  long row_;
  std::string column_;
};

/// The numerics could not produce a trustworthy answer.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SeparationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConvergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace proxyaudit
