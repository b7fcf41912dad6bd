#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hdsim {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A distribution parameter or function argument violates its constraints.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a function (e.g. u > 1).
class DomainError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

/// Input data cannot be used: constant columns, missing values, bad files.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A data column with zero spread; correlations with it are undefined.
class DegenerateColumnError : public DataError {
 public:
  explicit DegenerateColumnError(std::size_t column)
      : DataError("column " + std::to_string(column) + " is constant"), column_(column) {}
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

/// Sample variance does not exceed the sample mean.
class OverDispersionError : public DataError {
 public:
  using DataError::DataError;
};

/// A margin family the requested operation cannot handle.
class UnsupportedMarginError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: inadmissible matrix, non-convergence, unreachable target.
class NumericError : public Error {
 public:
  using Error::Error;
};

class InadmissibleError : public NumericError {
 public:
  InadmissibleError(const std::string& what, double min_eigenvalue)
      : NumericError(what), min_eigenvalue_(min_eigenvalue) {}
  double min_eigenvalue() const noexcept { return min_eigenvalue_; }

 private:
  double min_eigenvalue_;
};

/// The requested Pearson target lies outside what the margins can attain.
class TargetOutOfRangeError : public NumericError {
 public:
  TargetOutOfRangeError(const std::string& what, double lower, double upper)
      : NumericError(what), lower_(lower), upper_(upper) {}
  double lower() const noexcept { return lower_; }
  double upper() const noexcept { return upper_; }

 private:
  double lower_;
  double upper_;
};

}  // namespace hdsim
