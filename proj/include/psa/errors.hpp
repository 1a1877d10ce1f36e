#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace psa {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class EmptyDimensionError : public DimensionError {
 public:
  using DimensionError::DimensionError;
};

class DegenerateRowError : public Error {
 public:
  explicit DegenerateRowError(std::size_t row)
      : Error("row " + std::to_string(row) + " is the zero vector"), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

// Overflow, underflow to zero where a positive value is required, non-finite results.
class NumericError : public Error {
 public:
  using Error::Error;
};

class SingularGramError : public NumericError {
 public:
  using NumericError::NumericError;
};

class ClusteringError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace psa
