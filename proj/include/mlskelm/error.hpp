#pragma once

#include <stdexcept>
#include <string>

namespace mlskelm {

/// Base of every error raised by the library. Subclasses map onto CLI exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed, missing or inconsistent input data (exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Factorization, convergence or other numerical failure (exit code 4).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace mlskelm
