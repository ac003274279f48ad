#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gmmcache {

// Error categories map one-to-one onto the CLI exit codes.
enum class ErrorKind {
  kUsage = 1,
  kData = 2,
  kNumeric = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::kUsage, what) {}
};

// Invalid configuration values (fractions out of range, zero windows, ...).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

class EmptyInputError : public DataError {
 public:
  explicit EmptyInputError(const std::string& what) : DataError(what) {}
};

class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class InsufficientSamplesError : public DataError {
 public:
  explicit InsufficientSamplesError(const std::string& what) : DataError(what) {}
};

class DegenerateDataError : public DataError {
 public:
  explicit DegenerateDataError(const std::string& what) : DataError(what) {}
};

// Numerical failure: a covariance that is not positive definite, a NaN
// likelihood, and similar.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::kNumeric, what) {}
};

}  // namespace gmmcache
