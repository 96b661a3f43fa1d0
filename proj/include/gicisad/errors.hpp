#pragma once

#include <stdexcept>
#include <string>

namespace gicisad {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a precondition (shape mismatch, index out of range, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value or unknown configuration key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values during training or scoring.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Evaluation impossible for the given labels (e.g. one class only).
class EvaluationError : public Error {
 public:
  using Error::Error;
};

}  // namespace gicisad
