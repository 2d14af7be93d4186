#pragma once

#include <stdexcept>
#include <string>

namespace mrfup {

/// Base for all library failures. Each subclass maps onto one CLI exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
  virtual const char* kind() const noexcept { return "error"; }
};

/// Invalid configuration or inputs that violate a module precondition.
class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 1; }
  const char* kind() const noexcept override { return "config"; }
};

/// Arguments outside a function's mathematical domain.
class DomainError : public ConfigError {
 public:
  using ConfigError::ConfigError;
  const char* kind() const noexcept override { return "domain"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
  const char* kind() const noexcept override { return "io"; }
};

/// Non-finite residuals, singular systems and similar solver failures.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, long block = -1)
      : Error(what), block_(block) {}
  int exit_code() const noexcept override { return 3; }
  const char* kind() const noexcept override { return "numerical"; }
  long block() const noexcept { return block_; }

 private:
  long block_;
};

}  // namespace mrfup
