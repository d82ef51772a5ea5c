#pragma once

#include <stdexcept>
#include <string>

namespace qpo {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A solver or integrator did not reach its tolerance.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A checked inequality (sandwich, threshold validation) failed at runtime.
class InvariantBreach : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace qpo
