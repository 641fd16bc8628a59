#pragma once

#include <stdexcept>
#include <string>

namespace ssc {

/// Inner/outer solver failed to reach its tolerance, line search broke down, etc.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A documented precondition of an operation does not hold.
struct PreconditionError : std::runtime_error {
  explicit PreconditionError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or inconsistent experiment configuration.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ssc
