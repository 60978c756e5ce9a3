#pragma once

#include <stdexcept>
#include <string>

namespace msj {

// Invalid workload, policy or experiment configuration.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Arrival rates at or beyond the stability boundary of a formula that needs
// a stable system.
class UnstableError : public std::domain_error {
 public:
  explicit UnstableError(const std::string& what) : std::domain_error(what) {}
};

}  // namespace msj
