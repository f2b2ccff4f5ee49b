#pragma once

#include <stdexcept>
#include <string>

namespace latticediff {

// Bad input: malformed config, violated model assumption. CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A computation that did not converge or lost track. CLI exit code 1.
class NumericError : public std::runtime_error {
 public:
  NumericError(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

}  // namespace latticediff
