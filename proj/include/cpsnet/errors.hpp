#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cpsnet {

/// Invalid scenario or model parameters (dimension mismatch, non-PSD
/// covariance, unstabilizable pair, schema violation).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Plant state left the configured bound or became non-finite.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::uint64_t step)
      : std::runtime_error(what), step_(step) {}
  std::uint64_t step() const { return step_; }

 private:
  std::uint64_t step_;
};

}  // namespace cpsnet
