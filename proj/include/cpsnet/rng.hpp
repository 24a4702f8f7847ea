#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cpsnet {

/// Stable 64-bit hash of a component name.
std::uint64_t fnv1a64(std::string_view text);

/// SplitMix64 finalizer; used to decorrelate derived seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Independent random stream for one component. The stream seed depends only
/// on (scenario seed, stream id), so adding a component never shifts the draws
/// of another.
class RngStream {
 public:
  RngStream(std::uint64_t scenario_seed, std::string_view stream_id);

  std::uint64_t seed() const { return seed_; }

  double uniform();         // [0, 1)
  double standard_normal();

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

}  // namespace cpsnet
