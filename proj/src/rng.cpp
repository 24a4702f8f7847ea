#include "cpsnet/rng.hpp"

namespace cpsnet {

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t scenario_seed, std::string_view stream_id)
    : seed_(splitmix64(splitmix64(scenario_seed) ^ fnv1a64(stream_id))), engine_(seed_) {}

double RngStream::uniform() { return unit_(engine_); }

double RngStream::standard_normal() { return normal_(engine_); }

}  // namespace cpsnet
