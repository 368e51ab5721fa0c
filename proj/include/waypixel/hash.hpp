#pragma once

#include <cstdint>

namespace waypixel {

/// splitmix64-style combiner used to derive independent, order-free seeds.
constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Uniform double in [0, 1) derived from a hashed key.
constexpr double hash_uniform(std::uint64_t key) {
  return static_cast<double>(mix_seed(key, 0x5851f42d4c957f2dULL) >> 11) * 0x1.0p-53;
}

}  // namespace waypixel
