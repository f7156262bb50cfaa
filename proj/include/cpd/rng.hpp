#pragma once

// Seed derivation for parallel Monte Carlo. Every detector instance, sequence
// and campaign cell gets its own generator seeded by mixing the master seed
// with structural indices, so results do not depend on execution order.

#include <cstdint>
#include <random>
#include <string_view>

namespace cpd {

constexpr std::uint64_t kSeedGamma = 0x9E3779B97F4A7C15ull;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += kSeedGamma;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Child seed for stream `index` of purpose `tag` under `base`.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index,
                                 std::uint64_t tag = 0) {
  return splitmix64(base ^ splitmix64(index + 0x1234'5678'9ABC'DEF0ull) ^
                    splitmix64(tag));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index,
                                 std::string_view tag) {
  return derive_seed(base, index, fnv1a(tag));
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
  return std::mt19937_64(splitmix64(seed));
}

}  // namespace cpd
