#pragma once

#include <cstdint>
#include <random>

namespace brtrl {

// All randomness flows through mt19937_64 engines seeded from a master seed.
// Uniform draws are hand-rolled from raw 64-bit output so results do not
// depend on the standard library's distribution implementations.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Stream for global episode index i derived from the master seed; fixed
// derivation so concurrent rollouts would produce the same trajectories.
inline std::mt19937_64 derive_stream(std::uint64_t master_seed, std::uint64_t index) {
  return std::mt19937_64(splitmix64(master_seed ^ splitmix64(index)));
}

// Uniform double in [0, 1).
inline double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform double in [lo, hi).
inline double uniform_range(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(rng);
}

// Uniform integer in [0, n).
inline int uniform_index(std::mt19937_64& rng, int n) {
  const int k = static_cast<int>(uniform_unit(rng) * n);
  return k < n ? k : n - 1;
}

}  // namespace brtrl
