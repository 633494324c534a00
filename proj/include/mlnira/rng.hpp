#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "mlnira/core.hpp"

namespace mlnira {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace detail

// Engine seed for sub-stream `index` of a run seeded with `seed`. Scenarios,
// nodewise fits and generator groups each take their own stream so parallel
// execution stays reproducible.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t state = seed;
  std::uint64_t mixed = detail::splitmix64(state) ^ (index * 0xD2B74407B1CE6E93ull);
  state = mixed;
  return detail::splitmix64(state);
}

// Seedable deterministic generator (mt19937_64 core) with a fixed draw
// discipline: uniform01 and uniform_int consume exactly one engine draw,
// normal consumes exactly two.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t state = seed;
    engine_.seed(detail::splitmix64(state));
  }

  std::uint64_t raw() { return engine_(); }

  // [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform in [0, n) via multiply-shift; one draw.
  int uniform_int(int n) {
    if (n <= 0) throw ContractError("uniform_int: n must be positive");
    unsigned __int128 wide = static_cast<unsigned __int128>(engine_()) * static_cast<unsigned __int128>(n);
    return static_cast<int>(wide >> 64);
  }

  // Box-Muller without caching so the draw count stays predictable.
  double normal(double mean = 0.0, double sd = 1.0) {
    double u1 = uniform01();
    double u2 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    double radius = std::sqrt(-2.0 * std::log(u1));
    return mean + sd * radius * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mlnira
