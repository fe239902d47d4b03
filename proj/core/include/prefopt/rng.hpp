// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace prefopt {

/// All randomness flows through explicitly seeded mt19937_64 streams.
/// Draw helpers below avoid std::*_distribution, whose output is
/// implementation-defined; with these, identical seeds give identical
/// streams on every platform.
using RngStream = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream from a root seed plus up to two salts.
inline RngStream make_stream(std::uint64_t seed, std::uint64_t salt_a = 0,
                             std::uint64_t salt_b = 0) {
  std::uint64_t s = splitmix64(seed);
  s = splitmix64(s ^ splitmix64(salt_a ^ 0xa5a5a5a5a5a5a5a5ULL));
  s = splitmix64(s ^ splitmix64(salt_b ^ 0xc3c3c3c3c3c3c3c3ULL));
  return RngStream(s);
}

/// Uniform draw in [0, 1) with 53 bits of precision.
inline double next_unit(RngStream& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller on two uniform draws.
inline double next_gaussian(RngStream& rng) {
  const double u1 = static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
  const double u2 = next_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

/// Uniform integer in [0, n). Rejection sampling, no modulo bias.
inline int next_index(RngStream& rng, int n) {
  const std::uint64_t un = static_cast<std::uint64_t>(n);
  const std::uint64_t bound = ~std::uint64_t{0} - (~std::uint64_t{0} % un);
  std::uint64_t x = rng();
  while (x >= bound) x = rng();
  return static_cast<int>(x % un);
}

}  // namespace prefopt
