#pragma once

#include <cstdint>
#include <random>

namespace colinf {

using Rng = std::mt19937_64;

/// Message kinds that own separate random streams.
enum class StreamKind : std::uint64_t {
  scenario = 1,
  query = 2,
  feature = 3,
  init = 4,
  dataset = 5,
  batch = 6,
  patch = 7,
};

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Derives a reproducible stream seed from a master seed and a tuple of
/// coordinates. Different coordinates give statistically independent streams.
std::uint64_t derive_seed(std::uint64_t master, StreamKind kind, std::uint64_t a = 0,
                          std::uint64_t b = 0, std::uint64_t c = 0);

inline Rng make_stream(std::uint64_t master, StreamKind kind, std::uint64_t a = 0,
                       std::uint64_t b = 0, std::uint64_t c = 0) {
  return Rng(derive_seed(master, kind, a, b, c));
}

/// Uniform double in [0, 1) from the top 53 bits of one 64-bit draw.
/// Platform independent, unlike std::uniform_real_distribution.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace colinf
