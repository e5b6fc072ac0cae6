#pragma once

#include <cstdint>
#include <random>

namespace panelsynth {

// One stream per (seed, stream) pair so parallel consumers (bootstrap
// replicates, DGP draws) get results independent of execution order.
inline std::mt19937_64 seeded_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

// Unbiased draw in [0, n) by rejection; uniform_int_distribution is not
// pinned down by the standard, this is.
inline std::uint64_t bounded_uint64(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

}  // namespace panelsynth
