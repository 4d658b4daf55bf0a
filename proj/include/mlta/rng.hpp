#pragma once

#include <cstdint>
#include <random>

namespace mlta {

using Rng = std::mt19937_64;

/// Independent generator for (seed, stream); the same pair always yields the
/// same sequence.
inline Rng substream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32), 0x6d6c7461u};
  return Rng(seq);
}

inline double std_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

}  // namespace mlta
