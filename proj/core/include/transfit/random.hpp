#pragma once

#include <cstdint>
#include <random>

namespace transfit {

using Rng = std::mt19937_64;

/// Purpose tags keep streams for different jobs disjoint under one seed.
enum class StreamPurpose : std::uint64_t {
  Simulation = 0x53494d55ULL,
  Bootstrap = 0x424f4f54ULL,
};

std::uint64_t splitmix64(std::uint64_t& state);

/// Seed for stream `index` of `purpose` under a master seed:
/// three chained SplitMix64 mixes of (seed, purpose, index).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index, StreamPurpose purpose);

inline Rng make_rng(std::uint64_t seed, std::uint64_t index, StreamPurpose purpose) {
  return Rng(derive_seed(seed, index, purpose));
}

}  // namespace transfit
