#pragma once

#include <cstdint>
#include <random>

namespace polyscore {

// Seeded generator shared by every module. Deterministic for a given seed;
// `entropy_seed()` is used when no seed is requested.
using Rng = std::mt19937_64;

inline std::uint64_t entropy_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

}  // namespace polyscore
