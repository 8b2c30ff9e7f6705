#pragma once

// Seed management. Every random stream is derived from one root seed and a
// subsystem label, so runs are regenerable from the root alone.

#include <cstdint>
#include <random>
#include <string_view>

namespace lookout {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
std::uint64_t mix_seed(std::uint64_t x);

/// Deterministic child seed for (root, label, index).
std::uint64_t derive_seed(std::uint64_t root, std::string_view label, std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t root, std::string_view label, std::uint64_t index = 0) {
  return Rng(derive_seed(root, label, index));
}

}  // namespace lookout
