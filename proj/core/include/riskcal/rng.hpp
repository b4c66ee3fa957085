#pragma once

#include <cstdint>
#include <random>

namespace riskcal {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

// Child stream seed: hash(parent, index). Independent of call order, so
// parallel and sequential runs consume identical streams.
std::uint64_t split_seed(std::uint64_t parent, std::uint64_t index) noexcept;

inline Rng make_rng(std::uint64_t seed) { return Rng(mix64(seed)); }

inline Rng child_rng(std::uint64_t parent, std::uint64_t index) {
  return Rng(split_seed(parent, index));
}

}  // namespace riskcal
