#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace bcareid {

using Rng = std::mt19937_64;

// Derives an independent generator from a run seed and a stream label, so
// every consumer of randomness gets its own reproducible stream.
Rng derive_rng(std::uint64_t seed, std::string_view label, std::uint64_t index = 0);

std::uint64_t mix64(std::uint64_t x);

}  // namespace bcareid
