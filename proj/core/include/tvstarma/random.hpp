#pragma once

#include <cstdint>
#include <random>

namespace tvstarma {

/// SplitMix64 finalizer: decorrelates nearby integer seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Seed for stream `index` under base seed `base` (replicates, cells, ...).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

using Rng = std::mt19937_64;

Rng make_rng(std::uint64_t seed);

}  // namespace tvstarma
