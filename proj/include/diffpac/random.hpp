#pragma once

#include <cstdint>
#include <random>

#include "diffpac/linalg.hpp"

namespace diffpac {

/// All sampling in the library draws from a 64-bit Mersenne twister seeded
/// explicitly by the caller. No other entropy source is consulted.
using Rng = std::mt19937_64;

/// Stream-splitting rule for replicas and trials:
/// seed_i = splitmix64(master + (i + 1) * 0x9E3779B97F4A7C15).
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index);

Vector standard_normal_vector(Rng& rng, Eigen::Index dim);

/// Fills every entry of `out` with an independent standard normal draw.
void fill_standard_normal(Rng& rng, Matrix& out);

}  // namespace diffpac
