#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace mmtk {

// All seeded randomness goes through std::mt19937_64 plus the helpers below,
// which avoid the implementation-defined std distributions so that a given
// seed produces the same draws with every standard library.
using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

// Derives a stream seed from a user seed and a label (record id, benchmark).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

// Uniform integer in [0, n). n must be > 0.
std::uint64_t uniform_below(Rng& rng, std::uint64_t n);

// Uniform double in [0, 1) from the top 53 bits.
double uniform_unit(Rng& rng);

// Fisher-Yates permutation of {0..n-1}.
std::vector<std::size_t> random_permutation(Rng& rng, std::size_t n);

// k distinct indices from [0, n), returned in ascending order.
std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n, std::size_t k);

}  // namespace mmtk
