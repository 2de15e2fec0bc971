#pragma once

#include <cstdint>
#include <random>

namespace bdlp {

using Rng = std::mt19937_64;

/// One step of the splitmix64 generator (Steele, Lea, Flood 2014).
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Per-replicate seed: master_seed XOR the splitmix64 output stream evaluated
/// at the replicate index. Keeps replicate streams decorrelated while staying
/// reproducible from (master_seed, index) alone.
inline std::uint64_t replicate_seed(std::uint64_t master_seed, std::uint64_t index) {
    std::uint64_t state = index;
    return master_seed ^ splitmix64(state);
}

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

}  // namespace bdlp
