#pragma once

#include <cstdint>
#include <random>

namespace stonag {

/// SplitMix64 mixing step (Vigna). Used only to derive stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Per-path stream seed: master seed + path index -> decorrelated 64-bit seed.
/// Every Monte Carlo path derives its own engine from this, so results do not
/// depend on how paths are distributed over worker threads.
inline std::uint64_t stream_seed(std::uint64_t master_seed, std::uint64_t path_index) {
    return splitmix64(master_seed ^ splitmix64(path_index + 0x6A09E667F3BCC909ull));
}

using RandomStream = std::mt19937_64;

inline RandomStream make_stream(std::uint64_t master_seed, std::uint64_t path_index) {
    return RandomStream(stream_seed(master_seed, path_index));
}

}
