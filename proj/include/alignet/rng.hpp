#pragma once

#include <cstdint>
#include <random>

namespace alignet {

// splitmix64: used to derive independent substream seeds from a master seed.
// Substreams keyed by (seed, index) stay stable no matter how work is
// scheduled across threads, which is what makes parallel runs bit-identical.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seed for substream `index` of stream `seed`. Chains through splitmix64
// twice so that (seed, 0) and (seed + 1, whatever) do not collide trivially.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(splitmix64(seed) ^ splitmix64(index * 0x9e3779b97f4a7c15ULL + 1));
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t index) {
    return std::mt19937_64(substream_seed(seed, index));
}

}  // namespace alignet
