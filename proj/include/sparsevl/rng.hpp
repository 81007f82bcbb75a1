#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace sparsevl {

// SplitMix64 finalizer (Steele, Lea, Flood 2014). Used as the mixing step of
// the child-seed derivation below.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives a child seed from a base seed and an index path, e.g.
// (scenario, precision index, rate index, replication index). Each work unit
// gets an independent stream regardless of execution order.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = splitmix64(base);
    for (std::uint64_t p : path) h = splitmix64(h ^ p);
    return h;
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
    return std::mt19937_64(seed);
}

}  // namespace sparsevl
