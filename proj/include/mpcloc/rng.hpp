#pragma once

// Seed derivation for reproducible, order-independent random streams.
//
// Every consumer of randomness gets its own engine seeded from a hash of
// (master seed, stream labels). Trial t of an experiment therefore draws the
// same numbers no matter which worker runs it or in which order.

#include <cstdint>
#include <initializer_list>
#include <random>

namespace mpcloc {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Mixes a master seed with any number of stream labels into a child seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> labels) {
    std::uint64_t h = splitmix64(seed);
    for (std::uint64_t label : labels) h = splitmix64(h ^ splitmix64(label + 0x632BE59BD9B4E019ULL));
    return h;
}

inline Engine make_engine(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    return Engine(seq);
}

inline Engine make_engine(std::uint64_t seed, std::initializer_list<std::uint64_t> labels) {
    return make_engine(derive_seed(seed, labels));
}

// Stream labels used across the library.
namespace stream {
inline constexpr std::uint64_t kDelays = 1;
inline constexpr std::uint64_t kDirections = 2;
inline constexpr std::uint64_t kNoise = 3;
inline constexpr std::uint64_t kScramble = 4;
inline constexpr std::uint64_t kScenario = 5;
inline constexpr std::uint64_t kObserve = 6;
inline constexpr std::uint64_t kOffsets = 7;
inline constexpr std::uint64_t kTrial = 8;
}  // namespace stream

}  // namespace mpcloc
