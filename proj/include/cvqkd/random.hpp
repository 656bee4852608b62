#pragma once

#include <cstdint>
#include <random>

namespace cvqkd {

using Seed = std::uint64_t;
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Independent random streams drawn by one ensemble copy.
enum class Stream : std::uint64_t {
    symbols = 1,
    phase_noise = 2,
    detector = 3,
    calib_electronic = 4,
    calib_shot = 5,
    adc_ranging = 6,
    preamble = 7,
};

/// Counter-based child seed: a pure function of (master, copy index, stream).
inline Seed derive_seed(Seed master, std::uint64_t copy_index, Stream stream) {
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ (copy_index * 0xD1B54A32D192ED03ULL));
    h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
    return h;
}

inline Rng make_rng(Seed seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    return Rng(seq);
}

}  // namespace cvqkd
