#pragma once

#include <cmath>
#include <cstdint>

namespace waveguard {

// Counter-based random numbers: every value is a pure function of the key,
// so parallel consumers stay deterministic without shared state.
namespace rng {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ counter);
}

// Uniform in (0, 1]; never returns 0 so it is safe under log().
inline double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    const std::uint64_t bits = hash(seed, stream, counter) >> 11;  // 53 bits
    return (static_cast<double>(bits) + 1.0) * 0x1p-53;
}

// Standard normal via Box-Muller on two counter slots.
inline double gaussian(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    const double u1 = uniform(seed, stream, 2 * counter);
    const double u2 = uniform(seed, stream, 2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace rng
}  // namespace waveguard
