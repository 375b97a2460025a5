#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace cimcs {

/// The project's generator: 64-bit Mersenne Twister. Distributions come from
/// Boost.Random so that sample streams are identical across standard libraries.
using Rng = std::mt19937_64;

inline constexpr const char* kRngName = "mt19937_64";

/// SplitMix64 finalizer (Steele, Lea, Flood 2014):
///   z += 0x9e3779b97f4a7c15;
///   z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9;
///   z = (z ^ (z >> 27)) * 0x94d049bb133111eb;
///   z ^= z >> 31;
std::uint64_t splitmix64(std::uint64_t z);

/// Stable seed derivation: folds each part into the running state with splitmix64.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts);

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace cimcs
