#pragma once

#include <cstdint>
#include <random>

namespace stirlab {

// One Mersenne Twister per replicate; streams are never shared.
using Rng = std::mt19937_64;

// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Stream seed of replicate `replicate_id` under `master_seed`:
//   splitmix64(master_seed ^ splitmix64(replicate_id)).
constexpr std::uint64_t replicate_stream_seed(std::uint64_t master_seed,
                                              std::uint64_t replicate_id) {
  return splitmix64(master_seed ^ splitmix64(replicate_id));
}

inline Rng make_replicate_rng(std::uint64_t master_seed, std::uint64_t replicate_id) {
  return Rng(replicate_stream_seed(master_seed, replicate_id));
}

// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform on (0, 1); safe as the argument of log.
inline double uniform_open01(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace stirlab
