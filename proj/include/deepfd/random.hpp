#pragma once

#include <cstdint>

namespace deepfd {

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream seed for (seed, stream, index); used so per-image and
// per-epoch randomness does not depend on generation order.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  return mix64(mix64(mix64(seed) ^ stream) ^ index);
}

// Stream tags.
inline constexpr std::uint64_t kStreamSynth = 0x5359'4e54;
inline constexpr std::uint64_t kStreamPairs = 0x5041'4952;
inline constexpr std::uint64_t kStreamPhase1Batches = 0x4231'0000;
inline constexpr std::uint64_t kStreamPhase2Batches = 0x4232'0000;
inline constexpr std::uint64_t kStreamSplit = 0x5350'4c54;

}  // namespace deepfd
