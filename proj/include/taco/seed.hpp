#pragma once

#include <cstdint>

namespace taco {

/// Derives an independent stream seed from the single user seed (splitmix64
/// finalizer over seed + golden * (stream + 1)). Streams in use:
///   0           query/base subset sampling
///   1 + j       subspace j of an index; its two codebooks use streams 1 and 2
///               derived again from that value
///   0x1000 + x  benchmark-side selections
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace taco
