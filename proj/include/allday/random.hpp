#pragma once

#include <cstdint>

namespace allday {

/// splitmix64 finalizer over (seed, stream); decorrelates per-frame and
/// per-epoch random streams derived from one user seed.
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace allday
