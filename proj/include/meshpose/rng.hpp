#pragma once

#include <cstdint>

namespace meshpose {

// splitmix64: tiny deterministic generator used for every stochastic choice
// in the project so that datasets, parameter init and tests are reproducible
// across platforms and standard-library versions.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1), 53-bit resolution
  double uniform() { return double(next_u64() >> 11) * (1.0 / 9007199254740992.0); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  uint64_t below(uint64_t n) { return next_u64() % n; }

 private:
  uint64_t state_;
};

// FNV-1a, used to derive per-name parameter init streams from a master seed.
inline uint64_t fnv1a(const char* s) {
  uint64_t h = 1469598103934665603ull;
  for (; *s; ++s) {
    h ^= uint64_t(uint8_t(*s));
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace meshpose
