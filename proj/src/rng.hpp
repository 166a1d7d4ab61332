#pragma once

#include <cstdint>
#include <random>

namespace gossipsim {

// Deterministic random source. All protocol and simulator randomness flows
// through this wrapper so a run is a pure function of its seed. Bounded draws
// use rejection sampling instead of std::uniform_int_distribution, whose
// output is not pinned down by the standard.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next() { return engine_(); }

  // Unbiased draw from [0, n). n must be > 0.
  uint64_t bounded(uint64_t n) {
    const uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }

  // Uniform double in [0, 1) with 53-bit resolution.
  double uniform01() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace gossipsim
