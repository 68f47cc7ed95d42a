#pragma once

#include <cstdint>

namespace hinet {

// Splitmix64 generator. Small, seedable, and stable across platforms, which is
// what the reproducibility contract needs (init, phantoms and augmentation all
// draw from it in a fixed order).
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Integer in [0, n).
  uint64_t next_below(uint64_t n) { return next_u64() % n; }

  bool next_bool() { return (next_u64() & 1) != 0; }

  // Gaussian-like variate (mean 0, stddev ~1): sum of four uniforms, rescaled.
  // Irwin-Hall with k=4 has variance 4/12, so scale by sqrt(3).
  double next_gaussian_like() {
    double s = next_unit() + next_unit() + next_unit() + next_unit() - 2.0;
    return s * 1.7320508075688772;
  }

 private:
  uint64_t state_;
};

// Derives an independent stream for (seed, tag), used so the sample sequence
// and augmentation draws stay decoupled from parameter init.
inline uint64_t derive_seed(uint64_t seed, uint64_t tag) {
  SplitMix64 g(seed ^ (0x51b5c19ad1e1a3b7ULL * (tag + 1)));
  return g.next_u64();
}

}  // namespace hinet
