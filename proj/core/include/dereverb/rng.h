// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DEREVERB_RNG_H_
#define DEREVERB_RNG_H_

#include <cstdint>
#include <cmath>
#include <random>
#include <utility>

namespace dereverb {

// Deterministic random source. The engine is std::mt19937_64, whose output
// sequence is fixed by the C++ standard; the mappings to real numbers below
// are our own so that streams are identical on every platform (the standard
// distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  uint64_t seed() const { return seed_; }
  uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double Uniform() { return static_cast<double>(NextU64() >> 11) * 0x1.0p-53; }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  uint64_t UniformInt(uint64_t n);

  // Standard normal via the Box-Muller transform (one value per call).
  double Normal();

  // Child seed for stream `index`, via splitmix64 of (seed, index). Used to
  // give parallel workers independent, order-free streams.
  static uint64_t Derive(uint64_t seed, uint64_t index);

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
};

inline uint64_t Rng::UniformInt(uint64_t n) {
  if (n <= 1) return 0;
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = NextU64();
  } while (x >= limit);
  return x % n;
}

inline double Rng::Normal() {
  double u1 = Uniform();
  while (u1 <= 0.0) u1 = Uniform();
  const double u2 = Uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(6.283185307179586476925 * u2);
}

inline uint64_t Rng::Derive(uint64_t seed, uint64_t index) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Fisher-Yates shuffle driven by Rng (std::shuffle is not portable).
template <typename Container>
void Shuffle(Container& items, Rng& rng) {
  for (size_t i = items.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(rng.UniformInt(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace dereverb

#endif  // DEREVERB_RNG_H_
