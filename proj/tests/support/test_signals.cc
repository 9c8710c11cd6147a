// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "support/test_signals.h"

#include <algorithm>
#include <array>
#include <cmath>

#include "dereverb/ops.h"

namespace dereverb::testing {

template <typename T>
Tensor<T> WeightedSum(Tape<T>& tape, const Tensor<T>& y,
                      const Tensor<T>& weights) {
  return ops::Sum(tape, ops::Hadamard(tape, y, weights));
}

template Tensor<float> WeightedSum(Tape<float>&, const Tensor<float>&,
                                   const Tensor<float>&);
template Tensor<double> WeightedSum(Tape<double>&, const Tensor<double>&,
                                    const Tensor<double>&);

namespace {

constexpr double kPi = 3.14159265358979323846;

// Two-pole resonator at `freq` with bandwidth `bw`.
struct Resonator {
  double y1 = 0, y2 = 0;
  double Process(double x, double freq, double bw, double fs) {
    const double r = std::exp(-kPi * bw / fs);
    const double a1 = 2 * r * std::cos(2 * kPi * freq / fs);
    const double a2 = -r * r;
    const double y = (1 - r) * x + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

}  // namespace

std::vector<double> SpeechLike(double seconds, uint64_t seed,
                               int sample_rate) {
  Rng rng(seed);
  const double fs = sample_rate;
  const size_t n = static_cast<size_t>(seconds * fs);
  std::vector<double> out(n, 0.0);
  Resonator f1, f2, f3, fric;

  // Syllable plan: alternating voiced nuclei and gaps.
  double t_next = 0.05;
  std::vector<std::array<double, 6>> syllables;  // start, dur, f0, F1, F2, F3
  while (t_next < seconds - 0.1) {
    const double dur = rng.Uniform(0.12, 0.24);
    syllables.push_back({t_next, dur, rng.Uniform(95, 150),
                         rng.Uniform(300, 800), rng.Uniform(900, 2200),
                         rng.Uniform(2300, 3200)});
    t_next += dur + rng.Uniform(0.04, 0.14);
  }

  double phase = 0;
  size_t si = 0;
  for (size_t i = 0; i < n; ++i) {
    const double t = i / fs;
    while (si < syllables.size() && t > syllables[si][0] + syllables[si][1]) ++si;
    double env = 0, f0 = 120, F1 = 500, F2 = 1500, F3 = 2500;
    if (si < syllables.size() && t >= syllables[si][0]) {
      const auto& s = syllables[si];
      const double u = (t - s[0]) / s[1];
      env = std::sin(kPi * u);
      env *= env;
      f0 = s[2] * (1.0 + 0.08 * std::sin(2 * kPi * 3.0 * t));
      F1 = s[3] * (1.0 + 0.2 * (u - 0.5));
      F2 = s[4] * (1.0 - 0.15 * (u - 0.5));
      F3 = s[5];
    }
    phase += f0 / fs;
    double pulse = 0;
    if (phase >= 1.0) {
      phase -= 1.0;
      pulse = 1.0;
    }
    const double excitation = pulse + 0.02 * rng.Normal();
    double v = f1.Process(excitation, F1, 80, fs) * 1.0 +
               f2.Process(excitation, F2, 120, fs) * 0.6 +
               f3.Process(excitation, F3, 180, fs) * 0.3;
    // Fricative noise at syllable onsets.
    double fr = 0;
    if (si < syllables.size()) {
      const double onset = syllables[si][0];
      if (t > onset - 0.04 && t < onset) {
        fr = fric.Process(rng.Normal(), 4500, 2000, fs) * 0.5;
      }
    }
    out[i] = env * v + fr;
  }
  double peak = 0;
  for (double v : out) peak = std::max(peak, std::abs(v));
  if (peak > 0) {
    for (double& v : out) v *= 0.5 / peak;
  }
  return out;
}

std::vector<double> WhiteNoise(size_t n, uint64_t seed, double rms) {
  Rng rng(seed);
  std::vector<double> out(n);
  for (double& v : out) v = rms * rng.Normal();
  return out;
}

double SnrDb(const std::vector<double>& reference,
             const std::vector<double>& estimate, size_t begin, size_t end) {
  double num = 0, den = 0;
  for (size_t i = begin; i < end; ++i) {
    num += reference[i] * reference[i];
    const double e = reference[i] - estimate[i];
    den += e * e;
  }
  if (den == 0) return 400.0;
  return 10.0 * std::log10(num / den);
}

}  // namespace dereverb::testing
