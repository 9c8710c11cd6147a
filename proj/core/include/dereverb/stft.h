// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DEREVERB_STFT_H_
#define DEREVERB_STFT_H_

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace dereverb {

inline constexpr int kCanonicalRate = 16000;
inline constexpr double kLogMagnitudeFloor = 1e-8;

// 32 ms periodic-Hann frames with a 16 ms hop at 16 kHz: 257 bins.
struct StftConfig {
  int window = 512;
  int hop = 256;
  int fft_size = 512;
  int sample_rate = kCanonicalRate;

  int bins() const { return fft_size / 2 + 1; }
  // Frame count for a signal of n samples (n >= 0): 1 + ceil(n / hop).
  int64_t FramesFor(int64_t num_samples) const;
  // Throws ContractError on an unusable combination.
  void Validate() const;
  bool operator==(const StftConfig&) const = default;
};

// Row-major [frames x bins] one-sided spectrum. The signal is framed after
// padding window/2 zeros in front and enough zeros at the end to complete
// the last frame, so every input sample is covered by two frames.
template <typename Real>
struct Spectrogram {
  StftConfig config;
  int64_t frames = 0;
  int64_t num_samples = 0;  // length of the analysed signal
  std::vector<std::complex<Real>> coeffs;

  int64_t bins() const { return config.bins(); }
  std::complex<Real>& at(int64_t t, int64_t k) {
    return coeffs[static_cast<size_t>(t * bins() + k)];
  }
  const std::complex<Real>& at(int64_t t, int64_t k) const {
    return coeffs[static_cast<size_t>(t * bins() + k)];
  }
};

template <typename Real>
std::vector<Real> PeriodicHann(int n);

// Throws DataError when sample_rate differs from cfg.sample_rate (the
// message asks the caller to resample).
template <typename Real>
Spectrogram<Real> Stft(std::span<const Real> x, int sample_rate,
                       const StftConfig& cfg = {});

// Weighted overlap-add with the analysis window, normalized per sample by
// the summed squared window; the least-squares inverse of Stft. Returns
// spec.num_samples samples.
template <typename Real>
std::vector<Real> Istft(const Spectrogram<Real>& spec);

// Natural-log magnitude, log(max(|X|, 1e-8)), and phase, both
// [frames x bins].
std::vector<double> LogMagnitude(const Spectrogram<double>& spec);
std::vector<double> Phase(const Spectrogram<double>& spec);

// exp(logmag) * e^{j phase} -> Istft. Phase, frame layout, config and output
// length come from `phase_source` (normally the reverberant input).
std::vector<double> Reconstruct(std::span<const double> logmag,
                                const Spectrogram<double>& phase_source);

// Griffin-Lim refinement starting from the phase of `phase_source`.
// iterations == 0 is Reconstruct. When `consistency` is non-null it receives
// || |Stft(x_n)| - exp(logmag) || for n = 0..iterations, measured over the
// full two-sided spectrum; it is non-increasing in n.
std::vector<double> GriffinLim(std::span<const double> logmag,
                               const Spectrogram<double>& phase_source,
                               int iterations,
                               std::vector<double>* consistency = nullptr);

}  // namespace dereverb

#endif  // DEREVERB_STFT_H_
