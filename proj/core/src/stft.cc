// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dereverb/stft.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dereverb/error.h"
#include "dereverb/fft.h"

namespace dereverb {

int64_t StftConfig::FramesFor(int64_t num_samples) const {
  return 1 + (num_samples + hop - 1) / hop;
}

void StftConfig::Validate() const {
  if (window < 2 || hop < 1 || fft_size < window || sample_rate < 1) {
    throw ContractError("invalid STFT config: window " +
                        std::to_string(window) + ", hop " +
                        std::to_string(hop) + ", fft " +
                        std::to_string(fft_size));
  }
  // Two frames must cover every sample for the synthesis normalization to
  // be well conditioned.
  if (2 * hop > window) {
    throw ContractError("invalid STFT config: hop " + std::to_string(hop) +
                        " exceeds half the window " + std::to_string(window));
  }
}

template <typename Real>
std::vector<Real> PeriodicHann(int n) {
  std::vector<Real> w(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double s = std::sin(std::numbers::pi * i / n);
    w[static_cast<size_t>(i)] = static_cast<Real>(s * s);
  }
  return w;
}

template <typename Real>
Spectrogram<Real> Stft(std::span<const Real> x, int sample_rate,
                       const StftConfig& cfg) {
  cfg.Validate();
  if (sample_rate != cfg.sample_rate) {
    throw DataError("stft: audio is at " + std::to_string(sample_rate) +
                    " Hz but the analysis expects " +
                    std::to_string(cfg.sample_rate) +
                    " Hz; resample the input first");
  }
  Spectrogram<Real> spec;
  spec.config = cfg;
  spec.num_samples = static_cast<int64_t>(x.size());
  spec.frames = cfg.FramesFor(spec.num_samples);
  const int64_t bins = cfg.bins();
  spec.coeffs.assign(static_cast<size_t>(spec.frames * bins), {});

  const auto window = PeriodicHann<Real>(cfg.window);
  const auto& fft = GetRealFft<Real>(cfg.fft_size);
  const int64_t offset = cfg.window / 2;  // front padding
  std::vector<Real> frame(static_cast<size_t>(cfg.fft_size));
  for (int64_t t = 0; t < spec.frames; ++t) {
    std::fill(frame.begin(), frame.end(), Real(0));
    const int64_t start = t * cfg.hop - offset;
    for (int64_t i = 0; i < cfg.window; ++i) {
      const int64_t n = start + i;
      if (n >= 0 && n < spec.num_samples) {
        frame[static_cast<size_t>(i)] = x[static_cast<size_t>(n)] *
                                        window[static_cast<size_t>(i)];
      }
    }
    fft.Forward(frame, std::span(spec.coeffs).subspan(
                           static_cast<size_t>(t * bins),
                           static_cast<size_t>(bins)));
  }
  return spec;
}

template <typename Real>
std::vector<Real> Istft(const Spectrogram<Real>& spec) {
  const StftConfig& cfg = spec.config;
  cfg.Validate();
  const int64_t bins = cfg.bins();
  if (spec.frames != cfg.FramesFor(spec.num_samples) ||
      static_cast<int64_t>(spec.coeffs.size()) != spec.frames * bins) {
    throw ContractError("istft: spectrogram of " + std::to_string(spec.frames) +
                        " frames x " +
                        std::to_string(spec.coeffs.size() /
                                       std::max<int64_t>(bins, 1)) +
                        " is inconsistent with " +
                        std::to_string(spec.num_samples) + " samples");
  }
  const auto window = PeriodicHann<Real>(cfg.window);
  const auto& fft = GetRealFft<Real>(cfg.fft_size);
  const int64_t offset = cfg.window / 2;
  std::vector<double> acc(static_cast<size_t>(spec.num_samples), 0.0);
  std::vector<double> norm(static_cast<size_t>(spec.num_samples), 0.0);
  std::vector<Real> frame(static_cast<size_t>(cfg.fft_size));
  for (int64_t t = 0; t < spec.frames; ++t) {
    fft.Inverse(std::span(spec.coeffs).subspan(static_cast<size_t>(t * bins),
                                               static_cast<size_t>(bins)),
                frame);
    const int64_t start = t * cfg.hop - offset;
    for (int64_t i = 0; i < cfg.window; ++i) {
      const int64_t n = start + i;
      if (n < 0 || n >= spec.num_samples) continue;
      const double w = window[static_cast<size_t>(i)];
      acc[static_cast<size_t>(n)] += w * frame[static_cast<size_t>(i)];
      norm[static_cast<size_t>(n)] += w * w;
    }
  }
  std::vector<Real> y(static_cast<size_t>(spec.num_samples));
  for (size_t n = 0; n < y.size(); ++n) {
    y[n] = static_cast<Real>(acc[n] / norm[n]);
  }
  return y;
}

std::vector<double> LogMagnitude(const Spectrogram<double>& spec) {
  std::vector<double> out(spec.coeffs.size());
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = std::log(std::max(std::abs(spec.coeffs[i]), kLogMagnitudeFloor));
  }
  return out;
}

std::vector<double> Phase(const Spectrogram<double>& spec) {
  std::vector<double> out(spec.coeffs.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::arg(spec.coeffs[i]);
  return out;
}

namespace {

Spectrogram<double> Combine(std::span<const double> logmag,
                            const Spectrogram<double>& phase_source,
                            const char* what) {
  if (logmag.size() != phase_source.coeffs.size()) {
    throw DimensionError(
        std::string(what) + ": predicted log-magnitude has " +
        std::to_string(logmag.size()) + " values, phase source " +
        std::to_string(phase_source.frames) + " x " +
        std::to_string(phase_source.bins()));
  }
  Spectrogram<double> spec = phase_source;
  for (size_t i = 0; i < logmag.size(); ++i) {
    spec.coeffs[i] = std::polar(std::exp(logmag[i]),
                                std::arg(phase_source.coeffs[i]));
  }
  return spec;
}

// Norm over the full two-sided spectrum: bins strictly between DC and
// Nyquist stand for a conjugate pair and count twice. This is the norm in
// which Istft is the least-squares inverse.
double ConsistencyError(const Spectrogram<double>& spec,
                        std::span<const double> magnitude) {
  const int64_t bins = spec.bins();
  const bool has_nyquist = spec.config.fft_size % 2 == 0;
  double sum = 0.0;
  for (size_t i = 0; i < magnitude.size(); ++i) {
    const int64_t k = static_cast<int64_t>(i) % bins;
    const bool single = k == 0 || (has_nyquist && k == bins - 1);
    const double d = std::abs(spec.coeffs[i]) - magnitude[i];
    sum += (single ? 1.0 : 2.0) * d * d;
  }
  return std::sqrt(sum);
}

}  // namespace

std::vector<double> Reconstruct(std::span<const double> logmag,
                                const Spectrogram<double>& phase_source) {
  return Istft(Combine(logmag, phase_source, "reconstruct"));
}

std::vector<double> GriffinLim(std::span<const double> logmag,
                               const Spectrogram<double>& phase_source,
                               int iterations,
                               std::vector<double>* consistency) {
  if (iterations < 0) {
    throw ContractError("griffin_lim: iterations must be >= 0");
  }
  Spectrogram<double> spec = Combine(logmag, phase_source, "griffin_lim");
  std::vector<double> magnitude(logmag.size());
  for (size_t i = 0; i < logmag.size(); ++i) magnitude[i] = std::exp(logmag[i]);
  const int rate = phase_source.config.sample_rate;

  std::vector<double> x = Istft(spec);
  if (consistency != nullptr) {
    consistency->clear();
    consistency->push_back(
        ConsistencyError(Stft<double>(x, rate, spec.config), magnitude));
  }
  for (int it = 0; it < iterations; ++it) {
    const Spectrogram<double> analysed = Stft<double>(x, rate, spec.config);
    for (size_t i = 0; i < magnitude.size(); ++i) {
      const double mag = std::abs(analysed.coeffs[i]);
      // Keep the previous phase where the analysed bin is exactly zero.
      spec.coeffs[i] = mag > 0.0
                           ? analysed.coeffs[i] * (magnitude[i] / mag)
                           : std::polar(magnitude[i], std::arg(spec.coeffs[i]));
    }
    x = Istft(spec);
    if (consistency != nullptr) {
      consistency->push_back(
          ConsistencyError(Stft<double>(x, rate, spec.config), magnitude));
    }
  }
  return x;
}

template std::vector<float> PeriodicHann<float>(int);
template std::vector<double> PeriodicHann<double>(int);
template Spectrogram<float> Stft<float>(std::span<const float>, int,
                                        const StftConfig&);
template Spectrogram<double> Stft<double>(std::span<const double>, int,
                                          const StftConfig&);
template std::vector<float> Istft<float>(const Spectrogram<float>&);
template std::vector<double> Istft<double>(const Spectrogram<double>&);

}  // namespace dereverb
