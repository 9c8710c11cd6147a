// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dereverb/enhance.h"

#include <algorithm>
#include <cmath>

#include "dereverb/error.h"

namespace dereverb {

template <typename T>
EnhanceResult Enhance(const DereverbModel<T>& model, const NormStats& stats,
                      const AudioBuffer& input, int griffin_lim,
                      const StftConfig& stft) {
  if (input.samples.empty()) throw DataError("enhance: empty input");
  if (stats.bins() != model.config().bins || stft.bins() != stats.bins()) {
    throw DimensionError("enhance: model has " +
                         std::to_string(model.config().bins) +
                         " bins, stats " + std::to_string(stats.bins()) +
                         ", STFT " + std::to_string(stft.bins()));
  }
  const AudioBuffer x = input.sample_rate == stft.sample_rate
                            ? input
                            : Resample(input, stft.sample_rate);
  const auto spec = Stft<double>(x.samples, x.sample_rate, stft);
  auto logmag = LogMagnitude(spec);
  Normalize<double>(logmag, stats, NormDirection::kInput);
  const auto frames = Tensor<T>::FromData(
      {spec.frames, spec.bins()}, std::vector<T>(logmag.begin(), logmag.end()));
  const auto y = model.ForwardUtterance(frames);
  std::vector<double> pred(y.data().begin(), y.data().end());
  Normalize<double>(pred, stats, NormDirection::kInvertTarget);
  auto wave = GriffinLim(pred, spec, griffin_lim);
  if (input.sample_rate != stft.sample_rate) {
    wave = Resample(wave, stft.sample_rate, input.sample_rate);
  }
  wave.resize(input.samples.size(), 0.0);

  EnhanceResult r;
  for (double v : wave) r.raw_peak = std::max(r.raw_peak, std::abs(v));
  if (r.raw_peak > 1.0) {
    PeakNormalize(wave, kEnhancePeakLimit);
    r.rescaled = true;
  }
  r.audio = {std::move(wave), input.sample_rate};
  return r;
}

template EnhanceResult Enhance(const DereverbModel<float>&, const NormStats&,
                               const AudioBuffer&, int, const StftConfig&);
template EnhanceResult Enhance(const DereverbModel<double>&, const NormStats&,
                               const AudioBuffer&, int, const StftConfig&);

}  // namespace dereverb
