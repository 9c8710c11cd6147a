// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DEREVERB_ENHANCE_H_
#define DEREVERB_ENHANCE_H_

#include "dereverb/audio.h"
#include "dereverb/model.h"
#include "dereverb/stft.h"

namespace dereverb {

inline constexpr double kEnhancePeakLimit = 0.99;

struct EnhanceResult {
  AudioBuffer audio;        // input rate and length
  double raw_peak = 0.0;    // max |x| before the peak check
  bool rescaled = false;    // true when raw_peak exceeded 1
};

// Log-magnitude in, normalized with `stats`, mapped by the model, mapped
// back, and resynthesized with the input phase refined by `griffin_lim`
// iterations. Input at another rate is resampled to 16 kHz and the output
// resampled back, keeping the sample count. Output above full scale is
// scaled to kEnhancePeakLimit and flagged. Throws DataError on an empty
// input and DimensionError when stats and model disagree on bins.
template <typename T>
EnhanceResult Enhance(const DereverbModel<T>& model, const NormStats& stats,
                      const AudioBuffer& input, int griffin_lim = 0,
                      const StftConfig& stft = {});

}  // namespace dereverb

#endif  // DEREVERB_ENHANCE_H_
