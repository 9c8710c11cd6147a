// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DEREVERB_AUDIO_H_
#define DEREVERB_AUDIO_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace dereverb {

struct AudioBuffer {
  std::vector<double> samples;  // mono, nominally in [-1, 1]
  int sample_rate = 0;

  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate
                           : 0.0;
  }
};

enum class WavFormat { kPcm16, kFloat32 };

// Reads mono PCM16 or IEEE float32 RIFF/WAVE files, including the
// WAVE_FORMAT_EXTENSIBLE variants. Throws DataError naming the offending
// chunk on malformed input.
AudioBuffer ReadWav(const std::filesystem::path& path);
AudioBuffer ParseWav(std::span<const uint8_t> bytes);

// Returns the number of samples clipped to [-1, 1] (always 0 for float32).
int64_t WriteWav(const std::filesystem::path& path, const AudioBuffer& audio,
                 WavFormat format = WavFormat::kPcm16);
std::vector<uint8_t> SerializeWav(const AudioBuffer& audio, WavFormat format,
                                  int64_t* clipped = nullptr);

// Band-limited resampling with a Kaiser-windowed sinc kernel, evaluated
// directly at each output instant. The cutoff sits at 0.95 of the lower
// Nyquist frequency. Output length is round(n * to / from).
std::vector<double> Resample(std::span<const double> x, int from_rate,
                             int to_rate);
AudioBuffer Resample(const AudioBuffer& audio, int to_rate);

// Scales so that max |x| == peak; silent input is returned unchanged.
void PeakNormalize(std::vector<double>& x, double peak);

}  // namespace dereverb

#endif  // DEREVERB_AUDIO_H_
