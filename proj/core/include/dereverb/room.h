// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DEREVERB_ROOM_H_
#define DEREVERB_ROOM_H_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dereverb/audio.h"
#include "dereverb/rng.h"

namespace dereverb {

using Vec3 = std::array<double, 3>;

inline constexpr double kSpeedOfSound = 343.0;
inline constexpr int kFractionalDelayTaps = 81;
inline constexpr std::array<double, 6> kT60BandCenters = {400,  500, 630,
                                                          800, 1000, 1250};

// Shoebox room with uniform wall reflection. Either `beta` or `target_t60`
// must be set; when both are, beta wins and target_t60 only sets the length.
struct RoomSpec {
  Vec3 dims{};    // Lx, Ly, Lz in metres
  Vec3 source{};
  Vec3 mic{};
  std::optional<double> beta;
  std::optional<double> target_t60;
  double speed_of_sound = kSpeedOfSound;
  int sample_rate = 16000;
  int64_t length = 0;  // samples; 0 selects max(1.3 T60, 0.1 s)

  // Throws DataError when positions are outside the room or closer than
  // 0.1 m to a wall, when source == mic, or when absorption is infeasible.
  void Validate() const;
  double volume() const { return dims[0] * dims[1] * dims[2]; }
  double surface() const {
    return 2 * (dims[0] * dims[1] + dims[0] * dims[2] + dims[1] * dims[2]);
  }
  double ReflectionCoefficient() const;
  // Target if set, otherwise the Sabine time implied by beta.
  double NominalT60() const;
  int64_t LengthSamples() const;
};

struct T60Estimate {
  std::array<double, 6> centers = kT60BandCenters;
  std::array<double, 6> bands{};
  double fullband = 0.0;  // mean of the six bands
};

struct RoomImpulseResponse {
  std::vector<double> samples;
  int sample_rate = 16000;
  std::optional<RoomSpec> room;  // empty for measured (external) responses
  std::optional<T60Estimate> t60;
};

// Sabine: alpha = 0.161 V / (S T60), beta = sqrt(1 - alpha). Throws
// DataError when alpha >= 1 (target unreachable in this room).
double SabineBeta(const Vec3& dims, double t60);

// Image-source method: every image (n, p) with arrival inside the response
// contributes beta^reflections / (4 pi d) through an 81-tap Hann-windowed
// sinc fractional delay. Deterministic for a given spec.
RoomImpulseResponse ImageSourceRir(const RoomSpec& spec);

// (distance, reflections) for every image whose arrival lies within the
// response, sorted by distance.
struct ImagePath {
  double distance;
  int reflections;
};
std::vector<ImagePath> EnumerateImages(const RoomSpec& spec);

// Ranges for random room draws.
struct RoomSampling {
  Vec3 min_dims = {3.0, 3.0, 2.5};
  Vec3 max_dims = {10.0, 8.0, 4.0};
  double wall_margin = 0.5;
  double min_separation = 0.75;
};

// One room draw for a target T60 (beta from Sabine). Throws DataError when
// the draw is infeasible; callers retry.
RoomSpec SampleRoom(Rng& rng, double target_t60,
                    const RoomSampling& ranges = {}, int sample_rate = 16000);

// Full linear convolution via FFT, length len(x) + len(h) - 1.
std::vector<double> LinearConvolve(std::span<const double> x,
                                   std::span<const double> h);

// Reverberant rendering: convolve, keep the first len(x) samples, scale the
// peak to 0.9. Throws DataError on a sample-rate mismatch.
AudioBuffer FftConvolve(const AudioBuffer& audio,
                        const RoomImpulseResponse& rir);

// Schroeder energy decay curve in dB, EDC(0) = 0. Samples after the last
// nonzero value are -inf. Throws DataError for an all-zero response.
std::vector<double> SchroederEdc(std::span<const double> h);

// Least-squares slope of the EDC between -5 and -35 dB, T60 = -60 / slope.
// Throws DataError when the EDC does not reach -35 dB.
double T60FromEdc(std::span<const double> edc_db, int sample_rate);

// Per centre: zero-phase third-octave band-pass by frequency-domain masking
// with edges at fc 2^{+-1/6}, then T60FromEdc; fullband is the mean.
// Each edge is a half-sine transition of width edge_taper x bandwidth centred
// on the nominal edge; edge_taper = 0 is an ideal brick wall, whose 1/t
// ringing puts a floor under the decay curve. Requires >= 0.1 s.
inline constexpr double kBandEdgeTaper = 0.2;
T60Estimate EstimateT60(std::span<const double> h, int sample_rate,
                        double edge_taper = kBandEdgeTaper);

}  // namespace dereverb

#endif  // DEREVERB_ROOM_H_
