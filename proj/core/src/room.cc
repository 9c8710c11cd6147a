// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dereverb/room.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include "dereverb/error.h"
#include "dereverb/fft.h"

namespace dereverb {
namespace {

constexpr double kMinWallDistance = 0.1;
constexpr double kSabine = 0.161;
constexpr int kHalfTaps = kFractionalDelayTaps / 2;

std::string Fmt(const Vec3& v) {
  return "(" + std::to_string(v[0]) + ", " + std::to_string(v[1]) + ", " +
         std::to_string(v[2]) + ")";
}

double Distance(const Vec3& a, const Vec3& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
}

// Image offsets along one axis: (image coordinate - mic, reflections).
struct AxisImage {
  double delta;
  int reflections;
};

std::vector<AxisImage> AxisImages(double length, double src, double mic,
                                  double max_distance) {
  std::vector<AxisImage> out;
  const auto reach = static_cast<int64_t>(max_distance / (2 * length)) + 2;
  for (int p = 0; p <= 1; ++p) {
    for (int64_t n = -reach; n <= reach; ++n) {
      const double pos = (1 - 2 * p) * src + 2.0 * static_cast<double>(n) *
                                                 length;
      const double delta = pos - mic;
      if (std::abs(delta) > max_distance) continue;
      out.push_back({delta, static_cast<int>(std::abs(n - p) + std::abs(n))});
    }
  }
  return out;
}

// Walks every image within max_distance of the mic in a fixed order.
template <typename Visit>
void ForEachImage(const RoomSpec& spec, double max_distance, Visit&& visit) {
  const auto xs = AxisImages(spec.dims[0], spec.source[0], spec.mic[0],
                             max_distance);
  const auto ys = AxisImages(spec.dims[1], spec.source[1], spec.mic[1],
                             max_distance);
  const auto zs = AxisImages(spec.dims[2], spec.source[2], spec.mic[2],
                             max_distance);
  const double budget = max_distance * max_distance;
  for (const auto& x : xs) {
    const double rx = budget - x.delta * x.delta;
    if (rx < 0) continue;
    for (const auto& y : ys) {
      const double ry = rx - y.delta * y.delta;
      if (ry < 0) continue;
      for (const auto& z : zs) {
        if (z.delta * z.delta > ry) continue;
        const double d = std::sqrt(x.delta * x.delta + y.delta * y.delta +
                                   z.delta * z.delta);
        visit(d, x.reflections + y.reflections + z.reflections);
      }
    }
  }
}

double MaxImageDistance(const RoomSpec& spec) {
  return (static_cast<double>(spec.LengthSamples()) + kHalfTaps) /
         spec.sample_rate * spec.speed_of_sound;
}

}  // namespace

void RoomSpec::Validate() const {
  for (int a = 0; a < 3; ++a) {
    if (!(dims[a] > 2 * kMinWallDistance) || !std::isfinite(dims[a])) {
      throw DataError("room: invalid dimensions " + Fmt(dims));
    }
  }
  for (const auto* pos : {&source, &mic}) {
    for (int a = 0; a < 3; ++a) {
      if (!((*pos)[a] >= kMinWallDistance &&
            (*pos)[a] <= dims[a] - kMinWallDistance)) {
        throw DataError("room: position " + Fmt(*pos) +
                        " is outside the room " + Fmt(dims) +
                        " or within 0.1 m of a wall");
      }
    }
  }
  if (Distance(source, mic) < 1e-6) {
    throw DataError("room: source and microphone coincide at " + Fmt(mic));
  }
  if (sample_rate <= 0 || !(speed_of_sound > 0) || length < 0) {
    throw DataError("room: invalid rate, speed of sound or length");
  }
  if (beta) {
    if (!(*beta >= 0.0 && *beta < 1.0)) {
      throw DataError("room: reflection coefficient " + std::to_string(*beta) +
                      " outside [0, 1)");
    }
  } else if (!target_t60) {
    throw DataError("room: neither beta nor target T60 given");
  }
  if (target_t60 && !(*target_t60 > 0.0)) {
    throw DataError("room: target T60 must be positive");
  }
  ReflectionCoefficient();  // surfaces Sabine infeasibility
}

double RoomSpec::ReflectionCoefficient() const {
  if (beta) return *beta;
  if (!target_t60) throw DataError("room: neither beta nor target T60 given");
  return SabineBeta(dims, *target_t60);
}

double RoomSpec::NominalT60() const {
  if (target_t60) return *target_t60;
  const double b = ReflectionCoefficient();
  return kSabine * volume() / (surface() * (1.0 - b * b));
}

int64_t RoomSpec::LengthSamples() const {
  if (length > 0) return length;
  const double seconds = std::max(1.3 * NominalT60(), 0.1);
  return static_cast<int64_t>(std::ceil(seconds * sample_rate));
}

double SabineBeta(const Vec3& dims, double t60) {
  if (!(t60 > 0.0)) throw DataError("sabine: target T60 must be positive");
  const double volume = dims[0] * dims[1] * dims[2];
  const double surface =
      2 * (dims[0] * dims[1] + dims[0] * dims[2] + dims[1] * dims[2]);
  const double alpha = kSabine * volume / (surface * t60);
  if (alpha >= 1.0) {
    throw DataError("sabine: T60 " + std::to_string(t60) + " s is infeasible in a " +
                    Fmt(dims) + " m room (absorption " +
                    std::to_string(alpha) + " >= 1)");
  }
  return std::sqrt(1.0 - alpha);
}

std::vector<ImagePath> EnumerateImages(const RoomSpec& spec) {
  spec.Validate();
  std::vector<ImagePath> out;
  ForEachImage(spec, MaxImageDistance(spec),
               [&](double d, int k) { out.push_back({d, k}); });
  std::sort(out.begin(), out.end(), [](const ImagePath& a, const ImagePath& b) {
    return a.distance != b.distance ? a.distance < b.distance
                                    : a.reflections < b.reflections;
  });
  return out;
}

RoomImpulseResponse ImageSourceRir(const RoomSpec& spec) {
  spec.Validate();
  const int64_t len = spec.LengthSamples();
  const double beta = spec.ReflectionCoefficient();
  const double samples_per_metre = spec.sample_rate / spec.speed_of_sound;

  // Window phases cos/sin(2 pi m / 81) for the integer part of each tap.
  std::array<double, kFractionalDelayTaps> wc{}, ws{};
  for (int m = -kHalfTaps; m <= kHalfTaps; ++m) {
    const double a = 2 * std::numbers::pi * m / kFractionalDelayTaps;
    wc[static_cast<size_t>(m + kHalfTaps)] = std::cos(a);
    ws[static_cast<size_t>(m + kHalfTaps)] = std::sin(a);
  }
  std::array<double, kFractionalDelayTaps> sign{};
  for (int m = -kHalfTaps; m <= kHalfTaps; ++m) {
    sign[static_cast<size_t>(m + kHalfTaps)] = (m & 1) ? -1.0 : 1.0;
  }
  std::vector<double> beta_pow(1, 1.0);

  std::vector<double> h(static_cast<size_t>(len), 0.0);
  ForEachImage(spec, MaxImageDistance(spec), [&](double d, int k) {
    while (static_cast<int>(beta_pow.size()) <= k) {
      beta_pow.push_back(beta_pow.back() * beta);
    }
    const double amp = beta_pow[static_cast<size_t>(k)] /
                       (4 * std::numbers::pi * d);
    if (amp == 0.0) return;
    const double tau = d * samples_per_metre;
    const auto centre = static_cast<int64_t>(std::llround(tau));
    const double frac = static_cast<double>(centre) - tau;  // in [-0.5, 0.5]
    const double sin_frac = std::sin(std::numbers::pi * frac);
    const double b = 2 * std::numbers::pi * frac / kFractionalDelayTaps;
    const double cb = std::cos(b), sb = std::sin(b);
    // Tap m sits at u = m + frac = j - tau; sin(pi u) = (-1)^m sin(pi frac).
    std::array<double, kFractionalDelayTaps> kernel;
    for (size_t i = 0; i < kernel.size(); ++i) {
      const double u = static_cast<double>(static_cast<int>(i) - kHalfTaps) +
                       frac;
      const double window = 0.5 * (1.0 + (wc[i] * cb - ws[i] * sb));
      kernel[i] = amp * sign[i] * sin_frac * window / (std::numbers::pi * u);
    }
    if (frac == 0.0) kernel[kHalfTaps] = amp;  // u = 0: sinc(0) = 1
    const int64_t first = centre - kHalfTaps;
    const int64_t lo = std::max<int64_t>(0, -first);
    const int64_t hi =
        std::min<int64_t>(kFractionalDelayTaps, len - first);
    double* out = h.data() + first;
    for (int64_t i = lo; i < hi; ++i) out[i] += kernel[static_cast<size_t>(i)];
  });
  RoomImpulseResponse rir;
  rir.samples = std::move(h);
  rir.sample_rate = spec.sample_rate;
  rir.room = spec;
  return rir;
}

RoomSpec SampleRoom(Rng& rng, double target_t60, const RoomSampling& ranges,
                    int sample_rate) {
  RoomSpec spec;
  for (int a = 0; a < 3; ++a) {
    spec.dims[a] = rng.Uniform(ranges.min_dims[a], ranges.max_dims[a]);
  }
  for (auto* pos : {&spec.source, &spec.mic}) {
    for (int a = 0; a < 3; ++a) {
      (*pos)[a] = rng.Uniform(ranges.wall_margin,
                              spec.dims[a] - ranges.wall_margin);
    }
  }
  spec.target_t60 = target_t60;
  spec.sample_rate = sample_rate;
  if (Distance(spec.source, spec.mic) < ranges.min_separation) {
    throw DataError("room draw: source-microphone distance below " +
                    std::to_string(ranges.min_separation) + " m");
  }
  spec.beta = SabineBeta(spec.dims, target_t60);
  spec.Validate();
  return spec;
}

std::vector<double> LinearConvolve(std::span<const double> x,
                                   std::span<const double> h) {
  if (x.empty() || h.empty()) return {};
  const size_t out_len = x.size() + h.size() - 1;
  const auto n = static_cast<size_t>(
      NextPowerOfTwo(static_cast<int64_t>(out_len)));
  const auto& fft = GetRealFft<double>(static_cast<int64_t>(n));
  std::vector<double> a(n, 0.0), b(n, 0.0);
  std::copy(x.begin(), x.end(), a.begin());
  std::copy(h.begin(), h.end(), b.begin());
  std::vector<std::complex<double>> fa(n / 2 + 1), fb(n / 2 + 1);
  fft.Forward(a, fa);
  fft.Forward(b, fb);
  for (size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  fft.Inverse(fa, a);
  a.resize(out_len);
  return a;
}

AudioBuffer FftConvolve(const AudioBuffer& audio,
                        const RoomImpulseResponse& rir) {
  if (audio.sample_rate != rir.sample_rate) {
    throw DataError("convolve: audio at " + std::to_string(audio.sample_rate) +
                    " Hz, impulse response at " +
                    std::to_string(rir.sample_rate) + " Hz");
  }
  AudioBuffer out;
  out.sample_rate = audio.sample_rate;
  out.samples = LinearConvolve(audio.samples, rir.samples);
  out.samples.resize(audio.samples.size());
  PeakNormalize(out.samples, 0.9);
  return out;
}

std::vector<double> SchroederEdc(std::span<const double> h) {
  std::vector<long double> tail(h.size() + 1, 0.0L);
  for (size_t i = h.size(); i-- > 0;) {
    tail[i] = tail[i + 1] + static_cast<long double>(h[i]) * h[i];
  }
  if (h.empty() || tail[0] == 0.0L) {
    throw DataError("edc: impulse response is all zeros");
  }
  std::vector<double> edc(h.size());
  for (size_t i = 0; i < h.size(); ++i) {
    edc[i] = tail[i] > 0.0L
                 ? static_cast<double>(10.0L * std::log10(tail[i] / tail[0]))
                 : -std::numeric_limits<double>::infinity();
  }
  return edc;
}

double T60FromEdc(std::span<const double> edc_db, int sample_rate) {
  size_t begin = edc_db.size(), end = edc_db.size();
  for (size_t i = 0; i < edc_db.size(); ++i) {
    if (begin == edc_db.size() && edc_db[i] <= -5.0) begin = i;
    if (edc_db[i] <= -35.0) {
      end = i;
      break;
    }
  }
  if (end == edc_db.size() || !std::isfinite(edc_db[end])) {
    throw DataError("t60: decay curve does not reach -35 dB (response too "
                    "short or too little decay)");
  }
  // Least squares over [begin, end], with centred abscissae.
  const double count = static_cast<double>(end - begin + 1);
  const double t_mean = 0.5 * static_cast<double>(begin + end);
  double y_mean = 0.0;
  for (size_t i = begin; i <= end; ++i) y_mean += edc_db[i];
  y_mean /= count;
  double sxy = 0.0, sxx = 0.0;
  for (size_t i = begin; i <= end; ++i) {
    const double dt = static_cast<double>(i) - t_mean;
    sxy += dt * (edc_db[i] - y_mean);
    sxx += dt * dt;
  }
  if (sxx == 0.0) {
    throw DataError("t60: decay from -5 to -35 dB happens within one sample");
  }
  const double slope = sxy / sxx * sample_rate;  // dB per second
  if (!(slope < 0.0)) throw DataError("t60: non-decaying energy curve");
  return -60.0 / slope;
}

T60Estimate EstimateT60(std::span<const double> h, int sample_rate,
                        double edge_taper) {
  if (!(edge_taper >= 0.0 && edge_taper <= 1.0)) {
    throw ContractError("t60: edge taper must lie in [0, 1]");
  }
  if (sample_rate <= 0 ||
      static_cast<double>(h.size()) < 0.1 * sample_rate - 1e-9) {
    throw DataError("t60: need at least 0.1 s of impulse response, got " +
                    std::to_string(h.size()) + " samples");
  }
  const int64_t n = NextPowerOfTwo(2 * static_cast<int64_t>(h.size()));
  const auto& fft = GetRealFft<double>(n);
  std::vector<double> padded(static_cast<size_t>(n), 0.0);
  std::copy(h.begin(), h.end(), padded.begin());
  std::vector<std::complex<double>> spectrum(static_cast<size_t>(n / 2 + 1));
  fft.Forward(padded, spectrum);

  T60Estimate est;
  std::vector<std::complex<double>> band(spectrum.size());
  std::vector<double> filtered(static_cast<size_t>(n));
  const double bin_hz = static_cast<double>(sample_rate) / n;
  for (size_t b = 0; b < kT60BandCenters.size(); ++b) {
    const double lo = kT60BandCenters[b] * std::pow(2.0, -1.0 / 6);
    const double hi = kT60BandCenters[b] * std::pow(2.0, 1.0 / 6);
    const double width = edge_taper * (hi - lo);
    auto edge = [width](double d) {  // d: distance inside the edge, in Hz
      if (d >= 0.5 * width) return 1.0;
      if (d < -0.5 * width || (width == 0.0 && d < 0.0)) return 0.0;
      return 0.5 * (1.0 + std::sin(std::numbers::pi * d / width));
    };
    for (size_t k = 0; k < spectrum.size(); ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      band[k] = spectrum[k] * (edge(f - lo) * edge(hi - f));
    }
    fft.Inverse(band, filtered);
    const auto edc = SchroederEdc(std::span(filtered).first(h.size()));
    est.bands[b] = T60FromEdc(edc, sample_rate);
  }
  double sum = 0.0;
  for (double v : est.bands) sum += v;
  est.fullband = sum / static_cast<double>(est.bands.size());
  return est;
}

}  // namespace dereverb
