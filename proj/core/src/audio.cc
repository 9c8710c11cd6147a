// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dereverb/audio.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>

#include "dereverb/error.h"

namespace dereverb {
namespace {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;
constexpr uint16_t kFormatExtensible = 0xFFFE;

static_assert(std::endian::native == std::endian::little,
              "WAV I/O assumes a little-endian host");

uint16_t U16(std::span<const uint8_t> b, size_t at) {
  uint16_t v;
  std::memcpy(&v, b.data() + at, 2);
  return v;
}

uint32_t U32(std::span<const uint8_t> b, size_t at) {
  uint32_t v;
  std::memcpy(&v, b.data() + at, 4);
  return v;
}

void Put(std::vector<uint8_t>& out, const void* p, size_t n) {
  const auto* c = static_cast<const uint8_t*>(p);
  out.insert(out.end(), c, c + n);
}

void PutU16(std::vector<uint8_t>& out, uint16_t v) { Put(out, &v, 2); }
void PutU32(std::vector<uint8_t>& out, uint32_t v) { Put(out, &v, 4); }

struct FmtChunk {
  uint16_t format = 0;
  uint16_t channels = 0;
  uint32_t rate = 0;
  uint16_t bits = 0;
};

FmtChunk ParseFmt(std::span<const uint8_t> c) {
  if (c.size() < 16) {
    throw DataError("wav: 'fmt ' chunk is " + std::to_string(c.size()) +
                    " bytes, need at least 16");
  }
  FmtChunk f;
  f.format = U16(c, 0);
  f.channels = U16(c, 2);
  f.rate = U32(c, 4);
  f.bits = U16(c, 14);
  if (f.format == kFormatExtensible) {
    if (c.size() < 40) {
      throw DataError("wav: extensible 'fmt ' chunk is " +
                      std::to_string(c.size()) + " bytes, need 40");
    }
    // The first two bytes of the sub-format GUID carry the format tag.
    f.format = U16(c, 24);
  }
  if (f.format != kFormatPcm && f.format != kFormatFloat) {
    throw DataError("wav: 'fmt ' chunk has unsupported format tag " +
                    std::to_string(f.format));
  }
  if (f.channels != 1) {
    throw DataError("wav: 'fmt ' chunk declares " +
                    std::to_string(f.channels) +
                    " channels; only mono is supported");
  }
  if (f.rate == 0) throw DataError("wav: 'fmt ' chunk has a zero sample rate");
  if (!((f.format == kFormatPcm && f.bits == 16) ||
        (f.format == kFormatFloat && f.bits == 32))) {
    throw DataError("wav: 'fmt ' chunk declares " + std::to_string(f.bits) +
                    "-bit samples for format tag " + std::to_string(f.format) +
                    "; supported are 16-bit PCM and 32-bit float");
  }
  return f;
}

double Bessel0(double x) {
  // Power series; converges quickly for the beta values used here.
  double sum = 1.0, term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 64; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

}  // namespace

AudioBuffer ParseWav(std::span<const uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0) {
    throw DataError("wav: missing 'RIFF' chunk header");
  }
  if (std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw DataError("wav: 'RIFF' chunk is not of form 'WAVE'");
  }
  std::optional<FmtChunk> fmt;
  std::optional<std::span<const uint8_t>> data;
  size_t at = 12;
  while (at + 8 <= bytes.size()) {
    const std::string id(reinterpret_cast<const char*>(bytes.data() + at), 4);
    const uint32_t size = U32(bytes, at + 4);
    const size_t body = at + 8;
    if (size > bytes.size() - body) {
      throw DataError("wav: '" + id + "' chunk declares " +
                      std::to_string(size) + " bytes but only " +
                      std::to_string(bytes.size() - body) + " remain");
    }
    const auto chunk = bytes.subspan(body, size);
    if (id == "fmt ") {
      fmt = ParseFmt(chunk);
    } else if (id == "data") {
      if (!fmt) throw DataError("wav: 'data' chunk precedes the 'fmt ' chunk");
      data = chunk;
    }
    at = body + size + (size & 1u);  // chunks are word aligned
  }
  if (!fmt) throw DataError("wav: no 'fmt ' chunk");
  if (!data) throw DataError("wav: no 'data' chunk");

  const size_t width = fmt->bits / 8;
  if (data->size() % width != 0) {
    throw DataError("wav: 'data' chunk size " + std::to_string(data->size()) +
                    " is not a multiple of the " + std::to_string(width) +
                    "-byte sample size");
  }
  AudioBuffer audio;
  audio.sample_rate = static_cast<int>(fmt->rate);
  const size_t n = data->size() / width;
  audio.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    if (fmt->format == kFormatPcm) {
      int16_t s;
      std::memcpy(&s, data->data() + 2 * i, 2);
      audio.samples[i] = s / 32768.0;
    } else {
      float s;
      std::memcpy(&s, data->data() + 4 * i, 4);
      audio.samples[i] = s;
    }
  }
  return audio;
}

AudioBuffer ReadWav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  try {
    return ParseWav(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<uint8_t> SerializeWav(const AudioBuffer& audio, WavFormat format,
                                  int64_t* clipped) {
  if (audio.sample_rate <= 0) {
    throw ContractError("wav: sample rate must be positive");
  }
  const bool pcm = format == WavFormat::kPcm16;
  const uint16_t bits = pcm ? 16 : 32;
  const uint32_t data_bytes =
      static_cast<uint32_t>(audio.samples.size() * (bits / 8));
  int64_t clip_count = 0;

  std::vector<uint8_t> out;
  out.reserve(44 + data_bytes);
  Put(out, "RIFF", 4);
  PutU32(out, 36 + data_bytes);
  Put(out, "WAVE", 4);
  Put(out, "fmt ", 4);
  PutU32(out, 16);
  PutU16(out, pcm ? kFormatPcm : kFormatFloat);
  PutU16(out, 1);
  PutU32(out, static_cast<uint32_t>(audio.sample_rate));
  PutU32(out, static_cast<uint32_t>(audio.sample_rate) * (bits / 8));
  PutU16(out, bits / 8);
  PutU16(out, bits);
  Put(out, "data", 4);
  PutU32(out, data_bytes);
  for (double v : audio.samples) {
    if (pcm) {
      if (v > 1.0 || v < -1.0 || std::isnan(v)) ++clip_count;
      const double c = std::isnan(v) ? 0.0 : std::clamp(v, -1.0, 1.0);
      const auto s = static_cast<int16_t>(
          std::clamp(std::lround(c * 32768.0), -32768L, 32767L));
      Put(out, &s, 2);
    } else {
      const auto s = static_cast<float>(v);
      Put(out, &s, 4);
    }
  }
  if (clipped != nullptr) *clipped = clip_count;
  return out;
}

int64_t WriteWav(const std::filesystem::path& path, const AudioBuffer& audio,
                 WavFormat format) {
  int64_t clipped = 0;
  const auto bytes = SerializeWav(audio, format, &clipped);
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to " + path.string());
  return clipped;
}

std::vector<double> Resample(std::span<const double> x, int from_rate,
                             int to_rate) {
  if (from_rate <= 0 || to_rate <= 0) {
    throw ContractError("resample: rates must be positive");
  }
  if (from_rate == to_rate) return {x.begin(), x.end()};
  const int g = std::gcd(from_rate, to_rate);
  const int64_t up = to_rate / g;
  const int64_t down = from_rate / g;
  const auto n_out = static_cast<int64_t>(std::llround(
      static_cast<double>(x.size()) * to_rate / from_rate));

  // Cutoff relative to the input rate, in cycles per input sample.
  const double cutoff = 0.5 * 0.95 * std::min(1.0, static_cast<double>(up) /
                                                       static_cast<double>(down));
  const int half_zeros = 32;
  const double half_width = half_zeros / (2.0 * cutoff);  // input samples
  const double beta = 9.0;
  const double norm = Bessel0(beta);

  // Output m sits at input position q + r / up with q = floor(m down / up),
  // r = m down mod up, so the kernel taps depend only on the phase r.
  struct Phase {
    int64_t first = 0;  // tap offset relative to q
    std::vector<double> taps;
  };
  std::vector<Phase> phases(static_cast<size_t>(up));
  for (int64_t r = 0; r < up; ++r) {
    const double frac = static_cast<double>(r) / static_cast<double>(up);
    Phase& ph = phases[static_cast<size_t>(r)];
    ph.first = static_cast<int64_t>(std::ceil(frac - half_width));
    const auto last = static_cast<int64_t>(std::floor(frac + half_width));
    for (int64_t j = ph.first; j <= last; ++j) {
      const double d = static_cast<double>(j) - frac;
      const double u = d / half_width;
      const double w = Bessel0(beta * std::sqrt(std::max(0.0, 1.0 - u * u))) /
                       norm;
      const double arg = 2.0 * cutoff * d;
      const double sinc =
          arg == 0.0 ? 1.0 : std::sin(std::numbers::pi * arg) /
                                 (std::numbers::pi * arg);
      ph.taps.push_back(2.0 * cutoff * sinc * w);
    }
  }

  std::vector<double> y(static_cast<size_t>(n_out), 0.0);
  const auto n_in = static_cast<int64_t>(x.size());
  for (int64_t m = 0; m < n_out; ++m) {
    const int64_t q = m * down / up;
    const Phase& ph = phases[static_cast<size_t>(m * down % up)];
    const int64_t start = q + ph.first;
    const int64_t lo = std::max<int64_t>(0, -start);
    const int64_t hi = std::min<int64_t>(
        static_cast<int64_t>(ph.taps.size()), n_in - start);
    double acc = 0.0;
    for (int64_t t = lo; t < hi; ++t) {
      acc += x[static_cast<size_t>(start + t)] * ph.taps[static_cast<size_t>(t)];
    }
    y[static_cast<size_t>(m)] = acc;
  }
  return y;
}

AudioBuffer Resample(const AudioBuffer& audio, int to_rate) {
  return {Resample(audio.samples, audio.sample_rate, to_rate), to_rate};
}

void PeakNormalize(std::vector<double>& x, double peak) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  if (m == 0.0) return;
  const double g = peak / m;
  for (double& v : x) v *= g;
}

}  // namespace dereverb
