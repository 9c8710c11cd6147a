// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dereverb/metrics.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>

#include "dereverb/error.h"
#include "dereverb/fft.h"
#include "dereverb/parallel.h"
#include "dereverb/room.h"

namespace dereverb {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
using Matrix = std::vector<std::vector<double>>;

// Symmetric Hann without its zero end points: hanning(n + 2)[1:-1].
std::vector<double> InnerHann(int n) {
  std::vector<double> w(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    w[static_cast<size_t>(i)] =
        0.5 - 0.5 * std::cos(2 * std::numbers::pi * (i + 1) / (n + 1));
  }
  return w;
}

double Norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Drops frames more than 40 dB below the loudest reference frame, from both
// signals, and overlap-adds what is left.
void RemoveSilentFrames(std::vector<double>& x, std::vector<double>& y) {
  const int n = StoiConfig::kFrame, hop = StoiConfig::kHop;
  const auto w = InnerHann(n);
  std::vector<std::vector<double>> xf, yf;
  std::vector<double> energy;
  for (size_t start = 0; start + n <= x.size(); start += hop) {
    std::vector<double> a(static_cast<size_t>(n)), b(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      a[static_cast<size_t>(i)] = w[static_cast<size_t>(i)] * x[start + i];
      b[static_cast<size_t>(i)] = w[static_cast<size_t>(i)] * y[start + i];
    }
    energy.push_back(20 * std::log10(Norm(a) + kEps));
    xf.push_back(std::move(a));
    yf.push_back(std::move(b));
  }
  if (energy.empty()) {
    throw DataError("stoi: signal shorter than one 256-sample frame");
  }
  const double top = *std::max_element(energy.begin(), energy.end());
  std::vector<size_t> keep;
  for (size_t i = 0; i < energy.size(); ++i) {
    if (top - StoiConfig::kDynRange - energy[i] < 0) keep.push_back(i);
  }
  const size_t len = (keep.size() - 1) * hop + n;
  std::vector<double> xo(len, 0.0), yo(len, 0.0);
  for (size_t j = 0; j < keep.size(); ++j) {
    for (int i = 0; i < n; ++i) {
      xo[j * hop + i] += xf[keep[j]][static_cast<size_t>(i)];
      yo[j * hop + i] += yf[keep[j]][static_cast<size_t>(i)];
    }
  }
  x = std::move(xo);
  y = std::move(yo);
}

// One-third octave band envelopes, [band][frame].
Matrix BandEnvelopes(const std::vector<double>& x) {
  const int n = StoiConfig::kFrame, hop = StoiConfig::kHop;
  const int nfft = StoiConfig::kFft, bins = nfft / 2 + 1;
  // Band limits snapped to the nearest FFT bin.
  std::vector<int> lo(StoiConfig::kBands), hi(StoiConfig::kBands);
  auto nearest = [&](double f) {
    return static_cast<int>(std::llround(f * nfft / StoiConfig::kRate));
  };
  for (int k = 0; k < StoiConfig::kBands; ++k) {
    lo[static_cast<size_t>(k)] = std::clamp(
        nearest(StoiConfig::kMinFreq * std::pow(2.0, (2.0 * k - 1) / 6)), 0,
        bins - 1);
    hi[static_cast<size_t>(k)] = std::clamp(
        nearest(StoiConfig::kMinFreq * std::pow(2.0, (2.0 * k + 1) / 6)), 0,
        bins - 1);
  }
  const auto w = InnerHann(n);
  const auto& fft = GetRealFft<double>(nfft);
  std::vector<double> frame(static_cast<size_t>(nfft));
  std::vector<std::complex<double>> spec(static_cast<size_t>(bins));
  Matrix env(StoiConfig::kBands);
  // Frames start at 0, hop, ... strictly before len - n.
  for (size_t start = 0; start + n < x.size(); start += hop) {
    std::fill(frame.begin(), frame.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      frame[static_cast<size_t>(i)] = w[static_cast<size_t>(i)] * x[start + i];
    }
    fft.Forward(frame, spec);
    for (int k = 0; k < StoiConfig::kBands; ++k) {
      double e = 0.0;
      for (int b = lo[static_cast<size_t>(k)]; b < hi[static_cast<size_t>(k)];
           ++b) {
        e += std::norm(spec[static_cast<size_t>(b)]);
      }
      env[static_cast<size_t>(k)].push_back(std::sqrt(e));
    }
  }
  return env;
}

std::vector<double> AnalyticEnvelope(const std::vector<double>& x) {
  const int64_t n = NextPowerOfTwo(static_cast<int64_t>(x.size()));
  const auto& fft = GetComplexFft(n);
  std::vector<std::complex<double>> a(static_cast<size_t>(n)),
      spec(static_cast<size_t>(n));
  std::copy(x.begin(), x.end(), a.begin());
  fft.Forward(a, spec);
  for (int64_t k = 1; k < n / 2; ++k) spec[static_cast<size_t>(k)] *= 2.0;
  for (int64_t k = n / 2 + 1; k < n; ++k) spec[static_cast<size_t>(k)] = 0.0;
  fft.Inverse(spec, a);
  std::vector<double> env(x.size());
  for (size_t i = 0; i < x.size(); ++i) env[i] = std::abs(a[i]);
  return env;
}

double Erb(double f) { return 24.7 * (4.37 * f / 1000.0 + 1.0); }

// Fourth-order gammatone impulse response, unit gain at fc.
std::vector<double> Gammatone(double fc, int rate) {
  const double b = 1.019 * Erb(fc);
  // t^3 e^{-2 pi b t} is below 1e-5 of its peak after 20 / (2 pi b).
  const auto len =
      static_cast<size_t>(std::ceil(rate * 20.0 / (2 * std::numbers::pi * b)));
  std::vector<double> g(len);
  std::complex<double> gain = 0.0;
  for (size_t i = 0; i < len; ++i) {
    const double t = static_cast<double>(i) / rate;
    g[i] = t * t * t * std::exp(-2 * std::numbers::pi * b * t) *
           std::cos(2 * std::numbers::pi * fc * t);
    gain += g[i] * std::polar(1.0, -2 * std::numbers::pi * fc * t);
  }
  const double scale = 1.0 / std::abs(gain);
  for (double& v : g) v *= scale;
  return g;
}

}  // namespace

double Stoi(const AudioBuffer& clean, const AudioBuffer& processed) {
  if (clean.sample_rate != processed.sample_rate) {
    throw DataError("stoi: sample rates differ (" +
                    std::to_string(clean.sample_rate) + " vs " +
                    std::to_string(processed.sample_rate) + ")");
  }
  const size_t len = std::min(clean.samples.size(), processed.samples.size());
  if (std::all_of(clean.samples.begin(), clean.samples.begin() + len,
                  [](double v) { return v == 0.0; })) {
    throw DataError("stoi: reference signal is silent; metric undefined");
  }
  auto x = Resample(std::span(clean.samples).first(len), clean.sample_rate,
                    StoiConfig::kRate);
  auto y = Resample(std::span(processed.samples).first(len),
                    processed.sample_rate, StoiConfig::kRate);
  RemoveSilentFrames(x, y);
  const Matrix xe = BandEnvelopes(x), ye = BandEnvelopes(y);
  const size_t frames = xe[0].size();
  const size_t seg = StoiConfig::kSegment;
  if (frames < seg) {
    throw DataError("stoi: only " + std::to_string(frames) +
                    " non-silent frames, need at least 30 (about 0.4 s)");
  }
  const double clip = std::pow(10.0, -StoiConfig::kBeta / 20.0);
  double total = 0.0;
  std::vector<double> xs(seg), ys(seg);
  for (size_t m = seg; m <= frames; ++m) {
    for (int j = 0; j < StoiConfig::kBands; ++j) {
      const auto& xr = xe[static_cast<size_t>(j)];
      const auto& yr = ye[static_cast<size_t>(j)];
      std::copy(xr.begin() + (m - seg), xr.begin() + m, xs.begin());
      std::copy(yr.begin() + (m - seg), yr.begin() + m, ys.begin());
      const double alpha = Norm(xs) / (Norm(ys) + kEps);
      for (size_t i = 0; i < seg; ++i) {
        ys[i] = std::min(ys[i] * alpha, xs[i] * (1 + clip));
      }
      double mx = 0.0, my = 0.0;
      for (size_t i = 0; i < seg; ++i) {
        mx += xs[i];
        my += ys[i];
      }
      mx /= seg;
      my /= seg;
      for (size_t i = 0; i < seg; ++i) {
        xs[i] -= mx;
        ys[i] -= my;
      }
      const double nx = Norm(xs) + kEps, ny = Norm(ys) + kEps;
      double c = 0.0;
      for (size_t i = 0; i < seg; ++i) c += (xs[i] / nx) * (ys[i] / ny);
      total += c;
    }
  }
  return total / (StoiConfig::kBands * static_cast<double>(frames - seg + 1));
}

std::vector<double> GammatoneCenters(int channels, double low, double high) {
  auto erbs = [](double f) { return 21.4 * std::log10(4.37 * f / 1000 + 1); };
  auto inverse = [](double e) {
    return (std::pow(10.0, e / 21.4) - 1) * 1000 / 4.37;
  };
  std::vector<double> out(static_cast<size_t>(channels));
  const double a = erbs(low), b = erbs(high);
  for (int i = 0; i < channels; ++i) {
    out[static_cast<size_t>(i)] =
        channels == 1 ? low : inverse(a + (b - a) * i / (channels - 1));
  }
  return out;
}

std::vector<double> ModulationCenters() {
  std::vector<double> out(SrmrConfig::kModBands);
  const double ratio = SrmrConfig::kModMax / SrmrConfig::kModMin;
  for (int k = 0; k < SrmrConfig::kModBands; ++k) {
    out[static_cast<size_t>(k)] =
        SrmrConfig::kModMin *
        std::pow(ratio, static_cast<double>(k) / (SrmrConfig::kModBands - 1));
  }
  return out;
}

double Srmr(const AudioBuffer& signal) {
  if (signal.sample_rate <= 0) throw DataError("srmr: invalid sample rate");
  if (signal.duration() < 0.5) {
    throw DataError("srmr: need at least 0.5 s of audio, got " +
                    std::to_string(signal.duration()) + " s");
  }
  const auto x = Resample(signal.samples, signal.sample_rate,
                          SrmrConfig::kRate);
  if (std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0; })) {
    throw DataError("srmr: input is silent");
  }
  const auto centres = GammatoneCenters(SrmrConfig::kChannels,
                                        SrmrConfig::kMinFreq,
                                        SrmrConfig::kRate / 2.0);
  const auto mod = ModulationCenters();
  double low = 0.0, high = 0.0;
  for (double fc : centres) {
    auto band = LinearConvolve(x, Gammatone(fc, SrmrConfig::kRate));
    band.resize(x.size());
    const auto env = AnalyticEnvelope(band);
    // Modulation energy per band by Parseval over the envelope spectrum,
    // weighted with the squared magnitude response of each band-pass.
    const int64_t n = NextPowerOfTwo(static_cast<int64_t>(env.size()));
    std::vector<double> padded(static_cast<size_t>(n), 0.0);
    std::copy(env.begin(), env.end(), padded.begin());
    std::vector<std::complex<double>> spec(static_cast<size_t>(n / 2 + 1));
    GetRealFft<double>(n).Forward(padded, spec);
    for (size_t k = 1; k < spec.size(); ++k) {
      const double f = static_cast<double>(k) * SrmrConfig::kRate / n;
      const double power = std::norm(spec[k]);
      for (int b = 0; b < SrmrConfig::kModBands; ++b) {
        const double r = f / mod[static_cast<size_t>(b)] -
                         mod[static_cast<size_t>(b)] / f;
        const double h2 = 1.0 / (1.0 + SrmrConfig::kModQ * SrmrConfig::kModQ *
                                           r * r);
        (b < 4 ? low : high) += power * h2;
      }
    }
  }
  if (!(high > 0.0)) throw DataError("srmr: no high modulation energy");
  return low / high;
}

std::map<int, BucketMean> MetricReport::BucketMeans() const {
  std::map<int, BucketMean> out;
  for (const auto& r : rows) {
    if (!r.ok) continue;
    auto& b = out[static_cast<int>(std::lround(r.t60 * 1000))];
    ++b.count;
    b.stoi += r.stoi;
    b.srmr += r.srmr;
    b.delta_stoi += r.delta_stoi();
    b.delta_srmr += r.delta_srmr();
  }
  for (auto& [key, b] : out) {
    b.stoi /= b.count;
    b.srmr /= b.count;
    b.delta_stoi /= b.count;
    b.delta_srmr /= b.count;
  }
  return out;
}

MetricReport EvaluateCorpus(const std::vector<EvalItem>& items, int workers) {
  MetricReport report;
  report.rows.resize(items.size());
  ParallelFor(items.size(), workers, [&](size_t i) {
    const auto& item = items[i];
    MetricRow& row = report.rows[i];
    row.pair_id = item.pair_id;
    row.t60 = item.t60;
    try {
      const auto clean = ReadWav(item.clean);
      const auto reverb = ReadWav(item.reverberant);
      const auto enhanced = ReadWav(item.enhanced);
      row.stoi = Stoi(clean, enhanced);
      row.srmr = Srmr(enhanced);
      row.stoi_reverb = Stoi(clean, reverb);
      row.srmr_reverb = Srmr(reverb);
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
  });
  std::sort(report.rows.begin(), report.rows.end(),
            [](const MetricRow& a, const MetricRow& b) {
              return a.pair_id < b.pair_id;
            });
  return report;
}

void WriteMetricReport(std::ostream& out, const MetricReport& report) {
  char buf[256];
  out << "# SRMR: original global-ratio form (bands 1-4 over 5-8); "
         "PESQ/POLQA not computed\n";
  out << "pair_id,t60,stoi,srmr,stoi_reverb,srmr_reverb,delta_stoi,"
         "delta_srmr,status\n";
  for (const auto& r : report.rows) {
    if (r.ok) {
      std::snprintf(buf, sizeof(buf), "%.3f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,ok",
                    r.t60, r.stoi, r.srmr, r.stoi_reverb, r.srmr_reverb,
                    r.delta_stoi(), r.delta_srmr());
      out << r.pair_id << "," << buf << "\n";
    } else {
      std::string msg = r.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      std::snprintf(buf, sizeof(buf), "%.3f", r.t60);
      out << r.pair_id << "," << buf << ",,,,,,,error: " << msg << "\n";
    }
  }
  for (const auto& [key, b] : report.BucketMeans()) {
    std::snprintf(buf, sizeof(buf),
                  "# bucket t60=%.3f n=%d stoi=%.6f srmr=%.6f delta_stoi=%.6f "
                  "delta_srmr=%.6f",
                  key / 1000.0, b.count, b.stoi, b.srmr, b.delta_stoi,
                  b.delta_srmr);
    out << buf << "\n";
  }
}

}  // namespace dereverb
