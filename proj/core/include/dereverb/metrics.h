// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DEREVERB_METRICS_H_
#define DEREVERB_METRICS_H_

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dereverb/audio.h"

namespace dereverb {

// Short-time objective intelligibility. Fixed constants of the published
// definition.
struct StoiConfig {
  static constexpr int kRate = 10000;
  static constexpr int kFrame = 256;
  static constexpr int kHop = 128;
  static constexpr int kFft = 512;
  static constexpr int kBands = 15;
  static constexpr double kMinFreq = 150.0;
  static constexpr int kSegment = 30;        // frames per correlation window
  static constexpr double kDynRange = 40.0;  // silent-frame threshold, dB
  static constexpr double kBeta = -15.0;     // lower SDR bound, dB
};

// Both signals are resampled to 10 kHz; the longer one is trimmed to the
// shorter. Throws DataError for a silent reference, mismatched rates or
// fewer than 30 non-silent frames.
double Stoi(const AudioBuffer& clean, const AudioBuffer& processed);

// Speech-to-reverberation modulation energy ratio, global (non-windowed)
// form: 23 gammatone channels ERB-spaced from 125 Hz to fs/2, Hilbert
// envelopes, 8 second-order (Q = 2) modulation bands centred 4..128 Hz;
// score = energy in bands 1-4 / energy in bands 5-8 summed over channels.
// Input is resampled to 16 kHz. Throws DataError for < 0.5 s or silence.
struct SrmrConfig {
  static constexpr int kRate = 16000;
  static constexpr int kChannels = 23;
  static constexpr double kMinFreq = 125.0;
  static constexpr int kModBands = 8;
  static constexpr double kModMin = 4.0;
  static constexpr double kModMax = 128.0;
  static constexpr double kModQ = 2.0;
};
double Srmr(const AudioBuffer& signal);

// Centre frequencies used above, exposed for tests.
std::vector<double> GammatoneCenters(int channels, double low, double high);
std::vector<double> ModulationCenters();

struct EvalItem {
  std::string pair_id;
  double t60 = 0.0;  // target T60 of the response (bucket key)
  std::filesystem::path clean;
  std::filesystem::path reverberant;
  std::filesystem::path enhanced;
};

struct MetricRow {
  std::string pair_id;
  double t60 = 0.0;
  bool ok = false;
  std::string error;  // set when !ok
  double stoi = 0.0, srmr = 0.0;
  double stoi_reverb = 0.0, srmr_reverb = 0.0;
  double delta_stoi() const { return stoi - stoi_reverb; }
  double delta_srmr() const { return srmr - srmr_reverb; }
};

struct BucketMean {
  int count = 0;
  double stoi = 0.0, srmr = 0.0, delta_stoi = 0.0, delta_srmr = 0.0;
};

struct MetricReport {
  std::vector<MetricRow> rows;  // sorted by pair id
  // Key: T60 rounded to milliseconds. Failed rows are excluded.
  std::map<int, BucketMean> BucketMeans() const;
};

// Scores every item with `workers` threads (0 = hardware concurrency).
// Missing or unreadable files flag the row and the run continues.
MetricReport EvaluateCorpus(const std::vector<EvalItem>& items,
                            int workers = 0);

// CSV with header
//   pair_id,t60,stoi,srmr,stoi_reverb,srmr_reverb,delta_stoi,delta_srmr,status
// followed by "# bucket ..." comment lines with per-T60 means.
void WriteMetricReport(std::ostream& out, const MetricReport& report);

}  // namespace dereverb

#endif  // DEREVERB_METRICS_H_
