// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "dereverb/error.h"
#include "dereverb/metrics.h"
#include "dereverb/room.h"
#include "support/scratch_dir.h"
#include "support/test_signals.h"

namespace dereverb {
namespace {

using testing::SpeechLike;
using testing::WhiteNoise;

AudioBuffer Speech(double seconds, uint64_t seed) {
  return {SpeechLike(seconds, seed), 16000};
}

AudioBuffer AddNoise(const AudioBuffer& x, double snr_db, uint64_t seed) {
  double power = 0.0;
  for (double v : x.samples) power += v * v;
  power /= static_cast<double>(x.samples.size());
  const auto noise = WhiteNoise(x.samples.size(), seed,
                                std::sqrt(power / std::pow(10.0, snr_db / 10)));
  AudioBuffer y = x;
  for (size_t i = 0; i < y.samples.size(); ++i) y.samples[i] += noise[i];
  return y;
}

AudioBuffer Scaled(const AudioBuffer& x, double g) {
  AudioBuffer y = x;
  for (double& v : y.samples) v *= g;
  return y;
}

AudioBuffer Reverberate(const AudioBuffer& x, double t60, uint64_t variant) {
  RoomSpec spec;
  spec.dims = {6.0, 4.0, 4.0};
  spec.source = {1.5 + 0.1 * variant, 1.2, 1.6};
  spec.mic = {4.3, 2.7 - 0.1 * variant, 1.4};
  spec.target_t60 = t60;
  return FftConvolve(x, ImageSourceRir(spec));
}

TEST(StoiTest, IdentityIsOne) {
  const auto x = Speech(3.0, 1);
  EXPECT_NEAR(Stoi(x, x), 1.0, 1e-6);
}

TEST(StoiTest, ScaleInvariance) {
  const auto x = Speech(3.0, 2);
  EXPECT_NEAR(Stoi(x, Scaled(x, 0.5)), 1.0, 1e-6);
  const auto y = AddNoise(x, 5.0, 3);
  const double base = Stoi(x, y);
  EXPECT_NEAR(Stoi(x, Scaled(y, 0.1)), base, 1e-6);
  EXPECT_NEAR(Stoi(Scaled(x, 4.0), y), base, 1e-6);
}

TEST(StoiTest, MonotoneUnderAdditiveNoise) {
  const auto x = Speech(4.0, 4);
  double previous = Stoi(x, x);
  for (double snr : {20.0, 10.0, 0.0, -10.0}) {
    const double s = Stoi(x, AddNoise(x, snr, 5));
    EXPECT_LT(s, previous) << snr;
    previous = s;
  }
  EXPECT_GT(previous, -1.0);
}

TEST(StoiTest, ReverberationLowersScore) {
  const auto x = Speech(3.0, 6);
  const double s = Stoi(x, Reverberate(x, 1.0, 0));
  EXPECT_LT(s, 0.95);
  EXPECT_GT(s, 0.0);
}

TEST(StoiTest, TrimsToShorterSignal) {
  const auto x = Speech(3.0, 7);
  auto longer = x;
  longer.samples.resize(x.samples.size() + 4000, 0.3);
  EXPECT_NEAR(Stoi(x, longer), 1.0, 1e-6);
}

TEST(StoiTest, Errors) {
  const auto x = Speech(2.0, 8);
  AudioBuffer silent{std::vector<double>(x.samples.size(), 0.0), 16000};
  EXPECT_THROW(Stoi(silent, x), DataError);
  EXPECT_THROW(Stoi(x, AudioBuffer{x.samples, 8000}), DataError);
  EXPECT_THROW(Stoi(Speech(0.2, 9), Speech(0.2, 9)), DataError);
}

TEST(SrmrTest, FilterbankLayout) {
  const auto centres = GammatoneCenters(23, 125.0, 8000.0);
  ASSERT_EQ(centres.size(), 23u);
  EXPECT_NEAR(centres.front(), 125.0, 1e-9);
  EXPECT_NEAR(centres.back(), 8000.0, 1e-6);
  for (size_t i = 1; i < centres.size(); ++i) {
    EXPECT_GT(centres[i], centres[i - 1]);
  }
  // Modulation centres 4 * 32^(k/7).
  const auto mod = ModulationCenters();
  const std::vector<double> expected = {4.0,  6.5,  10.7, 17.6,
                                        28.9, 47.5, 78.1, 128.0};
  ASSERT_EQ(mod.size(), 8u);
  EXPECT_DOUBLE_EQ(mod.front(), 4.0);
  EXPECT_NEAR(mod.back(), 128.0, 1e-12);
  for (size_t k = 0; k < 8; ++k) {
    EXPECT_NEAR(mod[k], 4.0 * std::pow(32.0, k / 7.0), 1e-12);
    EXPECT_NEAR(mod[k], expected[k], 0.1);
  }
}

TEST(SrmrTest, ScaleInvariance) {
  const auto x = Speech(2.0, 10);
  const double a = Srmr(x), b = Srmr(Scaled(x, 10.0));
  EXPECT_GT(a, 0.0);
  EXPECT_LT(std::abs(a - b) / a, 0.01);
}

TEST(SrmrTest, SlowAmplitudeModulationScoresHigh) {
  std::vector<double> x(32000);
  for (size_t n = 0; n < x.size(); ++n) {
    const double t = static_cast<double>(n) / 16000;
    x[n] = (1 + 0.8 * std::sin(2 * std::numbers::pi * 4 * t)) *
           std::sin(2 * std::numbers::pi * 1000 * t);
  }
  const double slow = Srmr({x, 16000});
  EXPECT_GT(slow, 20.0);
  for (size_t n = 0; n < x.size(); ++n) {
    const double t = static_cast<double>(n) / 16000;
    x[n] = (1 + 0.8 * std::sin(2 * std::numbers::pi * 100 * t)) *
           std::sin(2 * std::numbers::pi * 1000 * t);
  }
  EXPECT_LT(Srmr({x, 16000}), 1.0);
}

TEST(SrmrTest, CleanScoresAboveReverberant) {
  for (uint64_t i = 0; i < 5; ++i) {
    const auto clean = Speech(2.5, 20 + i);
    const auto reverb = Reverberate(clean, 1.5, i);
    EXPECT_GT(Srmr(clean), Srmr(reverb)) << i;
  }
}

TEST(SrmrTest, Errors) {
  EXPECT_THROW(Srmr(Speech(0.3, 1)), DataError);
  EXPECT_THROW(Srmr(AudioBuffer{std::vector<double>(16000, 0.0), 16000}),
               DataError);
}

class CorpusTest : public ::testing::Test {
 protected:
  void SetUp() override {
    for (int i = 0; i < 4; ++i) {
      const auto clean = Speech(2.0, 40 + i);
      const double t60 = i < 2 ? 0.3 : 0.6;
      const auto reverb = Reverberate(clean, t60, i);
      const std::string id = "p" + std::to_string(i);
      WriteWav(dir_ / (id + "_clean.wav"), clean, WavFormat::kFloat32);
      WriteWav(dir_ / (id + "_reverb.wav"), reverb, WavFormat::kFloat32);
      items_.push_back({id, t60, dir_ / (id + "_clean.wav"),
                        dir_ / (id + "_reverb.wav"), {}});
    }
  }

  testing::ScratchDir dir_{"metrics"};
  std::vector<EvalItem> items_;
};

TEST_F(CorpusTest, EnhancedEqualsClean) {
  auto items = items_;
  for (auto& it : items) it.enhanced = it.clean;
  const auto report = EvaluateCorpus(items, 2);
  ASSERT_EQ(report.rows.size(), items.size());
  for (const auto& r : report.rows) {
    ASSERT_TRUE(r.ok) << r.error;
    EXPECT_NEAR(r.stoi, 1.0, 1e-6);
  }
}

TEST_F(CorpusTest, EnhancedEqualsReverberantAndBucketMeans) {
  auto items = items_;
  for (auto& it : items) it.enhanced = it.reverberant;
  const auto report = EvaluateCorpus(items, 3);
  for (const auto& r : report.rows) {
    ASSERT_TRUE(r.ok) << r.error;
    EXPECT_EQ(r.delta_stoi(), 0.0);
    EXPECT_EQ(r.delta_srmr(), 0.0);
  }
  const auto buckets = report.BucketMeans();
  ASSERT_EQ(buckets.size(), 2u);
  const auto& r = report.rows;
  EXPECT_EQ(buckets.at(300).count, 2);
  EXPECT_DOUBLE_EQ(buckets.at(300).stoi, (r[0].stoi + r[1].stoi) / 2);
  EXPECT_DOUBLE_EQ(buckets.at(600).srmr, (r[2].srmr + r[3].srmr) / 2);
}

TEST_F(CorpusTest, MissingFileFlagsRowAndRunContinues) {
  auto items = items_;
  for (auto& it : items) it.enhanced = it.clean;
  items[1].enhanced = dir_ / "nope.wav";
  std::reverse(items.begin(), items.end());
  const auto report = EvaluateCorpus(items, 4);
  ASSERT_EQ(report.rows.size(), 4u);
  EXPECT_EQ(report.rows[0].pair_id, "p0");  // sorted by id
  int failed = 0;
  for (const auto& r : report.rows) failed += r.ok ? 0 : 1;
  EXPECT_EQ(failed, 1);
  EXPECT_FALSE(report.rows[1].ok);

  std::ostringstream csv;
  WriteMetricReport(csv, report);
  std::istringstream lines(csv.str());
  std::string line;
  int data_rows = 0, bucket_lines = 0;
  bool header = false;
  while (std::getline(lines, line)) {
    if (line.rfind("# bucket", 0) == 0) {
      ++bucket_lines;
    } else if (line.rfind("pair_id,", 0) == 0) {
      header = true;
    } else if (!line.empty() && line[0] != '#') {
      ++data_rows;
    }
  }
  EXPECT_TRUE(header);
  EXPECT_EQ(data_rows, 4);
  EXPECT_EQ(bucket_lines, 2);
  EXPECT_NE(csv.str().find("p1,0.300,,,,,,,error"), std::string::npos);
}

}  // namespace
}  // namespace dereverb
