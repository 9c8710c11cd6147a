// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Acceptance run: one line per criterion, "PASS" or "FAIL", with the measured
// quantity next to its pinned threshold. Exit status 0 only when every
// selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cli.h"
#include "dereverb/audio.h"
#include "dereverb/checkpoint.h"
#include "dereverb/dataset.h"
#include "dereverb/enhance.h"
#include "dereverb/log.h"
#include "dereverb/metrics.h"
#include "dereverb/model.h"
#include "dereverb/nn.h"
#include "dereverb/rng.h"
#include "dereverb/room.h"
#include "dereverb/stft.h"
#include "dereverb/train.h"
#include "dereverb/verify.h"
#include "support/test_signals.h"

namespace dereverb::acceptance {
namespace {

namespace fs = std::filesystem;
using testing::SpeechLike;

// Pinned thresholds.
constexpr double kParamsBudgetSeconds = 1.0;
constexpr double kGradTolerance = 1e-6;
constexpr double kGradBudgetSeconds = 120.0;
constexpr double kStftMinSnrDb = 100.0;
constexpr double kSyntheticT60Tolerance = 0.01;  // relative
constexpr double kRoomT60Tolerance = 0.20;       // relative, vs Sabine target
constexpr double kT60BudgetSeconds = 120.0;
constexpr double kOverfitLossRatio = 0.10;
constexpr double kOverfitBudgetSeconds = 30 * 60.0;
constexpr double kStoiSelfTolerance = 1e-6;
constexpr double kSrmrScaleTolerance = 0.01;  // relative

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* format, double v) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

struct CliResult {
  int code;
  std::string out, err;
};

CliResult Cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = tool::Run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

RoomSpec ShoeBox(double t60) {
  RoomSpec spec;
  spec.dims = {6.0, 4.0, 4.0};
  spec.source = {1.7, 1.3, 1.6};
  spec.mic = {4.1, 2.6, 1.4};
  spec.target_t60 = t60;
  return spec;
}

// 1 ---------------------------------------------------------------------------

Outcome ParameterCounts() {
  const std::vector<std::string> expected = {
      "proposed,11,7439873,7,439,873",
      "proposed,7,7434497,7,434,497",
      "proposed,3,7429121,7,429,121",
      "proposed-no-context,-,1838593,1,838,593",
      "gru-baseline,-,4458753,4,458,753",
      "wu2016-ff,-,14711041,14,711,041"};
  const auto start = std::chrono::steady_clock::now();
  const auto r = Cli({"params"});
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - start)
                          .count();
  int matched = 0;
  for (const auto& line : expected) {
    if (r.out.find(line + "\n") != std::string::npos) ++matched;
  }
  return {r.code == 0 && matched == 6 && secs < kParamsBudgetSeconds,
          std::to_string(matched) + "/6 table values exact, " +
              Fmt("%.3f s", secs) + " (budget 1 s)"};
}

// 2 ---------------------------------------------------------------------------

Outcome GradientSuite() {
  const auto start = std::chrono::steady_clock::now();
  const auto results = RunGradientSuite();
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - start)
                          .count();
  double worst = 0.0;
  std::string worst_name;
  bool has_proposed = false;
  for (const auto& r : results) {
    if (r.report.max_rel_error() >= worst) {
      worst = r.report.max_rel_error();
      worst_name = r.name;
    }
    has_proposed = has_proposed || r.name == "model proposed";
  }
  return {has_proposed && worst <= kGradTolerance &&
              secs < kGradBudgetSeconds,
          std::to_string(results.size()) + " checks, max rel error " +
              Fmt("%.2e", worst) + " (" + worst_name + ") <= 1e-6, " +
              Fmt("%.1f s", secs) + " (budget 120 s)"};
}

// 3 ---------------------------------------------------------------------------

Outcome StftRoundTrip() {
  double worst = 1e300;
  for (uint64_t s = 0; s < 10; ++s) {
    Rng rng(Rng::Derive(300, s));
    std::vector<double> x(2 * 16000);
    for (double& v : x) v = rng.Normal();
    const auto y = Istft(Stft<double>(x, 16000));
    double signal = 0.0, error = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
      signal += x[i] * x[i];
      error += (x[i] - y[i]) * (x[i] - y[i]);
    }
    const double snr =
        error > 0 ? 10 * std::log10(signal / error) : 1e300;
    worst = std::min(worst, snr);
  }
  return {worst >= kStftMinSnrDb,
          "worst SNR " + Fmt("%.1f dB", worst) +
              " over 10 x 2 s signals (>= 100 dB)"};
}

// 4 ---------------------------------------------------------------------------

// One tone per analysis band (plus two off-band) under exp(-3 ln10 t / T60).
std::vector<double> DecayingTones(double t60, double seconds, int rate) {
  const std::vector<double> freqs = {180, 400, 500, 630, 800, 1000, 1250, 3100};
  std::vector<double> h(static_cast<size_t>(seconds * rate));
  for (size_t n = 0; n < h.size(); ++n) {
    const double t = static_cast<double>(n) / rate;
    double s = 0.0;
    for (size_t i = 0; i < freqs.size(); ++i) {
      s += std::cos(2 * std::numbers::pi * freqs[i] * t + 0.7 * i);
    }
    h[n] = s * std::exp(-3.0 * std::log(10.0) * t / t60);
  }
  return h;
}

Outcome T60Oracles() {
  const auto start = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail = "synthetic";
  for (double t60 : {0.3, 0.8, 1.5}) {
    const double est = EstimateT60(DecayingTones(t60, 1.5 * t60, 16000), 16000)
                           .fullband;
    const double rel = std::abs(est / t60 - 1);
    ok = ok && rel <= kSyntheticT60Tolerance;
    detail += " " + Fmt("%.1f", t60) + "->" + Fmt("%.4f", est);
  }
  detail += " (1%); image-source";
  for (double t60 : {0.5, 1.0}) {
    const auto rir = ImageSourceRir(ShoeBox(t60));
    const double est = EstimateT60(rir.samples, 16000).fullband;
    const double rel = std::abs(est / t60 - 1);
    ok = ok && rel <= kRoomT60Tolerance;
    detail += " " + Fmt("%.1f", t60) + "->" + Fmt("%.3f", est);
  }
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - start)
                          .count();
  ok = ok && secs < kT60BudgetSeconds;
  return {ok, detail + " (20%), " + Fmt("%.1f s", secs)};
}

// 5 ---------------------------------------------------------------------------

Outcome CountingIdentities(const fs::path& work) {
  const auto dry = Cli({"rir-gen", "--dry-run"});
  const bool full_ok =
      dry.code == 0 &&
      dry.out ==
          "t60_values,37\nrirs,740\npairs,37000\nval,1850\ntrain,35150\n";

  const fs::path dir = work / "counting";
  fs::remove_all(dir);
  fs::create_directories(dir / "clean");
  for (int i = 0; i < 4; ++i) {
    WriteWav(dir / "clean" / ("s" + std::to_string(i) + ".wav"),
             {SpeechLike(1.0, 500 + i), 16000}, WavFormat::kPcm16);
  }
  const std::vector<std::string> common = {
      "--paths.clean", (dir / "clean").string(), "--paths.bank",
      (dir / "bank").string(), "--paths.data", (dir / "data").string(),
      "--bank.t60_min", "0.5", "--bank.t60_max", "0.6", "--bank.t60_step",
      "0.1", "--bank.rirs_per_t60", "3", "--synth.utterances_per_rir", "3"};
  auto with = [&](const std::string& cmd) {
    auto args = common;
    args.push_back(cmd);
    return Cli(args);
  };
  const auto plan_out = with("rir-gen");
  const auto synth_out = with("synth");
  if (plan_out.code != 0 || synth_out.code != 0) {
    return {false, "desk-scale run failed: " + plan_out.err + synth_out.err};
  }
  const auto bank = ReadBankManifest(dir / "bank" / "bank.csv");
  const auto pairs = ReadPairManifest(dir / "data" / "pairs.csv");
  const size_t val = pairs.Select(Split::kVal).size();
  const size_t train = pairs.Select(Split::kTrain).size();
  // 6 rirs x 3 utterances = 18 pairs; val = round(0.05 * 18) = 1.
  const bool desk_ok = bank.entries.size() == 6 && pairs.rows.size() == 18 &&
                       val == 1 && train == 17;
  return {full_ok && desk_ok,
          "full 740/37000/1850/35150 " + std::string(full_ok ? "ok" : "WRONG") +
              "; desk rirs=" + std::to_string(bank.entries.size()) +
              " pairs=" + std::to_string(pairs.rows.size()) +
              " val=" + std::to_string(val) +
              " train=" + std::to_string(train) + " (6/18/1/17)"};
}

// 6 ---------------------------------------------------------------------------

constexpr int kOverfitUtterances = 10;
constexpr double kOverfitSeconds = 2.0;
constexpr int kOverfitEpochs = 200;
constexpr int kOverfitBatch = 16;  // one full batch per epoch
constexpr double kOverfitLearningRate = 1e-3;

Outcome OverfitSmoke(const fs::path& work) {
  const auto start = std::chrono::steady_clock::now();
  const fs::path dir = work / "overfit";
  fs::remove_all(dir);
  const auto rir = ImageSourceRir(ShoeBox(0.6));

  std::vector<ReverberantPair> pairs;
  std::vector<FeaturePair> features;
  for (int i = 0; i < kOverfitUtterances; ++i) {
    pairs.push_back(Reverberate(SpeechLike(kOverfitSeconds, 600 + i),
                                rir.samples));
    auto f = ExtractFeatures({pairs.back().clean, 16000},
                             {pairs.back().reverberant, 16000});
    f.pair_id = "u" + std::to_string(i);
    features.push_back(std::move(f));
  }
  const NormStats stats = ComputeStats(features);
  std::vector<Utterance> train;
  for (const auto& f : features) train.push_back(NormalizeFeatures(f, stats));

  ModelConfig model = ModelConfig::ForVariant(Variant::kProposed, 3);
  model.bins = 257;
  model.conv_filters = 16;
  model.hidden = 64;
  TrainConfig cfg;
  cfg.epochs = kOverfitEpochs;
  cfg.batch_size = kOverfitBatch;
  cfg.learning_rate = kOverfitLearningRate;
  cfg.seed = 606;
  cfg.out_dir = dir;
  const auto report = Train<float>(model, cfg, train, {}, stats);
  const double first = report.epochs.front().train_loss;
  const double last = report.epochs.back().train_loss;

  const auto trained =
      ModelFromCheckpoint<float>(LoadCheckpoint(dir / "last.ckpt"));
  double stoi_rev = 0.0, stoi_enh = 0.0;
  for (const auto& p : pairs) {
    const AudioBuffer clean{p.clean, 16000};
    const AudioBuffer reverb{p.reverberant, 16000};
    const auto enhanced = Enhance(trained, stats, reverb);
    stoi_rev += Stoi(clean, reverb) / kOverfitUtterances;
    stoi_enh += Stoi(clean, enhanced.audio) / kOverfitUtterances;
  }
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - start)
                          .count();
  const bool ok = last < kOverfitLossRatio * first && stoi_enh > stoi_rev &&
                  secs <= kOverfitBudgetSeconds;
  return {ok, "loss " + Fmt("%.4f", first) + " -> " + Fmt("%.4f", last) +
                  " (ratio " + Fmt("%.3f", last / first) + " < 0.10); STOI " +
                  Fmt("%.3f", stoi_rev) + " -> " + Fmt("%.3f", stoi_enh) +
                  "; " + Fmt("%.0f s", secs) + " (budget 1800 s)"};
}

// 7 ---------------------------------------------------------------------------

AudioBuffer WithNoise(const AudioBuffer& x, double snr_db, uint64_t seed) {
  double power = 0.0;
  for (double v : x.samples) power += v * v;
  power /= static_cast<double>(x.samples.size());
  const auto noise = testing::WhiteNoise(
      x.samples.size(), seed, std::sqrt(power / std::pow(10.0, snr_db / 10)));
  AudioBuffer y = x;
  for (size_t i = 0; i < y.samples.size(); ++i) y.samples[i] += noise[i];
  return y;
}

Outcome MetricProperties() {
  const AudioBuffer x{SpeechLike(4.0, 700), 16000};
  const double self = Stoi(x, x);
  const bool self_ok = std::abs(self - 1.0) <= kStoiSelfTolerance;

  bool monotone = true;
  double previous = self;
  std::string sweep;
  for (double snr : {20.0, 10.0, 0.0, -10.0}) {
    const double s = Stoi(x, WithNoise(x, snr, 701));
    monotone = monotone && s < previous;
    sweep += (sweep.empty() ? "" : "/") + Fmt("%.3f", s);
    previous = s;
  }

  AudioBuffer loud = x, quiet = x;
  for (double& v : loud.samples) v *= 10.0;
  for (double& v : quiet.samples) v *= 0.1;
  const double base = Srmr(x);
  const double scale_err = std::max(std::abs(Srmr(loud) / base - 1),
                                    std::abs(Srmr(quiet) / base - 1));
  const bool scale_ok = scale_err <= kSrmrScaleTolerance;

  const auto rir = ImageSourceRir(ShoeBox(1.5));
  int srmr_wins = 0;
  for (int i = 0; i < 5; ++i) {
    const auto p = Reverberate(SpeechLike(3.0, 710 + i), rir.samples);
    if (Srmr({p.clean, 16000}) > Srmr({p.reverberant, 16000})) ++srmr_wins;
  }
  return {self_ok && monotone && scale_ok && srmr_wins == 5,
          "stoi(x,x)=" + Fmt("%.9f", self) + "; sweep 20/10/0/-10 dB " +
              sweep + (monotone ? " decreasing" : " NOT decreasing") +
              "; srmr scale err " + Fmt("%.2e", scale_err) +
              "; srmr clean > reverberant(1.5 s) " +
              std::to_string(srmr_wins) + "/5"};
}

// 8 ---------------------------------------------------------------------------

template <typename T>
int64_t PaddingMismatches(Variant variant) {
  Rng rng(800);
  ModelConfig cfg = ModelConfig::ForVariant(variant, 3);
  cfg.bins = 17;
  cfg.conv_filters = 3;
  cfg.conv_freq_kernel = 5;
  cfg.hidden = 8;
  cfg.ff_hidden = 6;
  cfg.ff_context = 5;
  auto model = DereverbModel<T>::Build(cfg, rng);
  model.SetRequiresGrad(true);
  std::vector<Utterance> us;
  for (int64_t frames : {11, 6, 3}) {
    Utterance u;
    u.id = "p" + std::to_string(frames);
    u.frames = frames;
    u.bins = 17;
    for (int64_t i = 0; i < frames * 17; ++i) {
      u.input.push_back(static_cast<float>(rng.Normal()));
      u.target.push_back(static_cast<float>(rng.Normal()));
    }
    us.push_back(std::move(u));
  }
  const std::vector<size_t> idx = {0, 1, 2};
  auto run = [&](int64_t pad_to) {
    model.ZeroGrad();
    Tape<T> tape;
    const auto b = MakeBatch<T>(us, idx, pad_to);
    const auto loss =
        nn::MaskedMse(tape, model.Forward(tape, b.inputs), b.targets, b.mask);
    tape.Backward(loss);
    std::vector<T> flat = {loss.item()};
    for (const auto& p : model.parameters()) {
      flat.insert(flat.end(), p.tensor.grad().begin(), p.tensor.grad().end());
    }
    return flat;
  };
  const auto base = run(0);
  int64_t mismatches = 0;
  for (int64_t pad : {12, 20, 64}) {
    const auto more = run(pad);
    for (size_t i = 0; i < base.size(); ++i) {
      // Exact comparison: any change at all is a failure.
      if (base[i] != more[i]) ++mismatches;
    }
  }
  return mismatches;
}

Outcome MaskingInvariance() {
  int64_t total = 0;
  total += PaddingMismatches<double>(Variant::kProposed);
  total += PaddingMismatches<float>(Variant::kProposed);
  total += PaddingMismatches<double>(Variant::kProposedNoContext);
  total += PaddingMismatches<double>(Variant::kGruBaseline);
  return {total == 0, std::to_string(total) +
                          " differing loss/gradient values across padding "
                          "to 12/20/64 frames (4 models, exact)"};
}

// 9 ---------------------------------------------------------------------------

Outcome DeterminismReplay(const fs::path& work) {
  const fs::path dir = work / "replay";
  fs::remove_all(dir);
  fs::create_directories(dir / "clean");
  for (int i = 0; i < 5; ++i) {
    WriteWav(dir / "clean" / ("s" + std::to_string(i) + ".wav"),
             {SpeechLike(1.2 + 0.3 * i, 900 + i), 16000}, WavFormat::kPcm16);
  }
  std::ofstream(dir / "replay.ini")
      << "[paths]\nclean = " << (dir / "clean").string()
      << "\nbank = " << (dir / "bank").string()
      << "\ndata = " << (dir / "data").string()
      << "\n[bank]\nt60_min = 0.4\nt60_max = 0.8\nt60_step = 0.2\n"
         "rirs_per_t60 = 2\n[synth]\nutterances_per_rir = 3\n"
         "val_fraction = 0.2\n"
         "[model]\ncontext = 3\nconv_filters = 4\nhidden = 16\n"
         "[train]\nepochs = 4\nbatch_size = 3\nseed = 9\n";
  const std::string cfg = (dir / "replay.ini").string();
  for (const char* stage : {"rir-gen", "synth", "stats"}) {
    const auto r = Cli({"--config", cfg, stage});
    if (r.code != 0) return {false, std::string(stage) + " failed: " + r.err};
  }
  // Different worker and prefetch counts; results must not depend on them.
  const auto a = Cli({"--config", cfg, "--paths.run", (dir / "run_a").string(),
                      "--run.workers", "1", "--train.prefetch", "1", "train"});
  const auto b = Cli({"--config", cfg, "--paths.run", (dir / "run_b").string(),
                      "--run.workers", "4", "--train.prefetch", "4", "train"});
  if (a.code != 0 || b.code != 0) {
    return {false, "training failed: " + a.err + b.err};
  }
  const auto best_a = Slurp(dir / "run_a" / "best.ckpt");
  const auto best_b = Slurp(dir / "run_b" / "best.ckpt");
  const bool same_best = !best_a.empty() && best_a == best_b;
  const bool same_last = Slurp(dir / "run_a" / "last.ckpt") ==
                         Slurp(dir / "run_b" / "last.ckpt");
  return {same_best && same_last,
          "best.ckpt " + std::string(same_best ? "byte-identical" : "DIFFERS") +
              " (" + std::to_string(best_a.size()) + " bytes), last.ckpt " +
              (same_last ? "byte-identical" : "DIFFERS")};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace dereverb::acceptance

int main(int argc, char** argv) {
  using namespace dereverb::acceptance;
  CLI::App app{"dereverb acceptance criteria", "dereverb_acceptance"};
  std::vector<int> only;
  std::string work_dir = (fs::temp_directory_path() / "dereverb_acceptance")
                             .string();
  bool verbose = false;
  app.add_option("--only", only, "criterion numbers to run (default: all)")
      ->check(CLI::Range(1, 9));
  app.add_option("--work", work_dir, "scratch directory");
  app.add_flag("-v,--verbose", verbose, "keep library log output");
  CLI11_PARSE(app, argc, argv);

  if (!verbose) {
    dereverb::SetLogSink([](dereverb::LogLevel level, std::string_view msg) {
      if (level >= dereverb::LogLevel::kWarning) std::cerr << msg << "\n";
    });
  }
  const fs::path work = work_dir;
  fs::create_directories(work);

  const std::vector<Criterion> criteria = {
      {1, "parameter counts", ParameterCounts},
      {2, "gradient suite", GradientSuite},
      {3, "stft round trip", StftRoundTrip},
      {4, "t60 oracles", T60Oracles},
      {5, "counting identities", [&] { return CountingIdentities(work); }},
      {6, "overfit smoke train", [&] { return OverfitSmoke(work); }},
      {7, "metric properties", MetricProperties},
      {8, "masking invariance", MaskingInvariance},
      {9, "determinism replay", [&] { return DeterminismReplay(work); }},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << c.id << ". " << c.name
              << ": " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 3;
}
