// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cli.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>

#include <CLI11.hpp>

#include "dereverb/checkpoint.h"
#include "dereverb/dataset.h"
#include "dereverb/enhance.h"
#include "dereverb/error.h"
#include "dereverb/log.h"
#include "dereverb/metrics.h"
#include "dereverb/parallel.h"
#include "dereverb/room.h"
#include "dereverb/train.h"
#include "dereverb/verify.h"
#include "run_config.h"

namespace dereverb::tool {
namespace fs = std::filesystem;

namespace {

std::string Fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

std::string Grouped(int64_t n) {
  std::string digits = std::to_string(n), out;
  for (size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}

// Marks a directory as holding partial output until Done() is called.
class IncompleteMarker {
 public:
  explicit IncompleteMarker(const fs::path& dir) : path_(dir / "INCOMPLETE") {
    fs::create_directories(dir);
    std::ofstream(path_) << "stage did not finish; outputs here are partial\n";
  }
  void Done() { fs::remove(path_); }

 private:
  fs::path path_;
};

int Params(std::ostream& out) {
  struct Row {
    Variant variant;
    int64_t context;
  };
  const Row rows[] = {{Variant::kProposed, 11},
                      {Variant::kProposed, 7},
                      {Variant::kProposed, 3},
                      {Variant::kProposedNoContext, 11},
                      {Variant::kGruBaseline, 11},
                      {Variant::kWu2016, 11}};
  out << "variant,context,parameters,grouped\n";
  for (const auto& r : rows) {
    const auto cfg = ModelConfig::ForVariant(r.variant, r.context);
    const int64_t n = ParameterCount(cfg);
    const bool has_context = r.variant == Variant::kProposed;
    out << VariantName(r.variant) << ","
        << (has_context ? std::to_string(r.context) : "-") << "," << n << ","
        << Grouped(n) << "\n";
  }
  return kExitOk;
}

int RirGen(const RunConfig& cfg, bool dry_run, std::ostream& out) {
  const auto bank = cfg.Bank();
  const auto synth = cfg.Synth();
  if (dry_run) {
    const auto c = PlanCorpus(static_cast<int64_t>(bank.t60_grid.size()),
                              bank.rirs_per_t60, synth.utterances_per_rir,
                              synth.test_split ? 0.0 : synth.val_fraction);
    out << "t60_values," << bank.t60_grid.size() << "\n"
        << "rirs," << c.rirs << "\n"
        << "pairs," << c.pairs << "\n"
        << "val," << c.val << "\n"
        << "train," << c.train << "\n";
    return kExitOk;
  }
  const auto dir = cfg.GetPath("paths.bank");
  IncompleteMarker marker(dir);
  cfg.Echo(dir, "rir-gen");
  LogInfo("rir-gen: rendering " +
          std::to_string(bank.t60_grid.size() * bank.rirs_per_t60) +
          " responses into " + dir.string());
  const auto manifest = GenerateBank(bank, dir, cfg.Workers());
  marker.Done();
  double worst = 0.0;
  for (const auto& e : manifest.entries) {
    if (std::isfinite(e.estimated_t60)) {
      worst = std::max(worst, std::abs(e.estimated_t60 / e.target_t60 - 1));
    }
  }
  LogInfo("rir-gen: wrote " + std::to_string(manifest.entries.size()) +
          " responses; largest estimate/target deviation " +
          Fmt("%.1f%%", 100 * worst));
  return kExitOk;
}

int Synth(const RunConfig& cfg) {
  const auto bank_dir = cfg.GetPath("paths.bank");
  const auto out_dir = cfg.GetPath("paths.data");
  const auto bank = ReadBankManifest(bank_dir / "bank.csv");
  const auto clean = ListWavFiles(cfg.GetPath("paths.clean"));
  IncompleteMarker marker(out_dir);
  cfg.Echo(out_dir, "synth");
  const auto pairs = SynthesizePairs(clean, bank, bank_dir, out_dir,
                                     cfg.Synth(), cfg.Workers());
  marker.Done();
  LogInfo("synth: " + std::to_string(pairs.rows.size()) + " pairs (" +
          std::to_string(pairs.Select(Split::kTrain).size()) + " train, " +
          std::to_string(pairs.Select(Split::kVal).size()) + " val, " +
          std::to_string(pairs.Select(Split::kTest).size()) + " test)");
  return kExitOk;
}

int Stats(const RunConfig& cfg) {
  const auto data = cfg.GetPath("paths.data");
  const auto pairs = ReadPairManifest(data / "pairs.csv");
  const auto train_rows = pairs.Select(Split::kTrain);
  if (train_rows.empty()) throw DataError("stats: no train rows in pairs.csv");
  cfg.Echo(data, "stats");
  // Validation features are cached too so that training reads only cache.
  const auto cache = data / "features";
  LoadCorpusFeatures(pairs.Select(Split::kVal), data, cache, cfg.Workers());
  const auto features =
      LoadCorpusFeatures(train_rows, data, cache, cfg.Workers());
  const auto stats = ComputeStats(features);
  WriteNormStats(data / "stats.csv", stats);
  int64_t frames = 0;
  for (const auto& f : features) frames += f.frames;
  LogInfo("stats: " + std::to_string(features.size()) + " utterances, " +
          std::to_string(frames) + " frames -> " +
          (data / "stats.csv").string());
  return kExitOk;
}

std::vector<Utterance> Normalized(const std::vector<FeaturePair>& fs,
                                  const NormStats& stats) {
  std::vector<Utterance> out;
  out.reserve(fs.size());
  for (const auto& f : fs) out.push_back(NormalizeFeatures(f, stats));
  return out;
}

int TrainCommand(const RunConfig& cfg) {
  const auto data = cfg.GetPath("paths.data");
  const auto model_cfg = cfg.Model();
  const auto train_cfg = cfg.Train();
  const auto pairs = ReadPairManifest(data / "pairs.csv");
  if (!fs::exists(data / "stats.csv")) {
    throw DataError((data / "stats.csv").string() +
                    " missing; run 'dereverb stats' first");
  }
  const auto stats = ReadNormStats(data / "stats.csv");
  const auto cache = data / "features";
  const auto train = Normalized(
      LoadCorpusFeatures(pairs.Select(Split::kTrain), data, cache,
                         cfg.Workers()),
      stats);
  const auto val = Normalized(
      LoadCorpusFeatures(pairs.Select(Split::kVal), data, cache,
                         cfg.Workers()),
      stats);
  IncompleteMarker marker(train_cfg.out_dir);
  cfg.Echo(train_cfg.out_dir, "train");
  LogInfo("train: " + DescribeConfig(model_cfg) + ", " +
          std::to_string(ParameterCount(model_cfg)) + " parameters, " +
          std::to_string(train.size()) + " train / " +
          std::to_string(val.size()) + " val utterances");
  const auto report =
      cfg.Get("train.precision") == "double"
          ? Train<double>(model_cfg, train_cfg, train, val, stats)
          : Train<float>(model_cfg, train_cfg, train, val, stats);
  std::ofstream summary(train_cfg.out_dir / "report.txt");
  summary << "best_epoch " << report.best_epoch << "\n"
          << "best_val_loss " << Fmt("%.9g", report.best_val_loss) << "\n"
          << "epochs " << report.epochs.size() << "\n"
          << "wall_seconds " << Fmt("%.1f", report.wall_seconds) << "\n"
          << "seed " << report.seed << "\n"
          << "config_hash " << report.config_hash << "\n";
  marker.Done();
  LogInfo("train: best epoch " + std::to_string(report.best_epoch) +
          " val loss " + Fmt("%.6f", report.best_val_loss));
  return kExitOk;
}

int EnhanceCommand(const RunConfig& cfg, const fs::path& input,
                   const fs::path& output) {
  const auto ckpt = LoadCheckpoint(
      cfg.Get("enhance.checkpoint").empty()
          ? cfg.GetPath("paths.run") / "best.ckpt"
          : cfg.GetPath("enhance.checkpoint"));
  if (ckpt.stats.empty()) {
    throw DataError("enhance: checkpoint carries no normalization stats");
  }
  const auto model = ModelFromCheckpoint<double>(ckpt);
  const int iterations = static_cast<int>(cfg.GetInt("enhance.griffin_lim"));
  if (iterations < 0) throw UsageError("enhance.griffin_lim must be >= 0");

  std::vector<std::pair<fs::path, fs::path>> jobs;
  if (fs::is_directory(input)) {
    fs::create_directories(output);
    for (const auto& f : ListWavFiles(input)) {
      jobs.emplace_back(f, output / f.filename());
    }
    if (jobs.empty()) throw DataError(input.string() + ": no .wav files");
    cfg.Echo(output, "enhance");
  } else {
    if (output.has_parent_path()) fs::create_directories(output.parent_path());
    jobs.emplace_back(input, output);
  }
  ParallelFor(jobs.size(), cfg.Workers(), [&](size_t i) {
    const auto& [src, dst] = jobs[i];
    const auto r = Enhance(model, ckpt.stats, ReadWav(src), iterations);
    if (r.rescaled) {
      LogWarning("enhance: " + dst.string() + " peaked at " +
                 Fmt("%.3f", r.raw_peak) + "; scaled to " +
                 Fmt("%.2f", kEnhancePeakLimit) + " to avoid clipping");
    }
    const int64_t clipped = WriteWav(dst, r.audio, WavFormat::kFloat32);
    if (clipped > 0) {
      LogWarning("enhance: " + dst.string() + ": " + std::to_string(clipped) +
                 " samples clipped");
    }
  });
  LogInfo("enhance: wrote " + std::to_string(jobs.size()) + " file(s)");
  return kExitOk;
}

int EvalCommand(const RunConfig& cfg, const fs::path& enhanced,
                const fs::path& report_path) {
  const auto data = cfg.GetPath("paths.data");
  const auto pairs = ReadPairManifest(data / "pairs.csv");
  Split split;
  try {
    split = ParseSplit(cfg.Get("eval.split"));
  } catch (const DataError& e) {
    throw UsageError(std::string("eval.split: ") + e.what());
  }
  const auto rows = pairs.Select(split);
  if (rows.empty()) {
    throw DataError("eval: no '" + cfg.Get("eval.split") +
                    "' rows in pairs.csv");
  }
  std::vector<EvalItem> items;
  for (const auto& r : rows) {
    items.push_back({r.pair_id, r.t60, data / r.clean, data / r.reverberant,
                     enhanced / (r.pair_id + ".wav")});
  }
  const auto report = EvaluateCorpus(items, cfg.Workers());
  const auto dir = report_path.has_parent_path() ? report_path.parent_path()
                                                 : fs::path(".");
  cfg.Echo(dir, "eval");
  std::ofstream out(report_path);
  WriteMetricReport(out, report);
  if (!out) throw DataError(report_path.string() + ": write failed");
  int failed = 0;
  for (const auto& r : report.rows) failed += r.ok ? 0 : 1;
  for (const auto& [key, b] : report.BucketMeans()) {
    LogInfo("eval: T60 " + Fmt("%.2f", key / 1000.0) + " s: n=" +
            std::to_string(b.count) + " STOI " + Fmt("%.3f", b.stoi) + " (" +
            Fmt("%+.3f", b.delta_stoi) + ") SRMR " + Fmt("%.2f", b.srmr) +
            " (" + Fmt("%+.2f", b.delta_srmr) + ")");
  }
  if (failed > 0) {
    LogWarning("eval: " + std::to_string(failed) + " of " +
               std::to_string(report.rows.size()) +
               " rows failed; see the status column");
  }
  return kExitOk;
}

int T60Command(const fs::path& file, std::ostream& out) {
  const auto audio = ReadWav(file);
  const auto est = EstimateT60(audio.samples, audio.sample_rate);
  out << "band_hz,t60_s\n";
  for (size_t b = 0; b < est.centers.size(); ++b) {
    out << est.centers[b] << "," << Fmt("%.4f", est.bands[b]) << "\n";
  }
  out << "fullband," << Fmt("%.4f", est.fullband) << "\n";
  return kExitOk;
}

int GradCheck(std::ostream& out) {
  bool ok = true;
  out << "check,entries,max_rel_error,tolerance,result\n";
  RunGradientSuite([&](const GradientCheckResult& r) {
    int64_t entries = 0;
    for (const auto& b : r.report.blocks) entries += b.checked;
    const bool pass = r.report.passed();
    ok = ok && pass;
    out << r.name << "," << entries << ","
        << Fmt("%.3e", r.report.max_rel_error()) << ","
        << Fmt("%.0e", r.report.tolerance) << "," << (pass ? "PASS" : "FAIL")
        << "\n";
    out.flush();
  });
  return ok ? kExitOk : kExitVerification;
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Speech dereverberation toolkit", "dereverb"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, "INI configuration file");
  std::map<std::string, std::string> flags;
  std::map<std::string, CLI::Option*> flag_options;
  for (const auto& k : ConfigSchema()) {
    flag_options[k.name] =
        app.add_option(std::string("--") + k.name, flags[k.name], k.help)
            ->group("Configuration (section.key)");
  }

  auto* params = app.add_subcommand("params", "parameter counts per variant");
  bool dry_run = false;
  auto* rir_gen = app.add_subcommand("rir-gen", "render the impulse-response bank");
  rir_gen->add_flag("--dry-run", dry_run,
                    "print corpus sizes without rendering");
  auto* synth = app.add_subcommand("synth", "convolve clean speech with the bank");
  auto* stats = app.add_subcommand("stats", "features and normalization statistics");
  auto* train = app.add_subcommand("train", "train a model");
  std::string enhance_in, enhance_out;
  auto* enhance = app.add_subcommand("enhance", "dereverberate a file or directory");
  enhance->add_option("input", enhance_in, "wav file or directory")->required();
  enhance->add_option("-o,--out", enhance_out, "output file or directory")
      ->required();
  std::string enhanced_dir, report_path;
  auto* eval = app.add_subcommand("eval", "STOI/SRMR report for a split");
  eval->add_option("--enhanced", enhanced_dir,
                   "directory of <pair_id>.wav outputs")
      ->required();
  eval->add_option("-o,--out", report_path, "report CSV")->required();
  std::string t60_file;
  auto* t60 = app.add_subcommand("t60", "estimate T60 of an impulse response");
  t60->add_option("file", t60_file, "impulse-response wav")->required();
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg.LoadFile(config_path);
    for (const auto& [name, opt] : flag_options) {
      if (opt->count() > 0) cfg.Set(name, flags[name]);
    }
    if (*params) return Params(out);
    if (*rir_gen) return RirGen(cfg, dry_run, out);
    if (*synth) return Synth(cfg);
    if (*stats) return Stats(cfg);
    if (*train) return TrainCommand(cfg);
    if (*enhance) return EnhanceCommand(cfg, enhance_in, enhance_out);
    if (*eval) return EvalCommand(cfg, enhanced_dir, report_path);
    if (*t60) return T60Command(t60_file, out);
    if (*gradcheck) return GradCheck(out);
    err << "error: no subcommand\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace dereverb::tool
