// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "run_config.h"

#include <charconv>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "dereverb/error.h"

namespace dereverb::tool {
namespace fs = std::filesystem;

const std::vector<ConfigKey>& ConfigSchema() {
  static const std::vector<ConfigKey> schema = {
      {"paths.clean", "clean", "directory of clean 16 kHz speech"},
      {"paths.bank", "bank", "impulse-response bank directory"},
      {"paths.data", "data", "synthesized dataset directory"},
      {"paths.run", "run", "training output directory"},
      {"bank.t60_min", "0.2", "smallest target T60, s"},
      {"bank.t60_max", "2.0", "largest target T60, s"},
      {"bank.t60_step", "0.05", "T60 grid step, s"},
      {"bank.rirs_per_t60", "20", "responses per T60 value"},
      {"bank.seed", "1", "room sampling seed"},
      {"synth.utterances_per_rir", "50", "clean draws per response"},
      {"synth.val_fraction", "0.05", "share of pairs held out for validation"},
      {"synth.split", "train", "train (with val subset) or test"},
      {"synth.seed", "2", "utterance sampling and split seed"},
      {"model.variant", "proposed",
       "proposed | proposed-no-context | gru-baseline | wu2016-ff"},
      {"model.context", "11", "encoder context frames (odd)"},
      {"model.bins", "257", "frequency bins"},
      {"model.conv_filters", "64", "encoder filters"},
      {"model.conv_freq_kernel", "21", "encoder kernel extent in frequency"},
      {"model.conv_freq_stride", "2", "encoder stride in frequency"},
      {"model.hidden", "0", "GRU width; 0 = variant default"},
      {"model.ff_hidden", "2048", "feedforward width (wu2016)"},
      {"model.ff_context", "11", "feedforward input frames (wu2016)"},
      {"train.epochs", "100", "training epochs"},
      {"train.batch_size", "16", "utterances per batch"},
      {"train.learning_rate", "0.001", "Adam step size"},
      {"train.seed", "3", "initialization and shuffling seed"},
      {"train.prefetch", "2", "batches prepared ahead"},
      {"train.precision", "float", "float or double"},
      {"train.resume", "false", "continue from last.ckpt"},
      {"enhance.checkpoint", "",
       "model checkpoint; empty = <paths.run>/best.ckpt"},
      {"enhance.griffin_lim", "0", "phase refinement iterations"},
      {"eval.split", "test", "split of pairs.csv to score"},
      {"run.workers", "0", "threads for per-file stages; 0 = all cores"},
  };
  return schema;
}

RunConfig::RunConfig() {
  for (const auto& k : ConfigSchema()) values_[k.name] = k.default_value;
}

void RunConfig::Set(const std::string& name, const std::string& value) {
  auto it = values_.find(name);
  if (it == values_.end()) {
    throw UsageError("unknown configuration key '" + name + "'");
  }
  it->second = value;
}

void RunConfig::LoadFile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open config");
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_config(in);
  } catch (const CLI::Error& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section marks
    std::string key;
    for (const auto& p : item.parents) key += p + ".";
    key += item.name;
    std::string value;
    for (const auto& v : item.inputs) value += (value.empty() ? "" : " ") + v;
    try {
      Set(key, value);
    } catch (const UsageError& e) {
      throw UsageError(path.string() + ": " + e.what());
    }
  }
}

const std::string& RunConfig::Get(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw UsageError("unknown key '" + name + "'");
  return it->second;
}

int64_t RunConfig::GetInt(const std::string& name) const {
  const auto& s = Get(name);
  int64_t v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw UsageError(name + ": expected an integer, got '" + s + "'");
  }
  return v;
}

uint64_t RunConfig::GetSeed(const std::string& name) const {
  const auto& s = Get(name);
  uint64_t v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw UsageError(name + ": expected a non-negative integer, got '" + s +
                     "'");
  }
  return v;
}

double RunConfig::GetDouble(const std::string& name) const {
  const auto& s = Get(name);
  double v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw UsageError(name + ": expected a number, got '" + s + "'");
  }
  return v;
}

bool RunConfig::GetBool(const std::string& name) const {
  const auto& s = Get(name);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw UsageError(name + ": expected true or false, got '" + s + "'");
}

fs::path RunConfig::GetPath(const std::string& name) const {
  return fs::path(Get(name));
}

ModelConfig RunConfig::Model() const {
  Variant v;
  try {
    v = ParseVariant(Get("model.variant"));
  } catch (const std::exception& e) {
    throw UsageError(std::string("model.variant: ") + e.what());
  }
  ModelConfig cfg = ModelConfig::ForVariant(v, GetInt("model.context"));
  cfg.bins = GetInt("model.bins");
  cfg.conv_filters = GetInt("model.conv_filters");
  cfg.conv_freq_kernel = GetInt("model.conv_freq_kernel");
  cfg.conv_freq_stride = GetInt("model.conv_freq_stride");
  if (GetInt("model.hidden") > 0) cfg.hidden = GetInt("model.hidden");
  cfg.ff_hidden = GetInt("model.ff_hidden");
  cfg.ff_context = GetInt("model.ff_context");
  try {
    cfg.Validate();
  } catch (const ContractError& e) {
    throw UsageError(std::string("model: ") + e.what());
  }
  return cfg;
}

BankConfig RunConfig::Bank() const {
  BankConfig cfg;
  try {
    cfg.t60_grid = T60Grid(GetDouble("bank.t60_min"), GetDouble("bank.t60_max"),
                           GetDouble("bank.t60_step"));
  } catch (const ContractError& e) {
    throw UsageError(std::string("bank: ") + e.what());
  }
  cfg.rirs_per_t60 = static_cast<int>(GetInt("bank.rirs_per_t60"));
  if (cfg.rirs_per_t60 < 1) throw UsageError("bank.rirs_per_t60 must be >= 1");
  cfg.seed = GetSeed("bank.seed");
  return cfg;
}

SynthConfig RunConfig::Synth() const {
  SynthConfig cfg;
  cfg.utterances_per_rir = static_cast<int>(GetInt("synth.utterances_per_rir"));
  if (cfg.utterances_per_rir < 1) {
    throw UsageError("synth.utterances_per_rir must be >= 1");
  }
  cfg.val_fraction = GetDouble("synth.val_fraction");
  if (cfg.val_fraction < 0 || cfg.val_fraction > 1) {
    throw UsageError("synth.val_fraction must be in [0, 1]");
  }
  const auto& split = Get("synth.split");
  if (split != "train" && split != "test") {
    throw UsageError("synth.split must be train or test");
  }
  cfg.test_split = split == "test";
  cfg.seed = GetSeed("synth.seed");
  return cfg;
}

TrainConfig RunConfig::Train() const {
  TrainConfig cfg;
  cfg.epochs = static_cast<int>(GetInt("train.epochs"));
  cfg.batch_size = static_cast<int>(GetInt("train.batch_size"));
  cfg.learning_rate = GetDouble("train.learning_rate");
  cfg.seed = GetSeed("train.seed");
  cfg.prefetch = static_cast<int>(GetInt("train.prefetch"));
  cfg.resume = GetBool("train.resume");
  cfg.out_dir = GetPath("paths.run");
  if (cfg.epochs < 1) throw UsageError("train.epochs must be >= 1");
  if (cfg.batch_size < 1) throw UsageError("train.batch_size must be >= 1");
  if (cfg.learning_rate < 0) {
    throw UsageError("train.learning_rate must be >= 0");
  }
  const auto& precision = Get("train.precision");
  if (precision != "float" && precision != "double") {
    throw UsageError("train.precision must be float or double");
  }
  return cfg;
}

int RunConfig::Workers() const {
  const auto w = GetInt("run.workers");
  if (w < 0) throw UsageError("run.workers must be >= 0");
  return static_cast<int>(w);
}

std::string RunConfig::ToIni() const {
  std::ostringstream out;
  out << "# resolved dereverb configuration\n";
  std::string section;
  for (const auto& k : ConfigSchema()) {
    const std::string name = k.name;
    const auto dot = name.find('.');
    const std::string s = name.substr(0, dot);
    if (s != section) {
      out << (section.empty() ? "" : "\n") << "[" << s << "]\n";
      section = s;
    }
    out << name.substr(dot + 1) << " = " << values_.at(name) << "\n";
  }
  return out.str();
}

void RunConfig::Echo(const fs::path& dir, const std::string& stage) const {
  fs::create_directories(dir);
  const fs::path path = dir / ("dereverb-" + stage + ".ini");
  std::ofstream out(path);
  out << ToIni();
  if (!out) throw DataError(path.string() + ": write failed");
}

}  // namespace dereverb::tool
