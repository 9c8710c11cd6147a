// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dereverb/dataset.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <system_error>

#include "dereverb/error.h"
#include "dereverb/log.h"
#include "dereverb/parallel.h"

namespace dereverb {
namespace fs = std::filesystem;

namespace {

constexpr uint64_t kSplitStream = 0xFFFFFFFFull;
constexpr char kFeatureMagic[8] = {'D', 'R', 'V', 'F', 'E', 'A', 'T', '\0'};
constexpr uint32_t kFeatureVersion = 1;

// Shortest representation that parses back to the same double.
std::string Num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double ParseDouble(const std::string& s, const std::string& what) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DataError(what + ": bad number '" + s + "'");
  }
  return v;
}

uint64_t ParseU64(const std::string& s, const std::string& what) {
  uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DataError(what + ": bad integer '" + s + "'");
  }
  return v;
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string CsvCell(const std::string& s) {
  if (s.find_first_of(",\n\r") != std::string::npos) {
    throw DataError("manifest: value contains a comma or newline: " + s);
  }
  return s;
}

// Reads a CSV, checks the header and the width of every row.
std::vector<std::vector<std::string>> ReadCsv(const fs::path& path,
                                              const std::string& header) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open");
  std::string line;
  if (!std::getline(in, line) || line != header) {
    throw DataError(path.string() + ": expected header '" + header + "'");
  }
  const size_t width = SplitCsv(header).size();
  std::vector<std::vector<std::string>> rows;
  int64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = SplitCsv(line);
    if (cells.size() != width) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": expected " + std::to_string(width) + " columns");
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

void WriteText(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError(path.string() + ": write failed");
}

std::string RirId(double t60, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "t%04lld_r%02d",
                static_cast<long long>(std::llround(t60 * 1000)), index);
  return buf;
}

AudioBuffer ReadCanonical(const fs::path& path) {
  auto audio = ReadWav(path);
  if (audio.sample_rate != kCanonicalRate) {
    audio = Resample(audio, kCanonicalRate);
  }
  return audio;
}

template <typename V>
void PutRaw(std::vector<uint8_t>& out, const V& v) {
  const auto* p = reinterpret_cast<const uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(V));
}

}  // namespace

std::vector<double> T60Grid(double lo, double hi, double step) {
  if (!(step > 0) || !(lo > 0) || hi < lo) {
    throw ContractError("t60 grid: need 0 < lo <= hi and step > 0");
  }
  std::vector<double> grid;
  const auto count = static_cast<int64_t>(std::floor((hi - lo) / step + 1e-9));
  for (int64_t i = 0; i <= count; ++i) {
    grid.push_back(std::round((lo + static_cast<double>(i) * step) * 1e9) /
                   1e9);
  }
  return grid;
}

const BankEntry& BankManifest::Find(const std::string& rir_id) const {
  for (const auto& e : entries) {
    if (e.rir_id == rir_id) return e;
  }
  throw DataError("bank: unknown rir id '" + rir_id + "'");
}

BankManifest GenerateBank(const BankConfig& config, const fs::path& root,
                          int workers) {
  if (config.t60_grid.empty()) throw ContractError("bank: empty T60 grid");
  if (config.rirs_per_t60 < 1) {
    throw ContractError("bank: rirs_per_t60 must be >= 1");
  }
  BankManifest bank;
  for (double t60 : config.t60_grid) {
    for (int r = 0; r < config.rirs_per_t60; ++r) {
      BankEntry e;
      e.rir_id = RirId(t60, r);
      e.file = fs::path("rirs") / (e.rir_id + ".wav");
      e.target_t60 = t60;
      e.seed = Rng::Derive(config.seed, bank.entries.size());
      bank.entries.push_back(std::move(e));
    }
  }
  fs::create_directories(root / "rirs");
  ParallelFor(bank.entries.size(), workers, [&](size_t i) {
    BankEntry& e = bank.entries[i];
    Rng rng(e.seed);
    std::optional<RoomSpec> room;
    std::string last_error;
    for (int a = 1; a <= config.max_attempts && !room; ++a) {
      e.attempts = a;
      try {
        room = SampleRoom(rng, e.target_t60, config.ranges,
                          config.sample_rate);
      } catch (const DataError& err) {
        last_error = err.what();
      }
    }
    if (!room) {
      throw DataError("bank: " + e.rir_id + ": no feasible room after " +
                      std::to_string(config.max_attempts) +
                      " draws (last: " + last_error + ")");
    }
    e.room = *room;
    e.room.beta = room->ReflectionCoefficient();
    auto rir = ImageSourceRir(e.room);
    try {
      e.estimated_t60 = EstimateT60(rir.samples, rir.sample_rate).fullband;
    } catch (const DataError& err) {
      e.estimated_t60 = std::numeric_limits<double>::quiet_NaN();
      LogWarning("bank: " + e.rir_id + ": T60 estimate failed: " + err.what());
    }
    WriteWav(root / e.file, {std::move(rir.samples), rir.sample_rate},
             WavFormat::kFloat32);
  });
  WriteBankManifest(root / "bank.csv", bank);
  return bank;
}

namespace {
const char kBankHeader[] =
    "rir_id,path,target_t60,estimated_t60,room_x,room_y,room_z,src_x,src_y,"
    "src_z,mic_x,mic_y,mic_z,beta,sample_rate,seed,attempts";
const char kPairHeader[] = "pair_id,clean,reverberant,source,rir_id,t60,split,seed";
}  // namespace

void WriteBankManifest(const fs::path& path, const BankManifest& bank) {
  std::ostringstream out;
  out << kBankHeader << "\n";
  for (const auto& e : bank.entries) {
    out << CsvCell(e.rir_id) << "," << CsvCell(e.file.generic_string()) << ","
        << Num(e.target_t60) << "," << Num(e.estimated_t60);
    for (const auto* v : {&e.room.dims, &e.room.source, &e.room.mic}) {
      for (double c : *v) out << "," << Num(c);
    }
    out << "," << Num(e.room.beta.value_or(std::nan(""))) << ","
        << e.room.sample_rate << "," << e.seed << "," << e.attempts << "\n";
  }
  WriteText(path, out.str());
}

BankManifest ReadBankManifest(const fs::path& path, bool check_files) {
  BankManifest bank;
  std::set<std::string> ids;
  const std::string what = path.string();
  for (const auto& c : ReadCsv(path, kBankHeader)) {
    BankEntry e;
    e.rir_id = c[0];
    if (!ids.insert(e.rir_id).second) {
      throw DataError(what + ": duplicate rir id '" + e.rir_id + "'");
    }
    e.file = c[1];
    e.target_t60 = ParseDouble(c[2], what);
    e.estimated_t60 = ParseDouble(c[3], what);
    for (int a = 0; a < 3; ++a) {
      e.room.dims[a] = ParseDouble(c[4 + a], what);
      e.room.source[a] = ParseDouble(c[7 + a], what);
      e.room.mic[a] = ParseDouble(c[10 + a], what);
    }
    e.room.beta = ParseDouble(c[13], what);
    e.room.target_t60 = e.target_t60;
    e.room.sample_rate = static_cast<int>(ParseU64(c[14], what));
    e.seed = ParseU64(c[15], what);
    e.attempts = static_cast<int>(ParseU64(c[16], what));
    bank.entries.push_back(std::move(e));
  }
  if (check_files) {
    for (const auto& e : bank.entries) LoadRir(path.parent_path(), e);
  }
  return bank;
}

RoomImpulseResponse LoadRir(const fs::path& bank_root, const BankEntry& e) {
  auto audio = ReadWav(bank_root / e.file);
  RoomImpulseResponse rir;
  rir.samples = std::move(audio.samples);
  rir.sample_rate = audio.sample_rate;
  rir.room = e.room;
  return rir;
}

std::string SplitName(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split ParseSplit(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw DataError("unknown split '" + name + "'");
}

std::vector<PairRow> PairManifest::Select(Split split) const {
  std::vector<PairRow> out;
  for (const auto& r : rows) {
    if (r.split == split) out.push_back(r);
  }
  return out;
}

int64_t ValCount(int64_t pairs, double fraction) {
  if (fraction < 0 || fraction > 1) {
    throw ContractError("val fraction must be in [0, 1]");
  }
  return std::llround(fraction * static_cast<double>(pairs));
}

CorpusCounts PlanCorpus(int64_t t60_values, int rirs_per_t60,
                        int utterances_per_rir, double val_fraction) {
  CorpusCounts c;
  c.rirs = t60_values * rirs_per_t60;
  c.pairs = c.rirs * utterances_per_rir;
  c.val = ValCount(c.pairs, val_fraction);
  c.train = c.pairs - c.val;
  return c;
}

std::vector<fs::path> ListWavFiles(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw DataError(dir.string() + ": not a directory");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".wav") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

ReverberantPair Reverberate(std::span<const double> clean,
                            std::span<const double> rir) {
  ReverberantPair out;
  out.reverberant = LinearConvolve(clean, rir);
  out.reverberant.resize(clean.size());
  out.clean.assign(clean.begin(), clean.end());
  double peak = 0.0;
  for (double v : out.reverberant) peak = std::max(peak, std::abs(v));
  for (double v : out.clean) peak = std::max(peak, std::abs(v));
  const double gain = peak > 0 ? kPairPeak / peak : 1.0;
  for (double& v : out.clean) v *= gain;
  for (double& v : out.reverberant) v *= gain;
  return out;
}

PairManifest SynthesizePairs(const std::vector<fs::path>& clean_files,
                             const BankManifest& bank,
                             const fs::path& bank_root,
                             const fs::path& out_root,
                             const SynthConfig& config, int workers) {
  if (clean_files.empty()) throw DataError("synth: no clean files");
  if (bank.entries.empty()) throw DataError("synth: empty bank");
  if (config.utterances_per_rir < 1) {
    throw ContractError("synth: utterances_per_rir must be >= 1");
  }

  // Ingest the pool once; unreadable files are dropped before sampling so
  // the pair count stays exact.
  std::vector<std::optional<AudioBuffer>> loaded(clean_files.size());
  ParallelFor(clean_files.size(), workers, [&](size_t i) {
    try {
      auto audio = ReadCanonical(clean_files[i]);
      if (audio.samples.empty()) throw DataError("no samples");
      loaded[i] = std::move(audio);
    } catch (const DataError& e) {
      LogWarning("synth: skipping " + clean_files[i].string() + ": " +
                 e.what());
    }
  });
  std::vector<size_t> pool;
  for (size_t i = 0; i < loaded.size(); ++i) {
    if (loaded[i]) pool.push_back(i);
  }
  if (pool.empty()) throw DataError("synth: no readable clean files");

  PairManifest manifest;
  const int per_rir = config.utterances_per_rir;
  for (size_t r = 0; r < bank.entries.size(); ++r) {
    const auto& e = bank.entries[r];
    const uint64_t seed = Rng::Derive(config.seed, r);
    Rng rng(seed);
    for (int u = 0; u < per_rir; ++u) {
      PairRow row;
      char suffix[16];
      std::snprintf(suffix, sizeof(suffix), "_u%02d", u);
      row.pair_id = e.rir_id + suffix;
      row.source = clean_files[pool[rng.UniformInt(pool.size())]];
      row.clean = fs::path("clean") / (row.pair_id + ".wav");
      row.reverberant = fs::path("reverb") / (row.pair_id + ".wav");
      row.rir_id = e.rir_id;
      row.t60 = e.target_t60;
      row.split = config.test_split ? Split::kTest : Split::kTrain;
      row.seed = seed;
      manifest.rows.push_back(std::move(row));
    }
  }
  if (!config.test_split) {
    std::vector<size_t> order(manifest.rows.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(Rng::Derive(config.seed, kSplitStream));
    Shuffle(order, rng);
    const int64_t val = ValCount(static_cast<int64_t>(order.size()),
                                 config.val_fraction);
    for (int64_t i = 0; i < val; ++i) {
      manifest.rows[order[static_cast<size_t>(i)]].split = Split::kVal;
    }
  }

  std::vector<size_t> source_index(manifest.rows.size());
  for (size_t i = 0; i < manifest.rows.size(); ++i) {
    source_index[i] = static_cast<size_t>(
        std::find(clean_files.begin(), clean_files.end(),
                  manifest.rows[i].source) -
        clean_files.begin());
  }
  fs::create_directories(out_root / "clean");
  fs::create_directories(out_root / "reverb");
  // One work item per response; its rows are contiguous.
  ParallelFor(bank.entries.size(), workers, [&](size_t r) {
    const auto rir = LoadRir(bank_root, bank.entries[r]);
    if (rir.sample_rate != kCanonicalRate) {
      throw DataError("synth: " + bank.entries[r].rir_id + " is at " +
                      std::to_string(rir.sample_rate) + " Hz");
    }
    for (int u = 0; u < per_rir; ++u) {
      const size_t i = r * static_cast<size_t>(per_rir) + static_cast<size_t>(u);
      const auto& row = manifest.rows[i];
      const AudioBuffer& clean = *loaded[source_index[i]];
      auto [dry, wet] = Reverberate(clean.samples, rir.samples);
      WriteWav(out_root / row.clean, {std::move(dry), kCanonicalRate},
               WavFormat::kFloat32);
      WriteWav(out_root / row.reverberant, {std::move(wet), kCanonicalRate},
               WavFormat::kFloat32);
    }
  });
  WritePairManifest(out_root / "pairs.csv", manifest);
  return manifest;
}

void WritePairManifest(const fs::path& path, const PairManifest& pairs) {
  std::ostringstream out;
  out << kPairHeader << "\n";
  for (const auto& r : pairs.rows) {
    out << CsvCell(r.pair_id) << "," << CsvCell(r.clean.generic_string())
        << "," << CsvCell(r.reverberant.generic_string()) << ","
        << CsvCell(r.source.generic_string()) << "," << CsvCell(r.rir_id)
        << "," << Num(r.t60) << "," << SplitName(r.split) << "," << r.seed
        << "\n";
  }
  WriteText(path, out.str());
}

PairManifest ReadPairManifest(const fs::path& path) {
  PairManifest m;
  std::set<std::string> ids;
  const std::string what = path.string();
  for (const auto& c : ReadCsv(path, kPairHeader)) {
    PairRow r;
    r.pair_id = c[0];
    if (!ids.insert(r.pair_id).second) {
      throw DataError(what + ": duplicate pair id '" + r.pair_id + "'");
    }
    r.clean = c[1];
    r.reverberant = c[2];
    r.source = c[3];
    r.rir_id = c[4];
    r.t60 = ParseDouble(c[5], what);
    r.split = ParseSplit(c[6]);
    r.seed = ParseU64(c[7], what);
    m.rows.push_back(std::move(r));
  }
  return m;
}

FeaturePair ExtractFeatures(const AudioBuffer& clean,
                            const AudioBuffer& reverberant,
                            const StftConfig& config) {
  config.Validate();
  auto to_rate = [&](const AudioBuffer& a) {
    return a.sample_rate == config.sample_rate
               ? a
               : Resample(a, config.sample_rate);
  };
  const AudioBuffer c = to_rate(clean), r = to_rate(reverberant);
  if (c.samples.size() != r.samples.size()) {
    throw DataError("features: clean has " + std::to_string(c.samples.size()) +
                    " samples, reverberant " +
                    std::to_string(r.samples.size()));
  }
  if (c.samples.size() < static_cast<size_t>(config.window)) {
    throw DataError("features: shorter than one frame (" +
                    std::to_string(c.samples.size()) + " samples)");
  }
  const auto sc = Stft<double>(c.samples, c.sample_rate, config);
  const auto sr = Stft<double>(r.samples, r.sample_rate, config);
  FeaturePair f;
  f.frames = sc.frames;
  f.bins = sc.bins();
  const auto lc = LogMagnitude(sc), lr = LogMagnitude(sr);
  f.target.assign(lc.begin(), lc.end());
  f.input.assign(lr.begin(), lr.end());
  return f;
}

void WriteFeatures(const fs::path& path, const FeaturePair& f) {
  std::vector<uint8_t> out(kFeatureMagic, kFeatureMagic + 8);
  PutRaw(out, kFeatureVersion);
  PutRaw(out, f.frames);
  PutRaw(out, f.bins);
  PutRaw(out, static_cast<uint32_t>(f.pair_id.size()));
  out.insert(out.end(), f.pair_id.begin(), f.pair_id.end());
  for (const auto* v : {&f.input, &f.target}) {
    const auto* p = reinterpret_cast<const uint8_t*>(v->data());
    out.insert(out.end(), p, p + v->size() * sizeof(float));
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  // Write then rename so concurrent readers never see a partial file.
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream file(tmp, std::ios::binary);
    file.write(reinterpret_cast<const char*>(out.data()),
               static_cast<std::streamsize>(out.size()));
    if (!file) throw DataError(tmp.string() + ": write failed");
  }
  fs::rename(tmp, path);
}

FeaturePair ReadFeatures(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  size_t pos = 0;
  auto take = [&](void* dst, size_t n) {
    if (pos + n > bytes.size()) {
      throw DataError(path.string() + ": truncated feature file");
    }
    std::memcpy(dst, bytes.data() + pos, n);
    pos += n;
  };
  char magic[8];
  take(magic, 8);
  if (std::memcmp(magic, kFeatureMagic, 8) != 0) {
    throw DataError(path.string() + ": not a feature file");
  }
  uint32_t version = 0, id_len = 0;
  take(&version, 4);
  if (version != kFeatureVersion) {
    throw DataError(path.string() + ": unsupported feature version " +
                    std::to_string(version));
  }
  FeaturePair f;
  take(&f.frames, 8);
  take(&f.bins, 8);
  take(&id_len, 4);
  if (f.frames < 1 || f.bins < 1 || id_len > 4096) {
    throw DataError(path.string() + ": bad feature header");
  }
  f.pair_id.resize(id_len);
  take(f.pair_id.data(), id_len);
  const auto n = static_cast<size_t>(f.frames * f.bins);
  f.input.resize(n);
  f.target.resize(n);
  take(f.input.data(), n * sizeof(float));
  take(f.target.data(), n * sizeof(float));
  if (pos != bytes.size()) {
    throw DataError(path.string() + ": trailing bytes in feature file");
  }
  return f;
}

std::vector<FeaturePair> LoadCorpusFeatures(const std::vector<PairRow>& pairs,
                                            const fs::path& root,
                                            const fs::path& cache_dir,
                                            int workers) {
  std::vector<std::optional<FeaturePair>> out(pairs.size());
  ParallelFor(pairs.size(), workers, [&](size_t i) {
    const auto& row = pairs[i];
    const fs::path cached =
        cache_dir.empty() ? fs::path() : cache_dir / (row.pair_id + ".feat");
    try {
      if (!cached.empty() && fs::exists(cached)) {
        out[i] = ReadFeatures(cached);
        return;
      }
      auto f = ExtractFeatures(ReadWav(root / row.clean),
                               ReadWav(root / row.reverberant));
      f.pair_id = row.pair_id;
      if (!cached.empty()) WriteFeatures(cached, f);
      out[i] = std::move(f);
    } catch (const DataError& e) {
      LogWarning("features: skipping " + row.pair_id + ": " + e.what());
    }
  });
  std::vector<FeaturePair> features;
  for (auto& f : out) {
    if (f) features.push_back(std::move(*f));
  }
  return features;
}

RunningMoments::RunningMoments(int64_t bins)
    : mean_(static_cast<size_t>(bins), 0.0),
      m2_(static_cast<size_t>(bins), 0.0) {}

void RunningMoments::Add(std::span<const double> frame) {
  if (frame.size() != mean_.size()) {
    throw DimensionError("moments: frame has " + std::to_string(frame.size()) +
                         " bins, expected " + std::to_string(mean_.size()));
  }
  ++count_;
  const double inv = 1.0 / static_cast<double>(count_);
  for (size_t k = 0; k < frame.size(); ++k) {
    const double delta = frame[k] - mean_[k];
    mean_[k] += delta * inv;
    m2_[k] += delta * (frame[k] - mean_[k]);
  }
}

void RunningMoments::Add(std::span<const float> frame) {
  std::vector<double> tmp(frame.begin(), frame.end());
  Add(std::span<const double>(tmp));
}

void RunningMoments::Merge(const RunningMoments& other) {
  if (other.mean_.size() != mean_.size()) {
    throw DimensionError("moments: merging different bin counts");
  }
  if (other.count_ == 0) return;
  if (count_ == 0) {
    *this = other;
    return;
  }
  const auto na = static_cast<double>(count_);
  const auto nb = static_cast<double>(other.count_);
  const double n = na + nb;
  for (size_t k = 0; k < mean_.size(); ++k) {
    const double delta = other.mean_[k] - mean_[k];
    mean_[k] += delta * nb / n;
    m2_[k] += other.m2_[k] + delta * delta * na * nb / n;
  }
  count_ += other.count_;
}

std::vector<double> RunningMoments::StdDev() const {
  std::vector<double> out(mean_.size(), NormStats::kStdFloor);
  if (count_ == 0) return out;
  for (size_t k = 0; k < out.size(); ++k) {
    out[k] = std::max(std::sqrt(std::max(m2_[k], 0.0) /
                                static_cast<double>(count_)),
                      NormStats::kStdFloor);
  }
  return out;
}

NormStats ComputeStats(const std::vector<FeaturePair>& features) {
  if (features.empty()) throw DataError("stats: training split is empty");
  const int64_t bins = features.front().bins;
  RunningMoments in(bins), tg(bins);
  for (const auto& f : features) {
    if (f.bins != bins) {
      throw DataError("stats: " + f.pair_id + " has " +
                      std::to_string(f.bins) + " bins, expected " +
                      std::to_string(bins));
    }
    const auto b = static_cast<size_t>(bins);
    for (int64_t t = 0; t < f.frames; ++t) {
      const auto off = static_cast<size_t>(t) * b;
      in.Add(std::span<const float>(f.input.data() + off, b));
      tg.Add(std::span<const float>(f.target.data() + off, b));
    }
  }
  NormStats s;
  s.input_mean = in.mean();
  s.input_std = in.StdDev();
  s.target_mean = tg.mean();
  s.target_std = tg.StdDev();
  return s;
}

void WriteNormStats(const fs::path& path, const NormStats& s) {
  std::ostringstream out;
  out << "bin,input_mean,input_std,target_mean,target_std\n";
  for (int64_t k = 0; k < s.bins(); ++k) {
    const auto i = static_cast<size_t>(k);
    out << k << "," << Num(s.input_mean[i]) << "," << Num(s.input_std[i])
        << "," << Num(s.target_mean[i]) << "," << Num(s.target_std[i])
        << "\n";
  }
  WriteText(path, out.str());
}

NormStats ReadNormStats(const fs::path& path) {
  NormStats s;
  const std::string what = path.string();
  const auto rows =
      ReadCsv(path, "bin,input_mean,input_std,target_mean,target_std");
  for (size_t k = 0; k < rows.size(); ++k) {
    if (ParseU64(rows[k][0], what) != k) {
      throw DataError(what + ": bins out of order");
    }
    s.input_mean.push_back(ParseDouble(rows[k][1], what));
    s.input_std.push_back(ParseDouble(rows[k][2], what));
    s.target_mean.push_back(ParseDouble(rows[k][3], what));
    s.target_std.push_back(ParseDouble(rows[k][4], what));
  }
  if (s.empty()) throw DataError(what + ": no bins");
  return s;
}

Utterance NormalizeFeatures(const FeaturePair& f, const NormStats& stats) {
  Utterance u;
  u.id = f.pair_id;
  u.frames = f.frames;
  u.bins = f.bins;
  u.input = f.input;
  u.target = f.target;
  Normalize<float>(u.input, stats, NormDirection::kInput);
  Normalize<float>(u.target, stats, NormDirection::kTarget);
  return u;
}

template <typename T>
int64_t Batch<T>::valid_frames() const {
  int64_t n = 0;
  for (int64_t l : lengths) n += l;
  return n;
}

template <typename T>
Batch<T> MakeBatch(std::span<const Utterance> utterances,
                   std::span<const size_t> indices, int64_t pad_to) {
  if (indices.empty()) throw ContractError("batch: no items");
  const int64_t bins = utterances[indices[0]].bins;
  int64_t t_max = pad_to;
  for (size_t i : indices) {
    const auto& u = utterances[i];
    if (u.bins != bins) throw DimensionError("batch: bin counts differ");
    if (u.frames < 1) throw ContractError("batch: empty utterance " + u.id);
    t_max = std::max(t_max, u.frames);
  }
  const auto n = static_cast<int64_t>(indices.size());
  Batch<T> b;
  b.inputs = Tensor<T>::Zeros({n, t_max, bins});
  b.targets = Tensor<T>::Zeros({n, t_max, bins});
  b.mask = Tensor<T>::Zeros({n, t_max});
  for (int64_t j = 0; j < n; ++j) {
    const auto& u = utterances[indices[static_cast<size_t>(j)]];
    T* in = b.inputs.ptr() + j * t_max * bins;
    T* tg = b.targets.ptr() + j * t_max * bins;
    std::copy(u.input.begin(), u.input.end(), in);
    std::copy(u.target.begin(), u.target.end(), tg);
    std::fill_n(b.mask.ptr() + j * t_max, u.frames, T(1));
    b.lengths.push_back(u.frames);
    b.items.push_back(indices[static_cast<size_t>(j)]);
  }
  return b;
}

std::vector<std::vector<size_t>> PlanBatches(std::span<const int64_t> lengths,
                                             int batch_size, Rng* rng) {
  if (batch_size < 1) throw ContractError("batch size must be >= 1");
  std::vector<size_t> order(lengths.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto by_length = [&](size_t a, size_t b) {
    return lengths[a] != lengths[b] ? lengths[a] < lengths[b] : a < b;
  };
  const auto bs = static_cast<size_t>(batch_size);
  if (rng) {
    Shuffle(order, *rng);
    const size_t pool = bs * kBucketPool;
    for (size_t start = 0; start < order.size(); start += pool) {
      const auto end = order.begin() +
                       static_cast<std::ptrdiff_t>(
                           std::min(order.size(), start + pool));
      std::sort(order.begin() + static_cast<std::ptrdiff_t>(start), end,
                by_length);
    }
  } else {
    std::sort(order.begin(), order.end(), by_length);
  }
  std::vector<std::vector<size_t>> batches;
  for (size_t start = 0; start < order.size(); start += bs) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(
                                             std::min(order.size(),
                                                      start + bs)));
  }
  if (rng) Shuffle(batches, *rng);
  return batches;
}

#define DEREVERB_INSTANTIATE_BATCH(T)                                        \
  template struct Batch<T>;                                                  \
  template Batch<T> MakeBatch<T>(std::span<const Utterance>,                 \
                                 std::span<const size_t>, int64_t);

DEREVERB_INSTANTIATE_BATCH(float)
DEREVERB_INSTANTIATE_BATCH(double)

#undef DEREVERB_INSTANTIATE_BATCH

}  // namespace dereverb
