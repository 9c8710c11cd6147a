// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Corpus construction: impulse-response banks, reverberant/clean pairs,
// log-magnitude features, normalization statistics and padded batches.
//
// On-disk layout (all manifest paths are relative to the directory holding
// the manifest):
//   <bank>/bank.csv, <bank>/rirs/<rir_id>.wav          float32 responses
//   <data>/pairs.csv, <data>/clean/<pair_id>.wav, <data>/reverb/<pair_id>.wav
//   <data>/features/<pair_id>.feat                     see WriteFeatures
//   <data>/stats.csv                                   see WriteNormStats

#ifndef DEREVERB_DATASET_H_
#define DEREVERB_DATASET_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dereverb/audio.h"
#include "dereverb/model.h"
#include "dereverb/rng.h"
#include "dereverb/room.h"
#include "dereverb/stft.h"
#include "dereverb/tensor.h"

namespace dereverb {

// lo, lo + step, ... up to hi inclusive (values rounded to 1e-9 s).
std::vector<double> T60Grid(double lo, double hi, double step);

struct BankConfig {
  std::vector<double> t60_grid;
  int rirs_per_t60 = 20;
  uint64_t seed = 0;
  RoomSampling ranges;
  int sample_rate = kCanonicalRate;
  int max_attempts = 100;  // room draws per response before giving up
};

struct BankEntry {
  std::string rir_id;
  std::filesystem::path file;  // relative to the bank directory
  double target_t60 = 0.0;
  double estimated_t60 = 0.0;  // fullband estimate; NaN if it failed
  RoomSpec room;               // beta filled in from the Sabine solve
  uint64_t seed = 0;           // stream the room was drawn from
  int attempts = 0;
};

struct BankManifest {
  std::vector<BankEntry> entries;
  // Throws DataError for an unknown id.
  const BankEntry& Find(const std::string& rir_id) const;
};

// Draws, renders and writes every response plus bank.csv under `root`.
// Response i uses the stream Rng::Derive(seed, i), so the result does not
// depend on the worker count. Throws DataError when a response still has no
// feasible room after max_attempts draws.
BankManifest GenerateBank(const BankConfig& config,
                          const std::filesystem::path& root, int workers = 0);

void WriteBankManifest(const std::filesystem::path& path,
                       const BankManifest& bank);
// Checks unique ids and, when `check_files` is set, that every referenced
// response exists and parses.
BankManifest ReadBankManifest(const std::filesystem::path& path,
                              bool check_files = true);
RoomImpulseResponse LoadRir(const std::filesystem::path& bank_root,
                            const BankEntry& entry);

enum class Split { kTrain, kVal, kTest };
std::string SplitName(Split split);
Split ParseSplit(const std::string& name);

struct PairRow {
  std::string pair_id;
  std::filesystem::path clean;        // level-matched copy, relative
  std::filesystem::path reverberant;  // relative
  std::filesystem::path source;       // original clean file, as given
  std::string rir_id;
  double t60 = 0.0;
  Split split = Split::kTrain;
  uint64_t seed = 0;
};

struct PairManifest {
  std::vector<PairRow> rows;
  std::vector<PairRow> Select(Split split) const;
};

struct SynthConfig {
  int utterances_per_rir = 50;
  double val_fraction = 0.05;
  bool test_split = false;  // label every row "test", no validation subset
  uint64_t seed = 0;
};

// Rows moved to validation: round(fraction * pairs), halves away from zero.
int64_t ValCount(int64_t pairs, double fraction);

// Sizes implied by a configuration, computed without rendering anything.
struct CorpusCounts {
  int64_t rirs = 0, pairs = 0, val = 0, train = 0;
};
CorpusCounts PlanCorpus(int64_t t60_values, int rirs_per_t60,
                        int utterances_per_rir, double val_fraction);

// Regular files ending in .wav (any case), sorted by path.
std::vector<std::filesystem::path> ListWavFiles(
    const std::filesystem::path& dir);

inline constexpr double kPairPeak = 0.9;

struct ReverberantPair {
  std::vector<double> clean;
  std::vector<double> reverberant;
};

// Convolves `clean` with `rir`, trims to the clean length, and scales both
// by one gain so the louder of the two peaks at kPairPeak.
ReverberantPair Reverberate(std::span<const double> clean,
                            std::span<const double> rir);

// For each response draws utterances_per_rir clean files with replacement
// (stream Rng::Derive(seed, response index)), convolves, and writes both the
// reverberant signal and a clean copy scaled by the same gain, chosen so the
// louder of the two peaks at 0.9. Unreadable clean files are dropped from the
// pool with a warning. Writes pairs.csv under `out_root`.
PairManifest SynthesizePairs(
    const std::vector<std::filesystem::path>& clean_files,
    const BankManifest& bank, const std::filesystem::path& bank_root,
    const std::filesystem::path& out_root, const SynthConfig& config,
    int workers = 0);

void WritePairManifest(const std::filesystem::path& path,
                       const PairManifest& pairs);
PairManifest ReadPairManifest(const std::filesystem::path& path);

// Raw (unnormalized) log-magnitude frames, row-major [frames x bins].
struct FeaturePair {
  std::string pair_id;
  int64_t frames = 0;
  int64_t bins = 0;
  std::vector<float> input;   // reverberant
  std::vector<float> target;  // clean
};

// Both signals are resampled to the STFT rate and must have equal length
// and at least one window of samples (DataError otherwise).
FeaturePair ExtractFeatures(const AudioBuffer& clean,
                            const AudioBuffer& reverberant,
                            const StftConfig& config = {});

// "DRVFEAT\0", u32 version, i64 frames, i64 bins, u32 id length, id, then
// float32 input and target arrays, little-endian.
void WriteFeatures(const std::filesystem::path& path, const FeaturePair& f);
FeaturePair ReadFeatures(const std::filesystem::path& path);

// Features for the rows of `pairs` (paths relative to `root`). Rows whose
// audio is too short or unreadable are skipped with a warning. When
// `cache_dir` is non-empty, existing .feat files are reused and new ones
// written there.
std::vector<FeaturePair> LoadCorpusFeatures(
    const std::vector<PairRow>& pairs, const std::filesystem::path& root,
    const std::filesystem::path& cache_dir, int workers = 0);

// Per-bin running mean and variance (Welford's update; Chan's rule for
// Merge). Population variance.
class RunningMoments {
 public:
  explicit RunningMoments(int64_t bins = 0);
  void Add(std::span<const float> frame);
  void Add(std::span<const double> frame);
  void Merge(const RunningMoments& other);
  int64_t count() const { return count_; }
  const std::vector<double>& mean() const { return mean_; }
  // sqrt(M2 / count), floored at NormStats::kStdFloor.
  std::vector<double> StdDev() const;

 private:
  int64_t count_ = 0;
  std::vector<double> mean_, m2_;
};

// One pass over every frame of the given features. Throws DataError when
// the list is empty or bins differ.
NormStats ComputeStats(const std::vector<FeaturePair>& features);

// CSV "bin,input_mean,input_std,target_mean,target_std", full precision.
void WriteNormStats(const std::filesystem::path& path, const NormStats& s);
NormStats ReadNormStats(const std::filesystem::path& path);

// Normalized features ready for batching.
struct Utterance {
  std::string id;
  int64_t frames = 0;
  int64_t bins = 0;
  std::vector<float> input, target;
};
Utterance NormalizeFeatures(const FeaturePair& f, const NormStats& stats);

template <typename T>
struct Batch {
  Tensor<T> inputs;   // [N x T_max x B]
  Tensor<T> targets;  // [N x T_max x B]
  Tensor<T> mask;     // [N x T_max], 1 for t < lengths[n]
  std::vector<int64_t> lengths;
  std::vector<size_t> items;  // indices into the utterance list

  int64_t valid_frames() const;
};

// Stacks the selected utterances, zero-padding to the longest one or to
// `pad_to` when that is larger.
template <typename T>
Batch<T> MakeBatch(std::span<const Utterance> utterances,
                   std::span<const size_t> indices, int64_t pad_to = 0);

// Groups items into batches of similar length. With an rng: shuffle, sort
// within pools of kBucketPool batches, then shuffle batch order. Without:
// sorted by (length, index) for a reproducible evaluation order.
inline constexpr int kBucketPool = 8;
std::vector<std::vector<size_t>> PlanBatches(std::span<const int64_t> lengths,
                                             int batch_size, Rng* rng);

}  // namespace dereverb

#endif  // DEREVERB_DATASET_H_
