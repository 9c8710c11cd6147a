// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DEREVERB_TRAIN_H_
#define DEREVERB_TRAIN_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dereverb/dataset.h"
#include "dereverb/model.h"

namespace dereverb {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 16;
  double learning_rate = 1e-3;
  uint64_t seed = 0;
  int prefetch = 2;  // batches prepared ahead of the optimizer
  // Checkpoints and the epoch log go here; empty disables all file output.
  std::filesystem::path out_dir;
  bool resume = false;  // continue from out_dir/last.ckpt when present
};

struct EpochRecord {
  int64_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
  bool improved = false;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int64_t best_epoch = -1;
  double best_val_loss = 0.0;
  double wall_seconds = 0.0;
  uint64_t seed = 0;
  std::string config_hash;
};

// 64-bit FNV-1a over a canonical text form of both configs, as hex.
std::string ConfigHash(const ModelConfig& model, const TrainConfig& train);

// Frame-weighted mean masked MSE over `data` (inference only).
template <typename T>
double EvaluateLoss(const DereverbModel<T>& model,
                    const std::vector<Utterance>& data, int batch_size);

// Adam training with per-epoch evaluation on `val`. Epoch e shuffles with
// Rng::Derive(seed, 1000 + e); initial weights come from Rng::Derive(seed, 0).
// The epoch train loss is the frame-weighted mean of the batch losses seen
// during the epoch. Selection uses the validation loss, or the train loss
// when `val` is empty. With an out_dir, writes last.ckpt every epoch (with
// optimizer state), best.ckpt on every improvement (parameters only), and
// train_log.csv. Throws NumericError naming epoch and batch on a non-finite
// loss or gradient.
template <typename T>
TrainReport Train(const ModelConfig& model_config, const TrainConfig& config,
                  const std::vector<Utterance>& train,
                  const std::vector<Utterance>& val, const NormStats& stats);

void WriteTrainLog(const std::filesystem::path& path,
                   const TrainReport& report);
std::vector<EpochRecord> ReadTrainLog(const std::filesystem::path& path);

}  // namespace dereverb

#endif  // DEREVERB_TRAIN_H_
