// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Binary checkpoint format (little-endian):
//
//   "DRVCKPT\0"                      8-byte magic
//   u32 version                      kCheckpointVersion
//   u32 config_bytes, i64 x 9        ModelConfig fields in declaration order
//   i64 epoch, f64 val_loss, u64 seed, i64 optimizer_step,
//   i64 best_epoch, f64 best_val_loss
//   i64 bins, f64 x 4 x bins         NormStats (bins = 0 when absent)
//   u64 record_count, then per record:
//     u32 name_len, name, u8 dtype (0 = f32, 1 = f64), u32 rank,
//     i64 x rank dims, raw values
//
// Parameter records come first, in ParameterLayout order. Optimizer moments
// follow as "adam.m/<name>" and "adam.v/<name>".

#ifndef DEREVERB_CHECKPOINT_H_
#define DEREVERB_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dereverb/model.h"
#include "dereverb/nn.h"

namespace dereverb {

inline constexpr uint32_t kCheckpointVersion = 1;

struct TrainingMeta {
  int64_t epoch = 0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  uint64_t seed = 0;
  int64_t optimizer_step = 0;
  int64_t best_epoch = -1;
  double best_val_loss = std::numeric_limits<double>::infinity();
};

enum class DType : uint8_t { kFloat32 = 0, kFloat64 = 1 };

struct CheckpointRecord {
  std::string name;
  DType dtype = DType::kFloat32;
  Shape shape;
  std::vector<uint8_t> bytes;

  template <typename T>
  std::vector<T> Values() const;
};

struct Checkpoint {
  uint32_t version = kCheckpointVersion;
  ModelConfig config;
  TrainingMeta meta;
  NormStats stats;
  std::vector<CheckpointRecord> records;

  bool has_optimizer_state() const;
};

void SaveCheckpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

// Validates magic, version, config and that the parameter records match the
// layout implied by the stored config; when `expected` is given the stored
// config must equal it. Throws CheckpointError with the matching kind.
Checkpoint LoadCheckpoint(const std::filesystem::path& path,
                          const std::optional<ModelConfig>& expected = {});

std::vector<uint8_t> SerializeCheckpoint(const Checkpoint& ckpt);
Checkpoint ParseCheckpoint(const std::vector<uint8_t>& bytes,
                           const std::optional<ModelConfig>& expected = {});

template <typename T>
Checkpoint MakeCheckpoint(const DereverbModel<T>& model, const NormStats& stats,
                          const TrainingMeta& meta,
                          const nn::Adam<T>* optimizer = nullptr);

// Builds a model from the checkpoint's config and copies the stored values
// (converted to T when the dtype differs).
template <typename T>
DereverbModel<T> ModelFromCheckpoint(const Checkpoint& ckpt);

// Copies stored moments and step count into an optimizer over the same
// model. Throws CheckpointError(kShape) when the state is absent.
template <typename T>
void RestoreOptimizer(const Checkpoint& ckpt, nn::Adam<T>& optimizer);

}  // namespace dereverb

#endif  // DEREVERB_CHECKPOINT_H_
