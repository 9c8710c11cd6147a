// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DEREVERB_MODEL_H_
#define DEREVERB_MODEL_H_

#include <array>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dereverb/nn.h"
#include "dereverb/rng.h"
#include "dereverb/tensor.h"

namespace dereverb {

enum class Variant {
  kProposed,           // conv context encoder + residual GRU decoder
  kProposedNoContext,  // residual GRU decoder fed by a linear input layer
  kGruBaseline,        // three plain GRU layers
  kWu2016,             // feedforward net on an 11-frame window
};

std::string VariantName(Variant v);
Variant ParseVariant(const std::string& name);

struct ModelConfig {
  Variant variant = Variant::kProposed;
  int64_t context = 11;  // conv kernel extent along time; odd
  int64_t bins = 257;
  int64_t conv_filters = 64;
  int64_t conv_freq_kernel = 21;
  int64_t conv_freq_stride = 2;
  int64_t hidden = 256;
  int64_t ff_hidden = 2048;
  int64_t ff_context = 11;  // frames in the feedforward input window; odd

  // Defaults for a variant (the GRU baseline uses 512 hidden units).
  static ModelConfig ForVariant(Variant v, int64_t context = 11);

  // Throws ContractError on an invalid combination.
  void Validate() const;

  // Width of the flattened encoder output per frame:
  // filters * ((bins - freq_kernel) / freq_stride + 1).
  int64_t EncoderWidth() const;

  bool operator==(const ModelConfig&) const = default;
};

std::string DescribeConfig(const ModelConfig& cfg);

// Names and shapes of every parameter tensor, in construction order, derived
// from the config alone.
std::vector<std::pair<std::string, Shape>> ParameterLayout(
    const ModelConfig& cfg);
int64_t ParameterCount(const ModelConfig& cfg);

// Per-bin mean/std of input (reverberant) and target (clean) log-magnitude.
struct NormStats {
  static constexpr double kStdFloor = 1e-8;
  std::vector<double> input_mean, input_std;
  std::vector<double> target_mean, target_std;

  bool empty() const { return input_mean.empty(); }
  int64_t bins() const { return static_cast<int64_t>(input_mean.size()); }
  bool operator==(const NormStats&) const = default;
};

enum class NormDirection { kInput, kTarget, kInvertTarget };

// In place on a row-major [frames x bins] buffer. kInput / kTarget compute
// (x - mean) / std with the matching statistics; kInvertTarget maps
// normalized predictions back with x * std + mean.
template <typename T>
void Normalize(std::span<T> frames, const NormStats& stats,
               NormDirection direction);

// One of the four architectures with its parameters.
//
// Sequences are [N x T x B] normalized log-magnitude frames; the output has
// the same shape. The proposed encoder zero-pads (context - 1) / 2 frames on
// both sides of the time axis so the output stays frame-aligned, runs a valid
// convolution with stride 2 along frequency, and flattens channel-major.
// Decoder (proposed variants), with x the raw input frame:
//   h1 = GRU1(enc(x))            [no-context: GRU1(f1(x))]
//   h2 = GRU2(f2(x) + g12(h1))
//   h3 = GRU3(f3(x) + g13(h1) + g23(h2))
//   y  = out(o1(h1) + o2(h2) + o3(h3))
// GRU states start at zero.
template <typename T>
class DereverbModel {
 public:
  static DereverbModel Build(const ModelConfig& cfg, Rng& rng);

  const ModelConfig& config() const { return cfg_; }
  const std::vector<NamedTensor<T>>& parameters() const { return params_; }
  int64_t CountParams() const;

  Tensor<T> Forward(Tape<T>& tape, const Tensor<T>& frames) const;

  // Inference on one utterance [T x B] -> [T x B]; T >= 1.
  Tensor<T> ForwardUtterance(const Tensor<T>& frames) const;

  // Encoder features [N x T x EncoderWidth()]; proposed variant only.
  Tensor<T> EncodeContext(Tape<T>& tape, const Tensor<T>& frames) const;

  // Wu2016 only: prediction for the center frame of an [ff_context x B]
  // window (edges already zero-padded by the caller).
  Tensor<T> Wu2016Forward(const Tensor<T>& window) const;

  void SetRequiresGrad(bool value) const;
  void ZeroGrad() const;

 private:
  DereverbModel() = default;
  void CheckFrames(const Tensor<T>& frames) const;
  Tensor<T> RecurrentDecoder(Tape<T>& tape, const Tensor<T>& frames,
                             const Tensor<T>& first_input) const;

  ModelConfig cfg_;
  nn::Conv2dParams<T> encoder_;
  nn::LinearParams<T> f1_, f2_, f3_, g12_, g13_, g23_;
  std::array<nn::LinearParams<T>, 3> skip_;  // o1, o2, o3
  std::array<nn::GruParams<T>, 3> gru_;
  nn::LinearParams<T> out_;
  std::array<nn::LinearParams<T>, 3> ff_;  // Wu2016 hidden layers
  std::vector<NamedTensor<T>> params_;
};

}  // namespace dereverb

#endif  // DEREVERB_MODEL_H_
