// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dereverb/model.h"

#include <sstream>

#include "dereverb/error.h"
#include "dereverb/ops.h"

namespace dereverb {

std::string VariantName(Variant v) {
  switch (v) {
    case Variant::kProposed:
      return "proposed";
    case Variant::kProposedNoContext:
      return "proposed-no-context";
    case Variant::kGruBaseline:
      return "gru-baseline";
    case Variant::kWu2016:
      return "wu2016-ff";
  }
  return "unknown";
}

Variant ParseVariant(const std::string& name) {
  for (Variant v : {Variant::kProposed, Variant::kProposedNoContext,
                    Variant::kGruBaseline, Variant::kWu2016}) {
    if (VariantName(v) == name) return v;
  }
  throw ContractError("unknown model variant '" + name +
                      "' (expected proposed, proposed-no-context, "
                      "gru-baseline or wu2016-ff)");
}

ModelConfig ModelConfig::ForVariant(Variant v, int64_t context) {
  ModelConfig cfg;
  cfg.variant = v;
  cfg.context = context;
  if (v == Variant::kGruBaseline) cfg.hidden = 512;
  return cfg;
}

void ModelConfig::Validate() const {
  auto fail = [&](const std::string& msg) {
    throw ContractError("invalid model config (" + VariantName(variant) +
                        "): " + msg);
  };
  if (bins < 1 || hidden < 1) fail("bins and hidden must be positive");
  switch (variant) {
    case Variant::kProposed:
      if (context < 1 || context % 2 == 0) {
        fail("context must be an odd positive integer, got " +
             std::to_string(context));
      }
      if (conv_filters < 1 || conv_freq_kernel < 1 || conv_freq_stride < 1) {
        fail("conv filters, kernel and stride must be positive");
      }
      if (conv_freq_kernel > bins) {
        fail("frequency kernel " + std::to_string(conv_freq_kernel) +
             " exceeds bins " + std::to_string(bins));
      }
      break;
    case Variant::kWu2016:
      if (ff_hidden < 1) fail("ff_hidden must be positive");
      if (ff_context < 1 || ff_context % 2 == 0) {
        fail("ff_context must be an odd positive integer");
      }
      break;
    case Variant::kProposedNoContext:
    case Variant::kGruBaseline:
      break;
  }
}

int64_t ModelConfig::EncoderWidth() const {
  return conv_filters * ((bins - conv_freq_kernel) / conv_freq_stride + 1);
}

std::string DescribeConfig(const ModelConfig& cfg) {
  std::ostringstream os;
  os << VariantName(cfg.variant) << " bins=" << cfg.bins;
  switch (cfg.variant) {
    case Variant::kProposed:
      os << " context=" << cfg.context << " filters=" << cfg.conv_filters
         << " kernel=(" << cfg.conv_freq_kernel << "," << cfg.context
         << ") hidden=" << cfg.hidden;
      break;
    case Variant::kProposedNoContext:
    case Variant::kGruBaseline:
      os << " hidden=" << cfg.hidden;
      break;
    case Variant::kWu2016:
      os << " window=" << cfg.ff_context << " hidden=" << cfg.ff_hidden;
      break;
  }
  return os.str();
}

std::vector<std::pair<std::string, Shape>> ParameterLayout(
    const ModelConfig& cfg) {
  cfg.Validate();
  std::vector<std::pair<std::string, Shape>> out;
  auto linear = [&](const std::string& name, int64_t in, int64_t o) {
    out.push_back({name + ".weight", {o, in}});
    out.push_back({name + ".bias", {o}});
  };
  auto gru = [&](const std::string& name, int64_t in, int64_t h) {
    for (const char* g : {".w_ir", ".w_iz", ".w_in"}) {
      out.push_back({name + g, {h, in}});
    }
    for (const char* g : {".w_hr", ".w_hz", ".w_hn"}) {
      out.push_back({name + g, {h, h}});
    }
  };
  const int64_t b = cfg.bins, h = cfg.hidden;
  switch (cfg.variant) {
    case Variant::kProposed:
    case Variant::kProposedNoContext:
      if (cfg.variant == Variant::kProposed) {
        out.push_back({"encoder.kernels",
                       {cfg.conv_filters, 1, cfg.conv_freq_kernel, cfg.context}});
        out.push_back({"encoder.bias", {cfg.conv_filters}});
        gru("gru1", cfg.EncoderWidth(), h);
      } else {
        linear("f1", b, h);
        gru("gru1", h, h);
      }
      linear("f2", b, h);
      linear("g12", h, h);
      gru("gru2", h, h);
      linear("f3", b, h);
      linear("g13", h, h);
      linear("g23", h, h);
      gru("gru3", h, h);
      linear("o1", h, h);
      linear("o2", h, h);
      linear("o3", h, h);
      linear("out", h, b);
      break;
    case Variant::kGruBaseline:
      gru("gru1", b, h);
      gru("gru2", h, h);
      gru("gru3", h, h);
      linear("out", h, b);
      break;
    case Variant::kWu2016:
      linear("ff1", cfg.ff_context * b, cfg.ff_hidden);
      linear("ff2", cfg.ff_hidden, cfg.ff_hidden);
      linear("ff3", cfg.ff_hidden, cfg.ff_hidden);
      linear("out", cfg.ff_hidden, b);
      break;
  }
  return out;
}

int64_t ParameterCount(const ModelConfig& cfg) {
  int64_t n = 0;
  for (const auto& [name, shape] : ParameterLayout(cfg)) n += NumElements(shape);
  return n;
}

template <typename T>
void Normalize(std::span<T> frames, const NormStats& stats,
               NormDirection direction) {
  if (stats.empty()) {
    throw ContractError("normalize: normalization statistics are missing");
  }
  const auto bins = static_cast<size_t>(stats.bins());
  if (frames.size() % bins != 0) {
    throw DimensionError("normalize: buffer of " +
                         std::to_string(frames.size()) +
                         " values is not a whole number of " +
                         std::to_string(bins) + "-bin frames");
  }
  const bool input = direction == NormDirection::kInput;
  const std::vector<double>& mean = input ? stats.input_mean : stats.target_mean;
  const std::vector<double>& sd = input ? stats.input_std : stats.target_std;
  for (size_t r = 0; r < frames.size() / bins; ++r) {
    T* row = frames.data() + r * bins;
    for (size_t b = 0; b < bins; ++b) {
      const double s = std::max(sd[b], NormStats::kStdFloor);
      const double x = static_cast<double>(row[b]);
      row[b] = static_cast<T>(direction == NormDirection::kInvertTarget
                                  ? x * s + mean[b]
                                  : (x - mean[b]) / s);
    }
  }
}

template <typename T>
DereverbModel<T> DereverbModel<T>::Build(const ModelConfig& cfg, Rng& rng) {
  cfg.Validate();
  DereverbModel m;
  m.cfg_ = cfg;
  const int64_t b = cfg.bins, h = cfg.hidden;
  auto& p = m.params_;
  auto linear = [&](nn::LinearParams<T>& layer, const std::string& name,
                    int64_t in, int64_t out) {
    layer = nn::MakeLinear<T>(in, out, /*bias=*/true, rng);
    nn::CollectParams(name, layer, p);
  };
  auto gru = [&](nn::GruParams<T>& layer, const std::string& name, int64_t in) {
    layer = nn::MakeGru<T>(in, h, rng);
    nn::CollectParams(name, layer, p);
  };
  switch (cfg.variant) {
    case Variant::kProposed:
    case Variant::kProposedNoContext:
      if (cfg.variant == Variant::kProposed) {
        m.encoder_ = nn::MakeConv2d<T>(1, cfg.conv_filters, cfg.conv_freq_kernel,
                                       cfg.context, {cfg.conv_freq_stride, 1},
                                       rng);
        nn::CollectParams("encoder", m.encoder_, p);
        gru(m.gru_[0], "gru1", cfg.EncoderWidth());
      } else {
        linear(m.f1_, "f1", b, h);
        gru(m.gru_[0], "gru1", h);
      }
      linear(m.f2_, "f2", b, h);
      linear(m.g12_, "g12", h, h);
      gru(m.gru_[1], "gru2", h);
      linear(m.f3_, "f3", b, h);
      linear(m.g13_, "g13", h, h);
      linear(m.g23_, "g23", h, h);
      gru(m.gru_[2], "gru3", h);
      linear(m.skip_[0], "o1", h, h);
      linear(m.skip_[1], "o2", h, h);
      linear(m.skip_[2], "o3", h, h);
      linear(m.out_, "out", h, b);
      break;
    case Variant::kGruBaseline:
      gru(m.gru_[0], "gru1", b);
      gru(m.gru_[1], "gru2", h);
      gru(m.gru_[2], "gru3", h);
      linear(m.out_, "out", h, b);
      break;
    case Variant::kWu2016:
      linear(m.ff_[0], "ff1", cfg.ff_context * b, cfg.ff_hidden);
      linear(m.ff_[1], "ff2", cfg.ff_hidden, cfg.ff_hidden);
      linear(m.ff_[2], "ff3", cfg.ff_hidden, cfg.ff_hidden);
      linear(m.out_, "out", cfg.ff_hidden, b);
      break;
  }
  return m;
}

template <typename T>
int64_t DereverbModel<T>::CountParams() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

template <typename T>
void DereverbModel<T>::SetRequiresGrad(bool value) const {
  for (const auto& p : params_) p.tensor.set_requires_grad(value);
}

template <typename T>
void DereverbModel<T>::ZeroGrad() const {
  for (const auto& p : params_) p.tensor.ZeroGrad();
}

template <typename T>
void DereverbModel<T>::CheckFrames(const Tensor<T>& frames) const {
  if (frames.rank() != 3 || frames.dim(2) != cfg_.bins) {
    throw DimensionError("model expects [N x T x " +
                         std::to_string(cfg_.bins) + "] frames, got " +
                         ShapeString(frames.shape()));
  }
}

template <typename T>
Tensor<T> DereverbModel<T>::EncodeContext(Tape<T>& tape,
                                          const Tensor<T>& frames) const {
  if (cfg_.variant != Variant::kProposed) {
    throw ContractError("EncodeContext: variant " + VariantName(cfg_.variant) +
                        " has no context encoder");
  }
  CheckFrames(frames);
  auto image = ops::FramesToImage(tape, frames, (cfg_.context - 1) / 2);
  auto maps = nn::Conv2dForward(tape, encoder_, image);
  return ops::ImageToFrames(tape, maps);
}

template <typename T>
Tensor<T> DereverbModel<T>::RecurrentDecoder(
    Tape<T>& tape, const Tensor<T>& frames,
    const Tensor<T>& first_input) const {
  auto h1 = nn::GruSequence(tape, gru_[0], first_input);
  auto i2 = ops::Add(tape, nn::LinearForward(tape, f2_, frames),
                     nn::LinearForward(tape, g12_, h1));
  auto h2 = nn::GruSequence(tape, gru_[1], i2);
  auto i3 = ops::Add(tape,
                     ops::Add(tape, nn::LinearForward(tape, f3_, frames),
                              nn::LinearForward(tape, g13_, h1)),
                     nn::LinearForward(tape, g23_, h2));
  auto h3 = nn::GruSequence(tape, gru_[2], i3);
  auto skip = ops::Add(tape,
                       ops::Add(tape, nn::LinearForward(tape, skip_[0], h1),
                                nn::LinearForward(tape, skip_[1], h2)),
                       nn::LinearForward(tape, skip_[2], h3));
  return nn::LinearForward(tape, out_, skip);
}

template <typename T>
Tensor<T> DereverbModel<T>::Forward(Tape<T>& tape,
                                    const Tensor<T>& frames) const {
  CheckFrames(frames);
  switch (cfg_.variant) {
    case Variant::kProposed:
      return RecurrentDecoder(tape, frames, EncodeContext(tape, frames));
    case Variant::kProposedNoContext:
      return RecurrentDecoder(tape, frames, nn::LinearForward(tape, f1_, frames));
    case Variant::kGruBaseline: {
      auto h = nn::GruSequence(tape, gru_[0], frames);
      h = nn::GruSequence(tape, gru_[1], h);
      h = nn::GruSequence(tape, gru_[2], h);
      return nn::LinearForward(tape, out_, h);
    }
    case Variant::kWu2016: {
      auto x = ops::ContextWindow(tape, frames, (cfg_.ff_context - 1) / 2);
      for (const auto& layer : ff_) {
        x = ops::Sigmoid(tape, nn::LinearForward(tape, layer, x));
      }
      return nn::LinearForward(tape, out_, x);
    }
  }
  throw ContractError("unreachable variant");
}

template <typename T>
Tensor<T> DereverbModel<T>::ForwardUtterance(const Tensor<T>& frames) const {
  if (frames.rank() != 2 || frames.dim(1) != cfg_.bins) {
    throw DimensionError("forward_utterance expects [T x " +
                         std::to_string(cfg_.bins) + "] frames, got " +
                         ShapeString(frames.shape()));
  }
  Tape<T> tape(/*recording=*/false);
  const int64_t steps = frames.dim(0);
  auto batched = Tensor<T>::FromData({1, steps, cfg_.bins},
                                     {frames.data().begin(), frames.data().end()});
  auto out = Forward(tape, batched);
  return Tensor<T>::FromData({steps, cfg_.bins},
                             {out.data().begin(), out.data().end()});
}

template <typename T>
Tensor<T> DereverbModel<T>::Wu2016Forward(const Tensor<T>& window) const {
  if (cfg_.variant != Variant::kWu2016) {
    throw ContractError("Wu2016Forward on variant " + VariantName(cfg_.variant));
  }
  if (window.rank() != 2 || window.dim(0) != cfg_.ff_context ||
      window.dim(1) != cfg_.bins) {
    throw DimensionError("wu2016 window must be [" +
                         std::to_string(cfg_.ff_context) + " x " +
                         std::to_string(cfg_.bins) + "], got " +
                         ShapeString(window.shape()));
  }
  Tape<T> tape(/*recording=*/false);
  auto x = Tensor<T>::FromData({1, cfg_.ff_context * cfg_.bins},
                               {window.data().begin(), window.data().end()});
  for (const auto& layer : ff_) {
    x = ops::Sigmoid(tape, nn::LinearForward(tape, layer, x));
  }
  auto y = nn::LinearForward(tape, out_, x);
  return Tensor<T>::FromData({cfg_.bins}, {y.data().begin(), y.data().end()});
}

template void Normalize(std::span<float>, const NormStats&, NormDirection);
template void Normalize(std::span<double>, const NormStats&, NormDirection);
template class DereverbModel<float>;
template class DereverbModel<double>;
template class DereverbModel<long double>;

}  // namespace dereverb
