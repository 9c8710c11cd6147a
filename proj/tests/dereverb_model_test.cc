// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include <gtest/gtest.h>

#include "dereverb/checkpoint.h"
#include "dereverb/error.h"
#include "dereverb/gradcheck.h"
#include "dereverb/model.h"
#include "support/scratch_dir.h"
#include "support/test_signals.h"

namespace dereverb {
namespace {

using testing::RandomTensor;
using testing::ScratchDir;
using TensorD = Tensor<double>;

ModelConfig TinyConfig(Variant v) {
  ModelConfig cfg = ModelConfig::ForVariant(v, 3);
  cfg.bins = 33;
  cfg.conv_filters = 4;
  cfg.hidden = 8;
  cfg.ff_hidden = 6;
  cfg.ff_context = 5;
  return cfg;
}

constexpr Variant kAllVariants[] = {Variant::kProposed,
                                    Variant::kProposedNoContext,
                                    Variant::kGruBaseline, Variant::kWu2016};

struct Table1Row {
  Variant variant;
  int64_t context;
  int64_t params;
};

// Published parameter counts of the six compared models.
constexpr Table1Row kTable1[] = {
    {Variant::kWu2016, 11, 14711041},
    {Variant::kGruBaseline, 11, 4458753},
    {Variant::kProposedNoContext, 11, 1838593},
    {Variant::kProposed, 3, 7429121},
    {Variant::kProposed, 7, 7434497},
    {Variant::kProposed, 11, 7439873},
};

TEST(ParameterCount, LayoutReproducesPublishedCounts) {
  for (const auto& row : kTable1) {
    auto cfg = ModelConfig::ForVariant(row.variant, row.context);
    EXPECT_EQ(ParameterCount(cfg), row.params)
        << VariantName(row.variant) << " C=" << row.context;
  }
}

TEST(ParameterCount, AllocatedModelsMatchLayout) {
  for (const auto& row : kTable1) {
    Rng rng(1);
    auto cfg = ModelConfig::ForVariant(row.variant, row.context);
    auto model = DereverbModel<float>::Build(cfg, rng);
    EXPECT_EQ(model.CountParams(), row.params) << VariantName(row.variant);
    const auto layout = ParameterLayout(cfg);
    ASSERT_EQ(model.parameters().size(), layout.size());
    for (size_t k = 0; k < layout.size(); ++k) {
      EXPECT_EQ(model.parameters()[k].name, layout[k].first);
      EXPECT_EQ(model.parameters()[k].tensor.shape(), layout[k].second);
    }
  }
}

// 64 * ((257 - 21) / 2 + 1) = 64 * 119
TEST(ParameterCount, EncoderWidthIs7616) {
  EXPECT_EQ(ModelConfig{}.EncoderWidth(), 7616);
  Rng rng(2);
  auto model = DereverbModel<float>::Build(ModelConfig{}, rng);
  Tape<float> tape(false);
  auto feats = model.EncodeContext(tape, Tensor<float>::Zeros({1, 4, 257}));
  EXPECT_EQ(feats.shape(), (Shape{1, 4, 7616}));
}

TEST(ModelConfig, VariantNamesRoundTrip) {
  for (Variant v : kAllVariants) EXPECT_EQ(ParseVariant(VariantName(v)), v);
  EXPECT_THROW(ParseVariant("lstm"), ContractError);
}

TEST(ModelConfig, InvalidCombinationsAreRejected) {
  auto even = ModelConfig::ForVariant(Variant::kProposed, 4);
  EXPECT_THROW(even.Validate(), ContractError);
  auto wide = TinyConfig(Variant::kProposed);
  wide.conv_freq_kernel = 40;
  EXPECT_THROW(wide.Validate(), ContractError);
  Rng rng(3);
  EXPECT_THROW(DereverbModel<double>::Build(even, rng), ContractError);
  EXPECT_EQ(ModelConfig::ForVariant(Variant::kGruBaseline).hidden, 512);
}

TEST(Forward, TinyModelsPreserveShapeForAnyLength) {
  for (Variant v : kAllVariants) {
    Rng rng(4);
    auto model = DereverbModel<double>::Build(TinyConfig(v), rng);
    for (int64_t steps : {1, 2, 5, 17}) {
      auto x = RandomTensor<double>({steps, 33}, rng);
      auto y = model.ForwardUtterance(x);
      EXPECT_EQ(y.shape(), (Shape{steps, 33})) << VariantName(v);
      EXPECT_TRUE(y.AllFinite());
    }
  }
}

TEST(Forward, FullSizeModelGives100x257) {
  Rng rng(5);
  auto model = DereverbModel<float>::Build(ModelConfig{}, rng);
  auto x = RandomTensor<float>({100, 257}, rng);
  auto y = model.ForwardUtterance(x);
  EXPECT_EQ(y.shape(), (Shape{100, 257}));
  EXPECT_TRUE(y.AllFinite());
}

TEST(Forward, BinMismatchIsDimensionError) {
  Rng rng(6);
  auto model = DereverbModel<double>::Build(TinyConfig(Variant::kProposed), rng);
  EXPECT_THROW(model.ForwardUtterance(TensorD::Zeros({4, 32})), DimensionError);
}

TEST(Forward, RepeatedInferenceIsBitIdentical) {
  for (Variant v : kAllVariants) {
    Rng rng(7);
    auto model = DereverbModel<float>::Build(TinyConfig(v), rng);
    auto x = RandomTensor<float>({9, 33}, rng);
    auto a = model.ForwardUtterance(x);
    auto b = model.ForwardUtterance(x);
    for (int64_t i = 0; i < a.numel(); ++i) ASSERT_EQ(a.data()[i], b.data()[i]);
  }
}

// Prepending k zero frames is indistinguishable from the encoder's own zero
// padding, so the features shift by exactly k frames.
TEST(Encoder, ShiftingInputShiftsFeatures) {
  auto cfg = TinyConfig(Variant::kProposed);
  cfg.context = 5;
  Rng rng(8);
  auto model = DereverbModel<double>::Build(cfg, rng);
  const int64_t steps = 12, k = 3, width = cfg.EncoderWidth();
  auto x = RandomTensor<double>({1, steps, 33}, rng);
  std::vector<double> shifted(static_cast<size_t>(k * 33), 0.0);
  shifted.insert(shifted.end(), x.data().begin(), x.data().end());
  Tape<double> tape(false);
  auto fa = model.EncodeContext(tape, x);
  auto fb = model.EncodeContext(
      tape, TensorD::FromData({1, steps + k, 33}, std::move(shifted)));
  for (int64_t t = 0; t < steps; ++t)
    for (int64_t j = 0; j < width; ++j)
      ASSERT_EQ(fa.data()[t * width + j], fb.data()[(t + k) * width + j])
          << "frame " << t;
}

TEST(Encoder, OtherVariantsHaveNoEncoder) {
  Rng rng(9);
  auto model =
      DereverbModel<double>::Build(TinyConfig(Variant::kGruBaseline), rng);
  Tape<double> tape(false);
  EXPECT_THROW(model.EncodeContext(tape, TensorD::Zeros({1, 2, 33})),
               ContractError);
}

// Direct three-layer feedforward computation in long double.
std::vector<long double> FeedforwardOracle(const DereverbModel<double>& model,
                                           const std::vector<double>& window) {
  std::vector<long double> x(window.begin(), window.end());
  const auto& params = model.parameters();
  for (size_t layer = 0; layer < 4; ++layer) {
    const TensorD& w = params[2 * layer].tensor;
    const TensorD& b = params[2 * layer + 1].tensor;
    std::vector<long double> y(static_cast<size_t>(w.dim(0)));
    for (int64_t o = 0; o < w.dim(0); ++o) {
      long double acc = b.data()[o];
      for (int64_t i = 0; i < w.dim(1); ++i)
        acc += w.data()[o * w.dim(1) + i] * x[i];
      y[o] = layer < 3 ? 1.0L / (1.0L + std::exp(-acc)) : acc;
    }
    x = std::move(y);
  }
  return x;
}

TEST(Wu2016, MatchesLayerByLayerOracle) {
  Rng rng(10);
  auto model = DereverbModel<double>::Build(TinyConfig(Variant::kWu2016), rng);
  for (const auto& p : model.parameters())
    if (p.name.ends_with(".bias"))
      for (double& v : TensorD(p.tensor).data()) v = rng.Uniform(-0.5, 0.5);
  auto window = RandomTensor<double>({5, 33}, rng);
  auto y = model.Wu2016Forward(window);
  auto expect = FeedforwardOracle(
      model, {window.data().begin(), window.data().end()});
  ASSERT_EQ(y.numel(), 33);
  for (int i = 0; i < 33; ++i)
    EXPECT_NEAR(y.data()[i], static_cast<double>(expect[i]), 1e-13);
}

TEST(Wu2016, ZeroWeightsGiveOutputBias) {
  Rng rng(11);
  auto model = DereverbModel<double>::Build(TinyConfig(Variant::kWu2016), rng);
  for (const auto& p : model.parameters()) {
    const bool bias = p.name.ends_with(".bias");
    for (double& v : TensorD(p.tensor).data())
      v = bias ? rng.Uniform(-1, 1) : 0.0;
  }
  auto y = model.Wu2016Forward(RandomTensor<double>({5, 33}, rng));
  const TensorD& out_bias = model.parameters().back().tensor;
  for (int i = 0; i < 33; ++i) EXPECT_EQ(y.data()[i], out_bias.data()[i]);
}

// The sequence form pads with zero frames; each output frame equals the
// window form applied to the explicitly padded window around it.
TEST(Wu2016, SequenceFormMatchesPaddedWindows) {
  Rng rng(12);
  auto model = DereverbModel<double>::Build(TinyConfig(Variant::kWu2016), rng);
  const int64_t steps = 6;
  auto x = RandomTensor<double>({steps, 33}, rng);
  auto y = model.ForwardUtterance(x);
  for (int64_t t = 0; t < steps; ++t) {
    std::vector<double> window;
    for (int64_t s = t - 2; s <= t + 2; ++s)
      for (int64_t b = 0; b < 33; ++b)
        window.push_back(s < 0 || s >= steps ? 0.0 : x.data()[s * 33 + b]);
    auto w = model.Wu2016Forward(TensorD::FromData({5, 33}, window));
    for (int64_t b = 0; b < 33; ++b)
      EXPECT_NEAR(y.data()[t * 33 + b], w.data()[b], 1e-13);
  }
}

TEST(Wu2016, WrongWindowLengthIsDimensionError) {
  Rng rng(13);
  auto model = DereverbModel<double>::Build(TinyConfig(Variant::kWu2016), rng);
  EXPECT_THROW(model.Wu2016Forward(TensorD::Zeros({4, 33})), DimensionError);
}

template <typename U, typename T>
Tensor<U> Convert(const Tensor<T>& t) {
  return Tensor<U>::FromData(t.shape(),
                             std::vector<U>(t.data().begin(), t.data().end()));
}

template <typename U, typename T>
DereverbModel<U> ConvertModel(const DereverbModel<T>& model) {
  Rng unused(0);
  auto out = DereverbModel<U>::Build(model.config(), unused);
  for (size_t k = 0; k < model.parameters().size(); ++k) {
    Tensor<U> dst = out.parameters()[k].tensor;
    const auto src = model.parameters()[k].tensor.data();
    std::copy(src.begin(), src.end(), dst.data().begin());
  }
  return out;
}

// Deep gated paths leave some entries with gradients near 1e-9 on a loss of
// order 1, where double-precision differences carry roundoff of the same
// size. The double reverse pass is therefore compared with fourth-order
// central differences of the identical problem evaluated in long double.
TEST(ModelGradients, TinyModelsPassFiniteDifferenceCheck) {
  for (Variant v : kAllVariants) {
    Rng rng(14);
    auto model = DereverbModel<double>::Build(TinyConfig(v), rng);
    for (const auto& p : model.parameters())
      if (p.name.ends_with(".bias"))
        for (double& b : TensorD(p.tensor).data()) b = rng.Uniform(-0.2, 0.2);
    auto wide = ConvertModel<long double>(model);
    auto x = RandomTensor<double>({2, 4, 33}, rng);
    auto target = RandomTensor<double>({2, 4, 33}, rng);
    auto mask = TensorD::FromData({2, 4}, {1, 1, 1, 1, 1, 1, 0, 0});
    auto xl = Convert<long double>(x);
    auto tl = Convert<long double>(target);
    auto ml = Convert<long double>(mask);
    auto report = ReferenceDiffCheck<double, long double>(
        [&](Tape<double>& tape) {
          return nn::MaskedMse(tape, model.Forward(tape, x), target, mask);
        },
        model.parameters(),
        [&](Tape<long double>& tape) {
          return nn::MaskedMse(tape, wide.Forward(tape, xl), tl, ml);
        },
        wide.parameters(), {.epsilon = 1e-3, .tolerance = 1e-6, .order = 4});
    EXPECT_EQ(report.blocks.size(), model.parameters().size());
    for (const auto& b : report.blocks)
      EXPECT_LE(b.max_rel_error, 1e-6) << VariantName(v) << " " << b.name;
  }
}

NormStats ToyStats(int64_t bins, Rng& rng) {
  NormStats s;
  for (int64_t b = 0; b < bins; ++b) {
    s.input_mean.push_back(rng.Uniform(-5, 5));
    s.input_std.push_back(rng.Uniform(0.1, 3));
    s.target_mean.push_back(rng.Uniform(-5, 5));
    s.target_std.push_back(rng.Uniform(0.1, 3));
  }
  return s;
}

TEST(Normalize, TargetThenInvertIsIdentity) {
  Rng rng(15);
  auto stats = ToyStats(7, rng);
  auto x = RandomTensor<double>({5, 7}, rng, 10.0);
  std::vector<double> y(x.data().begin(), x.data().end());
  Normalize<double>(y, stats, NormDirection::kTarget);
  Normalize<double>(y, stats, NormDirection::kInvertTarget);
  for (size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], x.data()[i], 1e-12);
}

TEST(Normalize, HandValuesPerDirection) {
  NormStats s;
  s.input_mean = {1.0, -2.0};
  s.input_std = {2.0, 0.5};
  s.target_mean = {0.0, 10.0};
  s.target_std = {4.0, 1.0};
  std::vector<double> in = {3.0, -1.0};
  Normalize<double>(in, s, NormDirection::kInput);
  EXPECT_DOUBLE_EQ(in[0], 1.0);
  EXPECT_DOUBLE_EQ(in[1], 2.0);
  std::vector<double> tg = {2.0, 7.0};
  Normalize<double>(tg, s, NormDirection::kTarget);
  EXPECT_DOUBLE_EQ(tg[0], 0.5);
  EXPECT_DOUBLE_EQ(tg[1], -3.0);
  std::vector<double> inv = {0.5, -3.0};
  Normalize<double>(inv, s, NormDirection::kInvertTarget);
  EXPECT_DOUBLE_EQ(inv[0], 2.0);
  EXPECT_DOUBLE_EQ(inv[1], 7.0);
}

TEST(Normalize, ZeroStdIsFlooredNotDividedBy) {
  NormStats s;
  s.input_mean = s.target_mean = {3.0};
  s.input_std = s.target_std = {0.0};
  std::vector<float> x = {3.0f, 3.0f};
  Normalize<float>(x, s, NormDirection::kInput);
  EXPECT_EQ(x[0], 0.0f);
  std::vector<double> y = {3.0 + 1e-9};
  Normalize<double>(y, s, NormDirection::kTarget);
  EXPECT_TRUE(std::isfinite(y[0]));
  EXPECT_NEAR(y[0], 0.1, 1e-6);
}

TEST(Normalize, MissingStatsAndBinMismatchAreErrors) {
  std::vector<double> x(6, 0.0);
  EXPECT_THROW(Normalize<double>(x, NormStats{}, NormDirection::kInput),
               ContractError);
  Rng rng(16);
  auto s = ToyStats(4, rng);
  EXPECT_THROW(Normalize<double>(x, s, NormDirection::kInput), DimensionError);
}

std::vector<uint8_t> ReadBytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void WriteBytes(const std::filesystem::path& p, const std::vector<uint8_t>& b) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(b.data()),
            static_cast<std::streamsize>(b.size()));
}

CheckpointError::Kind LoadErrorKind(const std::filesystem::path& p,
                                    std::optional<ModelConfig> expect = {}) {
  try {
    LoadCheckpoint(p, expect);
  } catch (const CheckpointError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "load succeeded";
  return CheckpointError::Kind::kBadMagic;
}

class CheckpointTest : public ::testing::Test {
 protected:
  CheckpointTest() : dir_("ckpt") {}

  Checkpoint Make(Variant v, bool with_optimizer) {
    Rng rng(17);
    model_ = std::make_unique<DereverbModel<float>>(
        DereverbModel<float>::Build(TinyConfig(v), rng));
    stats_ = ToyStats(33, rng);
    TrainingMeta meta{.epoch = 7, .val_loss = 0.25, .seed = 42,
                      .best_epoch = 5, .best_val_loss = 0.2};
    if (!with_optimizer) return MakeCheckpoint(*model_, stats_, meta);
    nn::Adam<float> opt(model_->parameters());
    for (const auto& p : model_->parameters())
      for (float& g : p.tensor.grad()) g = static_cast<float>(rng.Normal());
    opt.Step();
    opt.Step();
    return MakeCheckpoint(*model_, stats_, meta, &opt);
  }

  ScratchDir dir_;
  std::unique_ptr<DereverbModel<float>> model_;
  NormStats stats_;
};

TEST_F(CheckpointTest, SaveLoadSaveIsByteIdentical) {
  for (Variant v : kAllVariants) {
    auto ckpt = Make(v, true);
    SaveCheckpoint(dir_ / "a.ckpt", ckpt);
    SaveCheckpoint(dir_ / "b.ckpt", LoadCheckpoint(dir_ / "a.ckpt"));
    EXPECT_EQ(ReadBytes(dir_ / "a.ckpt"), ReadBytes(dir_ / "b.ckpt"))
        << VariantName(v);
  }
}

TEST_F(CheckpointTest, RestoredModelForwardIsBitIdentical) {
  auto ckpt = Make(Variant::kProposed, false);
  SaveCheckpoint(dir_ / "m.ckpt", ckpt);
  auto loaded = LoadCheckpoint(dir_ / "m.ckpt", TinyConfig(Variant::kProposed));
  auto restored = ModelFromCheckpoint<float>(loaded);
  Rng rng(18);
  auto x = RandomTensor<float>({11, 33}, rng);
  auto a = model_->ForwardUtterance(x);
  auto b = restored.ForwardUtterance(x);
  for (int64_t i = 0; i < a.numel(); ++i) ASSERT_EQ(a.data()[i], b.data()[i]);
  EXPECT_EQ(loaded.stats, stats_);
  EXPECT_EQ(loaded.meta.epoch, 7);
  EXPECT_EQ(loaded.meta.seed, 42u);
  EXPECT_EQ(loaded.meta.best_epoch, 5);
  EXPECT_FALSE(loaded.has_optimizer_state());
}

TEST_F(CheckpointTest, OptimizerStateRoundTrips) {
  auto ckpt = Make(Variant::kGruBaseline, true);
  EXPECT_TRUE(ckpt.has_optimizer_state());
  EXPECT_EQ(ckpt.meta.optimizer_step, 2);
  SaveCheckpoint(dir_ / "o.ckpt", ckpt);
  auto loaded = LoadCheckpoint(dir_ / "o.ckpt");
  auto model = ModelFromCheckpoint<float>(loaded);
  nn::Adam<float> opt(model.parameters());
  RestoreOptimizer(loaded, opt);
  EXPECT_EQ(opt.step_count(), 2);
  auto again = MakeCheckpoint(model, loaded.stats, loaded.meta, &opt);
  EXPECT_EQ(SerializeCheckpoint(again), SerializeCheckpoint(ckpt));
}

TEST_F(CheckpointTest, DoubleModelLoadsFloatCheckpoint) {
  auto ckpt = Make(Variant::kWu2016, false);
  auto model = ModelFromCheckpoint<double>(ckpt);
  const auto& a = model_->parameters();
  const auto& b = model.parameters();
  for (size_t k = 0; k < a.size(); ++k)
    for (int64_t i = 0; i < a[k].tensor.numel(); ++i)
      ASSERT_EQ(static_cast<double>(a[k].tensor.data()[i]),
                b[k].tensor.data()[i]);
}

TEST_F(CheckpointTest, CorruptFilesGiveDistinctErrors) {
  using Kind = CheckpointError::Kind;
  SaveCheckpoint(dir_ / "good.ckpt", Make(Variant::kProposed, true));
  const auto good = ReadBytes(dir_ / "good.ckpt");

  auto bytes = good;
  bytes[0] = 'X';
  WriteBytes(dir_ / "magic.ckpt", bytes);
  EXPECT_EQ(LoadErrorKind(dir_ / "magic.ckpt"), Kind::kBadMagic);

  bytes = good;
  bytes[8] = 99;  // version
  WriteBytes(dir_ / "version.ckpt", bytes);
  EXPECT_EQ(LoadErrorKind(dir_ / "version.ckpt"), Kind::kVersion);

  for (size_t keep : {size_t{4}, size_t{40}, good.size() / 2, good.size() - 1}) {
    WriteBytes(dir_ / "short.ckpt", {good.begin(), good.begin() + keep});
    EXPECT_EQ(LoadErrorKind(dir_ / "short.ckpt"), Kind::kTruncated) << keep;
  }

  // Header edited to claim context 5: the records no longer fit the layout.
  bytes = good;
  const size_t context_offset = 8 + 4 + 4 + 8;
  ASSERT_EQ(bytes[context_offset], 3);
  bytes[context_offset] = 5;
  WriteBytes(dir_ / "edited.ckpt", bytes);
  EXPECT_EQ(LoadErrorKind(dir_ / "edited.ckpt"), Kind::kShape);

  // Header edited to an even context is an invalid config.
  bytes[context_offset] = 4;
  WriteBytes(dir_ / "even.ckpt", bytes);
  EXPECT_EQ(LoadErrorKind(dir_ / "even.ckpt"), Kind::kConfig);

  auto other = TinyConfig(Variant::kProposed);
  other.hidden = 16;
  EXPECT_EQ(LoadErrorKind(dir_ / "good.ckpt", other), Kind::kConfig);
  EXPECT_NO_THROW(LoadCheckpoint(dir_ / "good.ckpt",
                                 TinyConfig(Variant::kProposed)));
}

TEST_F(CheckpointTest, MissingFileIsDataError) {
  EXPECT_THROW(LoadCheckpoint(dir_ / "absent.ckpt"), DataError);
}

}  // namespace
}  // namespace dereverb
