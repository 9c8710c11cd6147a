// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dereverb/verify.h"

#include <algorithm>

#include "dereverb/model.h"
#include "dereverb/nn.h"
#include "dereverb/ops.h"
#include "dereverb/rng.h"

namespace dereverb {
namespace {

constexpr GradCheckOptions kOptions{.epsilon = 1e-5, .tolerance = 1e-6};
// Gradients near 5e-8 appear in the full models, below what a two-point
// difference resolves to 1e-6 at any step (truncation above 1e-5, long double
// roundoff below). The fourth-order stencil at a wider step does.
constexpr GradCheckOptions kModelOptions{
    .epsilon = 1e-3, .tolerance = 1e-6, .order = 4};

Tensor<double> Random(const Shape& shape, Rng& rng, double scale,
                      bool requires_grad = false) {
  std::vector<double> v(static_cast<size_t>(NumElements(shape)));
  for (double& x : v) x = rng.Uniform(-scale, scale);
  return Tensor<double>::FromData(shape, std::move(v), requires_grad);
}

template <typename T>
Tensor<T> WeightedSum(Tape<T>& tape, const Tensor<T>& y, const Tensor<T>& w) {
  return ops::Sum(tape, ops::Hadamard(tape, y, w));
}

template <typename U>
Tensor<U> Convert(const Tensor<double>& t) {
  return Tensor<U>::FromData(t.shape(),
                             std::vector<U>(t.data().begin(), t.data().end()));
}

ModelConfig TinyConfig(Variant v) {
  ModelConfig cfg = ModelConfig::ForVariant(v, 3);
  cfg.bins = 33;
  cfg.conv_filters = 4;
  cfg.hidden = 8;
  cfg.ff_hidden = 6;
  cfg.ff_context = 5;
  return cfg;
}

// Deep gated paths leave gradients near 1e-9 on an O(1) loss, where double
// differences carry roundoff of the same size; the differences are taken in
// long double on a copy of the model instead.
GradCheckReport CheckModel(Variant v) {
  Rng rng(14);
  auto model = DereverbModel<double>::Build(TinyConfig(v), rng);
  for (const auto& p : model.parameters()) {
    if (p.name.ends_with(".bias")) {
      Tensor<double> b = p.tensor;
      for (double& x : b.data()) x = rng.Uniform(-0.2, 0.2);
    }
  }
  Rng unused(0);
  auto wide = DereverbModel<long double>::Build(model.config(), unused);
  for (size_t k = 0; k < model.parameters().size(); ++k) {
    Tensor<long double> dst = wide.parameters()[k].tensor;
    const auto src = model.parameters()[k].tensor.data();
    std::copy(src.begin(), src.end(), dst.data().begin());
  }
  model.SetRequiresGrad(true);
  wide.SetRequiresGrad(true);
  const auto x = Random({2, 4, 33}, rng, 1.0);
  const auto target = Random({2, 4, 33}, rng, 1.0);
  const auto mask =
      Tensor<double>::FromData({2, 4}, {1, 1, 1, 1, 1, 1, 0, 0});
  const auto xl = Convert<long double>(x), tl = Convert<long double>(target),
             ml = Convert<long double>(mask);
  return ReferenceDiffCheck<double, long double>(
      [&](Tape<double>& tape) {
        return nn::MaskedMse(tape, model.Forward(tape, x), target, mask);
      },
      model.parameters(),
      [&](Tape<long double>& tape) {
        return nn::MaskedMse(tape, wide.Forward(tape, xl), tl, ml);
      },
      wide.parameters(), kModelOptions);
}

}  // namespace

std::vector<GradientCheckResult> RunGradientSuite(
    const std::function<void(const GradientCheckResult&)>& progress) {
  std::vector<GradientCheckResult> out;
  auto add = [&](std::string name, GradCheckReport report) {
    out.push_back({std::move(name), std::move(report)});
    if (progress) progress(out.back());
  };
  using Fn = std::function<Tensor<double>(Tape<double>&)>;
  {
    Rng rng(20);
    auto p = nn::MakeLinear<double>(5, 4, true, rng);
    p.bias = Random({4}, rng, 1.0, true);
    p.weight.set_requires_grad(true);
    auto x = Random({3, 5}, rng, 1.0, true);
    auto w = Random({3, 4}, rng, 1.0);
    std::vector<NamedTensor<double>> params{{"x", x}};
    nn::CollectParams("linear", p, params);
    add("layer linear",
        FiniteDiffCheck<double>(
            Fn([&](Tape<double>& tape) {
              return WeightedSum(tape, nn::LinearForward(tape, p, x), w);
            }),
            params, kOptions));
  }
  {
    Rng rng(21);
    auto p = nn::MakeConv2d<double>(1, 3, 5, 3, {2, 1}, rng);
    p.bias = Random({3}, rng, 1.0, true);
    p.kernels.set_requires_grad(true);
    auto x = Random({2, 1, 13, 6}, rng, 1.0, true);
    auto w = Random({2, 3, 5, 4}, rng, 1.0);
    std::vector<NamedTensor<double>> params{{"x", x}};
    nn::CollectParams("conv2d", p, params);
    add("layer conv2d",
        FiniteDiffCheck<double>(
            Fn([&](Tape<double>& tape) {
              return WeightedSum(tape, nn::Conv2dForward(tape, p, x), w);
            }),
            params, kOptions));
  }
  {
    Rng rng(22);
    auto p = nn::MakeGru<double>(4, 3, rng);
    auto xs = Random({2, 6, 4}, rng, 1.0, true);
    auto h0 = Random({2, 3}, rng, 0.5, true);
    auto w = Random({2, 6, 3}, rng, 1.0);
    std::vector<NamedTensor<double>> params{{"xs", xs}, {"h0", h0}};
    nn::CollectParams("gru", p, params);
    for (auto& np : params) np.tensor.set_requires_grad(true);
    add("layer gru",
        FiniteDiffCheck<double>(
            Fn([&](Tape<double>& tape) {
              return WeightedSum(tape, nn::GruSequence(tape, p, xs, h0), w);
            }),
            params, kOptions));
  }
  {
    Rng rng(23);
    auto pred = Random({2, 4, 3}, rng, 1.0, true);
    auto target = Random({2, 4, 3}, rng, 1.0, true);
    auto mask = Tensor<double>::FromData({2, 4}, {1, 1, 0, 1, 1, 0, 0, 0});
    add("layer masked_mse",
        FiniteDiffCheck<double>(
            Fn([&](Tape<double>& tape) {
              return nn::MaskedMse(tape, pred, target, mask);
            }),
            {{"pred", pred}, {"target", target}}, kOptions));
  }
  for (Variant v : {Variant::kProposed, Variant::kProposedNoContext,
                    Variant::kGruBaseline, Variant::kWu2016}) {
    add("model " + VariantName(v), CheckModel(v));
  }
  return out;
}

}  // namespace dereverb
