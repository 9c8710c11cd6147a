// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cstdint>
#include <vector>

#include <benchmark/benchmark.h>

#include "dereverb/model.h"
#include "dereverb/nn.h"
#include "dereverb/ops.h"
#include "dereverb/rng.h"
#include "dereverb/room.h"
#include "dereverb/stft.h"

namespace dereverb {
namespace {

Tensor<float> Random(const Shape& shape, Rng& rng) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  std::vector<float> v(static_cast<size_t>(n));
  for (float& x : v) x = static_cast<float>(rng.Uniform(-1, 1));
  return Tensor<float>::FromData(shape, std::move(v));
}

void BM_MatMul(benchmark::State& state) {
  const int64_t n = state.range(0);
  Rng rng(1);
  const auto a = Random({n, n}, rng), b = Random({n, n}, rng);
  for (auto _ : state) {
    Tape<float> tape(/*recording=*/false);
    benchmark::DoNotOptimize(ops::MatMul(tape, a, b).data().data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_MatMul)->Arg(64)->Arg(256)->Arg(512);

// Encoder-shaped convolution: 257 bins x 26 frames, 64 filters, 21 x 11.
void BM_Conv2dEncoder(benchmark::State& state) {
  Rng rng(2);
  const auto conv = nn::MakeConv2d<float>(1, 64, 21, 11, {2, 1}, rng);
  const auto x = Random({1, 1, 257, 26}, rng);
  for (auto _ : state) {
    Tape<float> tape(/*recording=*/false);
    benchmark::DoNotOptimize(nn::Conv2dForward(tape, conv, x).data().data());
  }
}
BENCHMARK(BM_Conv2dEncoder)->Unit(benchmark::kMillisecond);

void BM_GruSequence(benchmark::State& state) {
  const int64_t hidden = state.range(0);
  Rng rng(3);
  const auto gru = nn::MakeGru<float>(hidden, hidden, rng);
  const auto xs = Random({8, 100, hidden}, rng);
  for (auto _ : state) {
    Tape<float> tape(/*recording=*/false);
    benchmark::DoNotOptimize(nn::GruSequence(tape, gru, xs).data().data());
  }
  state.SetItemsProcessed(state.iterations() * 8 * 100);
}
BENCHMARK(BM_GruSequence)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

// One training step of the full-size model on a batch of 4 x 100 frames.
void BM_ModelTrainStep(benchmark::State& state) {
  Rng rng(4);
  const auto cfg = ModelConfig::ForVariant(Variant::kProposed, 11);
  auto model = DereverbModel<float>::Build(cfg, rng);
  model.SetRequiresGrad(true);
  const auto x = Random({4, 100, cfg.bins}, rng);
  const auto target = Random({4, 100, cfg.bins}, rng);
  const auto mask = Tensor<float>::FromData(
      {4, 100}, std::vector<float>(400, 1.0f));
  for (auto _ : state) {
    Tape<float> tape;
    const auto loss =
        nn::MaskedMse(tape, model.Forward(tape, x), target, mask);
    tape.Backward(loss);
    benchmark::DoNotOptimize(loss.item());
  }
  state.SetItemsProcessed(state.iterations() * 400);
}
BENCHMARK(BM_ModelTrainStep)->Unit(benchmark::kMillisecond);

void BM_Stft(benchmark::State& state) {
  Rng rng(5);
  std::vector<double> x(16000 * 4);
  for (double& s : x) s = rng.Uniform(-1, 1);
  for (auto _ : state) {
    const auto spec = Stft<double>(x, 16000);
    benchmark::DoNotOptimize(spec.frames);
  }
  state.SetBytesProcessed(state.iterations() * x.size() * sizeof(double));
}
BENCHMARK(BM_Stft)->Unit(benchmark::kMillisecond);

void BM_ImageSource(benchmark::State& state) {
  RoomSpec spec;
  spec.dims = {6.0, 5.0, 3.0};
  spec.source = {2.0, 3.5, 1.5};
  spec.mic = {4.0, 1.5, 1.2};
  spec.target_t60 = state.range(0) / 1000.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ImageSourceRir(spec).samples.data());
  }
}
BENCHMARK(BM_ImageSource)->Arg(300)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace dereverb

BENCHMARK_MAIN();
