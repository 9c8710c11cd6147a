// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dereverb/nn.h"

#include <cmath>

#include "dereverb/error.h"

namespace dereverb::nn {

template <typename T>
void InitUniform(Tensor<T>& t, int64_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (T& v : t.data()) v = static_cast<T>(rng.Uniform(-bound, bound));
}

template <typename T>
LinearParams<T> MakeLinear(int64_t in, int64_t out, bool bias, Rng& rng) {
  LinearParams<T> p;
  p.weight = Tensor<T>::Zeros({out, in}, true);
  InitUniform(p.weight, in, rng);
  if (bias) p.bias = Tensor<T>::Zeros({out}, true);
  return p;
}

template <typename T>
Conv2dParams<T> MakeConv2d(int64_t in_channels, int64_t out_channels,
                           int64_t kernel_rows, int64_t kernel_cols,
                           ops::Stride2d stride, Rng& rng) {
  Conv2dParams<T> p;
  p.kernels = Tensor<T>::Zeros(
      {out_channels, in_channels, kernel_rows, kernel_cols}, true);
  InitUniform(p.kernels, in_channels * kernel_rows * kernel_cols, rng);
  p.bias = Tensor<T>::Zeros({out_channels}, true);
  p.stride = stride;
  return p;
}

template <typename T>
GruParams<T> MakeGru(int64_t in, int64_t hidden, Rng& rng) {
  GruParams<T> p;
  Tensor<T>* input_side[] = {&p.w_ir, &p.w_iz, &p.w_in};
  Tensor<T>* hidden_side[] = {&p.w_hr, &p.w_hz, &p.w_hn};
  for (Tensor<T>* w : input_side) {
    *w = Tensor<T>::Zeros({hidden, in}, true);
    InitUniform(*w, in, rng);
  }
  for (Tensor<T>* w : hidden_side) {
    *w = Tensor<T>::Zeros({hidden, hidden}, true);
    InitUniform(*w, hidden, rng);
  }
  return p;
}

template <typename T>
void CollectParams(const std::string& prefix, const LinearParams<T>& p,
                   std::vector<NamedTensor<T>>& out) {
  out.push_back({prefix + ".weight", p.weight});
  if (p.has_bias()) out.push_back({prefix + ".bias", p.bias});
}

template <typename T>
void CollectParams(const std::string& prefix, const Conv2dParams<T>& p,
                   std::vector<NamedTensor<T>>& out) {
  out.push_back({prefix + ".kernels", p.kernels});
  out.push_back({prefix + ".bias", p.bias});
}

template <typename T>
void CollectParams(const std::string& prefix, const GruParams<T>& p,
                   std::vector<NamedTensor<T>>& out) {
  out.push_back({prefix + ".w_ir", p.w_ir});
  out.push_back({prefix + ".w_iz", p.w_iz});
  out.push_back({prefix + ".w_in", p.w_in});
  out.push_back({prefix + ".w_hr", p.w_hr});
  out.push_back({prefix + ".w_hz", p.w_hz});
  out.push_back({prefix + ".w_hn", p.w_hn});
}

template <typename T>
Tensor<T> LinearForward(Tape<T>& tape, const LinearParams<T>& p,
                        const Tensor<T>& x) {
  return ops::Linear(tape, x, p.weight, p.bias);
}

template <typename T>
Tensor<T> Conv2dForward(Tape<T>& tape, const Conv2dParams<T>& p,
                        const Tensor<T>& x) {
  return ops::Conv2d(tape, x, p.kernels, p.bias, p.stride);
}

namespace {

// Cell update given the precomputed input-side projections.
template <typename T>
Tensor<T> GruCell(Tape<T>& tape, const GruParams<T>& p, const Tensor<T>& xr,
                  const Tensor<T>& xz, const Tensor<T>& xn,
                  const Tensor<T>& h_prev) {
  const Tensor<T> none;
  auto r = ops::Sigmoid(tape,
                        ops::Add(tape, xr, ops::Linear(tape, h_prev, p.w_hr, none)));
  auto z = ops::Sigmoid(tape,
                        ops::Add(tape, xz, ops::Linear(tape, h_prev, p.w_hz, none)));
  auto hn = ops::Linear(tape, h_prev, p.w_hn, none);
  auto n = ops::Tanh(tape, ops::Add(tape, xn, ops::Hadamard(tape, r, hn)));
  return ops::Interpolate(tape, z, n, h_prev);
}

template <typename T>
void CheckGruShapes(const GruParams<T>& p, const Tensor<T>& x,
                    const Tensor<T>& h) {
  if (x.dim(-1) != p.input_size()) {
    throw DimensionError("gru: input " + ShapeString(x.shape()) +
                         " does not match input size " +
                         std::to_string(p.input_size()));
  }
  if (h.defined() && h.dim(-1) != p.hidden_size()) {
    throw DimensionError("gru: state " + ShapeString(h.shape()) +
                         " does not match hidden size " +
                         std::to_string(p.hidden_size()));
  }
}

}  // namespace

template <typename T>
Tensor<T> GruStep(Tape<T>& tape, const GruParams<T>& p, const Tensor<T>& x_t,
                  const Tensor<T>& h_prev) {
  CheckGruShapes(p, x_t, h_prev);
  const Tensor<T> none;
  Shape expect = x_t.shape();
  expect.back() = p.hidden_size();
  if (h_prev.shape() != expect) {
    throw DimensionError("gru_step: state " + ShapeString(h_prev.shape()) +
                         " expected " + ShapeString(expect));
  }
  return GruCell(tape, p, ops::Linear(tape, x_t, p.w_ir, none),
                 ops::Linear(tape, x_t, p.w_iz, none),
                 ops::Linear(tape, x_t, p.w_in, none), h_prev);
}

template <typename T>
Tensor<T> GruSequence(Tape<T>& tape, const GruParams<T>& p,
                      const Tensor<T>& xs, const Tensor<T>& h0) {
  if (xs.rank() == 2) {
    if (xs.dim(0) == 0) {
      throw DimensionError("gru_sequence: empty sequence (T = 0)");
    }
    auto batched = ops::Reshape(tape, xs, {1, xs.dim(0), xs.dim(1)});
    Tensor<T> h0b;
    if (h0.defined()) h0b = ops::Reshape(tape, h0, {1, h0.numel()});
    auto out = GruSequence(tape, p, batched, h0b);
    return ops::Reshape(tape, out, {xs.dim(0), p.hidden_size()});
  }
  if (xs.rank() != 3) {
    throw DimensionError("gru_sequence: expected [T x in] or [N x T x in], got " +
                         ShapeString(xs.shape()));
  }
  CheckGruShapes(p, xs, h0);
  const int64_t n = xs.dim(0), steps = xs.dim(1), hidden = p.hidden_size();
  if (steps == 0) throw DimensionError("gru_sequence: empty sequence (T = 0)");
  Tensor<T> h = h0.defined() ? h0 : Tensor<T>::Zeros({n, hidden});
  if (h.shape() != Shape{n, hidden}) {
    throw DimensionError("gru_sequence: initial state " +
                         ShapeString(h.shape()) + " expected " +
                         ShapeString({n, hidden}));
  }
  const Tensor<T> none;
  auto xr = ops::Linear(tape, xs, p.w_ir, none);
  auto xz = ops::Linear(tape, xs, p.w_iz, none);
  auto xn = ops::Linear(tape, xs, p.w_in, none);
  std::vector<Tensor<T>> states;
  states.reserve(static_cast<size_t>(steps));
  for (int64_t t = 0; t < steps; ++t) {
    h = GruCell(tape, p, ops::SelectStep(tape, xr, t),
                ops::SelectStep(tape, xz, t), ops::SelectStep(tape, xn, t), h);
    states.push_back(h);
  }
  return ops::StackSteps(tape, states);
}

template <typename T>
Adam<T>::Adam(std::vector<NamedTensor<T>> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    m_.emplace_back(static_cast<size_t>(p.tensor.numel()), T(0));
    v_.emplace_back(static_cast<size_t>(p.tensor.numel()), T(0));
  }
}

template <typename T>
void Adam<T>::Step() {
  for (const auto& p : params_) {
    if (!p.tensor.has_grad()) continue;
    for (T g : p.tensor.grad()) {
      if (!std::isfinite(g)) {
        throw NumericError("adam: non-finite gradient in parameter block '" +
                           p.name + "'");
      }
    }
  }
  ++step_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double lr = config_.learning_rate;
  for (size_t k = 0; k < params_.size(); ++k) {
    Tensor<T> t = params_[k].tensor;
    if (!t.has_grad()) continue;
    std::span<T> w = t.data();
    std::span<T> g = t.grad();
    std::vector<T>& m = m_[k];
    std::vector<T>& v = v_[k];
    for (size_t i = 0; i < w.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
      const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double update =
          lr * (mi / c1) / (std::sqrt(vi / c2) + config_.epsilon);
      w[i] = static_cast<T>(static_cast<double>(w[i]) - update);
    }
  }
}

template <typename T>
void Adam<T>::ZeroGrad() {
  for (const auto& p : params_) p.tensor.ZeroGrad();
}

template <typename T>
Tensor<T> MaskedMse(Tape<T>& tape, const Tensor<T>& pred,
                    const Tensor<T>& target, const Tensor<T>& mask) {
  if (pred.shape() != target.shape() || pred.rank() != 3) {
    throw DimensionError("masked_mse: pred " + ShapeString(pred.shape()) +
                         " vs target " + ShapeString(target.shape()));
  }
  const int64_t n = pred.dim(0), steps = pred.dim(1), bins = pred.dim(2);
  if (mask.shape() != Shape{n, steps}) {
    throw DimensionError("masked_mse: mask " + ShapeString(mask.shape()) +
                         " expected " + ShapeString({n, steps}));
  }
  int64_t valid = 0;
  for (T m : mask.data()) {
    if (m != T(0) && m != T(1)) {
      throw ContractError("masked_mse: mask entries must be 0 or 1");
    }
    if (m == T(1)) ++valid;
  }
  if (valid == 0) throw ContractError("masked_mse: no valid frames in mask");
  const T scale = T(1) / static_cast<T>(valid * bins);
  const T* pp = pred.ptr();
  const T* pt = target.ptr();
  const T* pm = mask.ptr();
  using Acc = decltype(T() + 0.0);  // at least double
  Acc sse = 0;
  for (int64_t r = 0; r < n * steps; ++r) {
    if (pm[r] == T(0)) continue;
    for (int64_t b = 0; b < bins; ++b) {
      const Acc d = static_cast<Acc>(pp[r * bins + b]) - pt[r * bins + b];
      sse += d * d;
    }
  }
  auto out = Tensor<T>::Scalar(
      static_cast<T>(sse / static_cast<Acc>(valid * bins)));
  tape.CheckFinite(out, "masked_mse");
  if (tape.ShouldRecord({&pred, &target})) {
    tape.Record(out, [pred, target, mask, out, n, steps, bins, scale]() {
      const T g = out.grad()[0] * T(2) * scale;
      const T* pp = pred.ptr();
      const T* pt = target.ptr();
      const T* pm = mask.ptr();
      T* gp = pred.requires_grad() ? pred.grad().data() : nullptr;
      T* gt = target.requires_grad() ? target.grad().data() : nullptr;
      for (int64_t r = 0; r < n * steps; ++r) {
        if (pm[r] == T(0)) continue;
        for (int64_t b = 0; b < bins; ++b) {
          const T d = g * (pp[r * bins + b] - pt[r * bins + b]);
          if (gp) gp[r * bins + b] += d;
          if (gt) gt[r * bins + b] -= d;
        }
      }
    });
  }
  return out;
}

#define DEREVERB_INSTANTIATE_NN(T)                                            \
  template void InitUniform(Tensor<T>&, int64_t, Rng&);                       \
  template LinearParams<T> MakeLinear<T>(int64_t, int64_t, bool, Rng&);      \
  template Conv2dParams<T> MakeConv2d<T>(int64_t, int64_t, int64_t, int64_t, \
                                         ops::Stride2d, Rng&);                \
  template GruParams<T> MakeGru<T>(int64_t, int64_t, Rng&);                  \
  template void CollectParams(const std::string&, const LinearParams<T>&,    \
                              std::vector<NamedTensor<T>>&);                  \
  template void CollectParams(const std::string&, const Conv2dParams<T>&,    \
                              std::vector<NamedTensor<T>>&);                  \
  template void CollectParams(const std::string&, const GruParams<T>&,       \
                              std::vector<NamedTensor<T>>&);                  \
  template Tensor<T> LinearForward(Tape<T>&, const LinearParams<T>&,         \
                                   const Tensor<T>&);                         \
  template Tensor<T> Conv2dForward(Tape<T>&, const Conv2dParams<T>&,         \
                                   const Tensor<T>&);                         \
  template Tensor<T> GruStep(Tape<T>&, const GruParams<T>&, const Tensor<T>&, \
                             const Tensor<T>&);                               \
  template Tensor<T> GruSequence(Tape<T>&, const GruParams<T>&,              \
                                 const Tensor<T>&, const Tensor<T>&);         \
  template class Adam<T>;                                                     \
  template Tensor<T> MaskedMse(Tape<T>&, const Tensor<T>&, const Tensor<T>&, \
                               const Tensor<T>&);

DEREVERB_INSTANTIATE_NN(float)
DEREVERB_INSTANTIATE_NN(double)
DEREVERB_INSTANTIATE_NN(long double)

#undef DEREVERB_INSTANTIATE_NN

}  // namespace dereverb::nn
