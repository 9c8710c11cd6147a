// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DEREVERB_NN_H_
#define DEREVERB_NN_H_

#include <string>
#include <vector>

#include "dereverb/gradcheck.h"
#include "dereverb/ops.h"
#include "dereverb/rng.h"
#include "dereverb/tensor.h"

namespace dereverb::nn {

// y = W x (+ b). The bias is optional but fixed per layer instance.
template <typename T>
struct LinearParams {
  Tensor<T> weight;  // [out x in]
  Tensor<T> bias;    // [out] or undefined

  int64_t in_features() const { return weight.dim(1); }
  int64_t out_features() const { return weight.dim(0); }
  bool has_bias() const { return bias.defined(); }
};

template <typename T>
struct Conv2dParams {
  Tensor<T> kernels;  // [Cout x Cin x Kh x Kw]
  Tensor<T> bias;     // [Cout]
  ops::Stride2d stride;
};

// Gated recurrent unit without bias terms:
//   r   = sigmoid(W_ir x + W_hr h)
//   z   = sigmoid(W_iz x + W_hz h)
//   n   = tanh(W_in x + r * (W_hn h))
//   h'  = (1 - z) * n + z * h
// Note the update convention: z close to 1 carries the previous state.
template <typename T>
struct GruParams {
  Tensor<T> w_ir, w_iz, w_in;  // [hidden x in]
  Tensor<T> w_hr, w_hz, w_hn;  // [hidden x hidden]

  int64_t input_size() const { return w_ir.dim(1); }
  int64_t hidden_size() const { return w_ir.dim(0); }
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) in place.
template <typename T>
void InitUniform(Tensor<T>& t, int64_t fan_in, Rng& rng);

template <typename T>
LinearParams<T> MakeLinear(int64_t in, int64_t out, bool bias, Rng& rng);

template <typename T>
Conv2dParams<T> MakeConv2d(int64_t in_channels, int64_t out_channels,
                           int64_t kernel_rows, int64_t kernel_cols,
                           ops::Stride2d stride, Rng& rng);

template <typename T>
GruParams<T> MakeGru(int64_t in, int64_t hidden, Rng& rng);

// Appends the layer's tensors to `out` as "<prefix>.<field>".
template <typename T>
void CollectParams(const std::string& prefix, const LinearParams<T>& p,
                   std::vector<NamedTensor<T>>& out);
template <typename T>
void CollectParams(const std::string& prefix, const Conv2dParams<T>& p,
                   std::vector<NamedTensor<T>>& out);
template <typename T>
void CollectParams(const std::string& prefix, const GruParams<T>& p,
                   std::vector<NamedTensor<T>>& out);

template <typename T>
Tensor<T> LinearForward(Tape<T>& tape, const LinearParams<T>& p,
                        const Tensor<T>& x);

template <typename T>
Tensor<T> Conv2dForward(Tape<T>& tape, const Conv2dParams<T>& p,
                        const Tensor<T>& x);

// One step. x_t is [in] or [N x in]; h_prev is [h] or [N x h].
template <typename T>
Tensor<T> GruStep(Tape<T>& tape, const GruParams<T>& p, const Tensor<T>& x_t,
                  const Tensor<T>& h_prev);

// Runs the cell over xs ([T x in] or [N x T x in]) starting from h0 (zeros
// when undefined) and returns every hidden state ([T x h] / [N x T x h]).
template <typename T>
Tensor<T> GruSequence(Tape<T>& tape, const GruParams<T>& p,
                      const Tensor<T>& xs, const Tensor<T>& h0 = {});

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam over a fixed parameter list. Moments mirror the
// parameters and start at zero.
template <typename T>
class Adam {
 public:
  Adam(std::vector<NamedTensor<T>> params, AdamConfig config = {});

  // Applies one update from the accumulated gradients and increments the
  // step counter. Throws NumericError naming the block on a NaN/Inf gradient
  // (parameters are left untouched in that case).
  void Step();
  void ZeroGrad();

  int64_t step_count() const { return step_; }
  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  const std::vector<NamedTensor<T>>& params() const { return params_; }

  // Moment buffers, exposed for checkpointing.
  std::vector<std::vector<T>>& first_moments() { return m_; }
  std::vector<std::vector<T>>& second_moments() { return v_; }
  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }
  void set_step_count(int64_t step) { step_ = step; }

 private:
  std::vector<NamedTensor<T>> params_;
  AdamConfig config_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  int64_t step_ = 0;
};

// Squared error summed over valid cells divided by (valid frames x B).
// pred/target are [N x T x B], mask is [N x T] with entries in {0, 1}.
// Gradients at masked cells are exactly zero. Throws ContractError on a
// non-binary or all-zero mask.
template <typename T>
Tensor<T> MaskedMse(Tape<T>& tape, const Tensor<T>& pred,
                    const Tensor<T>& target, const Tensor<T>& mask);

}  // namespace dereverb::nn

#endif  // DEREVERB_NN_H_
