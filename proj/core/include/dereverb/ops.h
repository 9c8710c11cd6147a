// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DEREVERB_OPS_H_
#define DEREVERB_OPS_H_

#include <vector>

#include "dereverb/tensor.h"

// Differentiable primitives. Every function computes its result eagerly and,
// when the tape is recording and some input requires a gradient, registers a
// backward rule on the tape. Shape violations throw DimensionError.
namespace dereverb::ops {

struct Stride2d {
  int64_t rows = 1;  // first spatial axis (frequency)
  int64_t cols = 1;  // second spatial axis (time)
};

// a[M x K] * b[K x N] -> [M x N].
template <typename T>
Tensor<T> MatMul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

// Affine map over the trailing axis: x[..., in] * W[out x in]^T + bias[out].
// `bias` may be undefined.
template <typename T>
Tensor<T> Linear(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight,
                 const Tensor<T>& bias);

template <typename T>
Tensor<T> Add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> Hadamard(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

// x[..., D] + bias[D], broadcast over the leading axes.
template <typename T>
Tensor<T> AddBias(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& bias);

// Branches on sign so that neither tail overflows.
template <typename T>
Tensor<T> Sigmoid(Tape<T>& tape, const Tensor<T>& x);

template <typename T>
Tensor<T> Tanh(Tape<T>& tape, const Tensor<T>& x);

// (1 - z) * a + z * b, elementwise. The GRU state update.
template <typename T>
Tensor<T> Interpolate(Tape<T>& tape, const Tensor<T>& z, const Tensor<T>& a,
                      const Tensor<T>& b);

// Same data viewed under a new shape of equal element count.
template <typename T>
Tensor<T> Reshape(Tape<T>& tape, const Tensor<T>& x, const Shape& shape);

// Sum of all elements -> shape {1}.
template <typename T>
Tensor<T> Sum(Tape<T>& tape, const Tensor<T>& x);

// Valid 2-D cross-correlation. input [N x Cin x H x W] (or [Cin x H x W]),
// kernels [Cout x Cin x Kh x Kw], bias [Cout] (may be undefined).
// Output extents: H' = (H - Kh) / sh + 1, W' = (W - Kw) / sw + 1.
template <typename T>
Tensor<T> Conv2d(Tape<T>& tape, const Tensor<T>& input,
                 const Tensor<T>& kernels, const Tensor<T>& bias,
                 Stride2d stride);

// Sequence layout helpers. Sequences are [N x T x D].

// x[N x T x D] -> x[:, t, :] as [N x D].
template <typename T>
Tensor<T> SelectStep(Tape<T>& tape, const Tensor<T>& x, int64_t t);

// T tensors of [N x D] -> [N x T x D].
template <typename T>
Tensor<T> StackSteps(Tape<T>& tape, const std::vector<Tensor<T>>& steps);

// Frames [N x T x B] -> single-channel image [N x 1 x B x (T + 2 pad)] with
// frequency on the row axis, time on the column axis, zero time padding.
template <typename T>
Tensor<T> FramesToImage(Tape<T>& tape, const Tensor<T>& frames, int64_t pad);

// Feature maps [N x C x H x T] -> per-frame vectors [N x T x (C * H)],
// channel-major (index c * H + h).
template <typename T>
Tensor<T> ImageToFrames(Tape<T>& tape, const Tensor<T>& maps);

// [N x T x B] -> [N x T x (2r+1) B]; row t holds frames t-r .. t+r, with
// zeros beyond the sequence edges.
template <typename T>
Tensor<T> ContextWindow(Tape<T>& tape, const Tensor<T>& frames,
                        int64_t radius);

}  // namespace dereverb::ops

#endif  // DEREVERB_OPS_H_
