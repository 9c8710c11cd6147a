// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dereverb/ops.h"

#include <cmath>
#include <string>

#include "dereverb/error.h"
#include "kernels.h"

namespace dereverb::ops {

namespace kn = dereverb::kernels;

namespace {

template <typename T>
void RequireSameShape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         ShapeString(a.shape()) + " vs " +
                         ShapeString(b.shape()));
  }
}

template <typename T>
void RequireRank(const Tensor<T>& a, int rank, const char* op,
                 const char* what) {
  if (a.rank() != rank) {
    throw DimensionError(std::string(op) + ": " + what + " must have rank " +
                         std::to_string(rank) + ", got " +
                         ShapeString(a.shape()));
  }
}

template <typename T>
bool NeedsGrad(const Tensor<T>& t) {
  return t.defined() && t.requires_grad();
}

template <typename T>
T StableSigmoid(T x) {
  if (x >= T(0)) {
    return T(1) / (T(1) + std::exp(-x));
  }
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

template <typename T>
Tensor<T> MatMul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  RequireRank(a, 2, "matmul", "lhs");
  RequireRank(b, 2, "matmul", "rhs");
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree, " +
                         ShapeString(a.shape()) + " x " +
                         ShapeString(b.shape()));
  }
  auto out = Tensor<T>::Zeros({m, n});
  kn::GemmNN(m, n, k, a.ptr(), b.ptr(), out.ptr());
  tape.CheckFinite(out, "matmul");
  if (tape.ShouldRecord({&a, &b})) {
    tape.Record(out, [a, b, out, m, n, k]() mutable {
      const T* g = out.grad().data();
      if (a.requires_grad()) {
        kn::GemmNT(m, k, n, g, b.ptr(), a.grad().data());
      }
      if (b.requires_grad()) {
        kn::GemmTN(k, n, m, a.ptr(), g, b.grad().data());
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> Linear(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight,
                 const Tensor<T>& bias) {
  RequireRank(weight, 2, "linear", "weight");
  const int64_t out_dim = weight.dim(0), in_dim = weight.dim(1);
  if (x.dim(-1) != in_dim) {
    throw DimensionError("linear: input " + ShapeString(x.shape()) +
                         " does not match weight " +
                         ShapeString(weight.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != out_dim)) {
    throw DimensionError("linear: bias " + ShapeString(bias.shape()) +
                         " does not match weight " +
                         ShapeString(weight.shape()));
  }
  const int64_t rows = x.numel() / in_dim;
  Shape out_shape = x.shape();
  out_shape.back() = out_dim;
  auto out = Tensor<T>::Zeros(out_shape);
  T* y = out.ptr();
  if (bias.defined()) {
    for (int64_t r = 0; r < rows; ++r) {
      std::copy(bias.ptr(), bias.ptr() + out_dim, y + r * out_dim);
    }
  }
  kn::GemmNT(rows, out_dim, in_dim, x.ptr(), weight.ptr(), y);
  tape.CheckFinite(out, "linear");
  if (tape.ShouldRecord({&x, &weight, &bias})) {
    tape.Record(out, [x, weight, bias, out, rows, out_dim, in_dim]() mutable {
      const T* g = out.grad().data();
      if (x.requires_grad()) {
        kn::GemmNN(rows, in_dim, out_dim, g, weight.ptr(),
                        x.grad().data());
      }
      if (weight.requires_grad()) {
        kn::GemmTN(out_dim, in_dim, rows, g, x.ptr(),
                        weight.grad().data());
      }
      if (NeedsGrad(bias)) {
        T* gb = bias.grad().data();
        for (int64_t r = 0; r < rows; ++r) {
          kn::Axpy(T(1), g + r * out_dim, gb, out_dim);
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> Add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  RequireSameShape(a, b, "add");
  auto out = Tensor<T>::Zeros(a.shape());
  const int64_t n = a.numel();
  T* y = out.ptr();
  const T* pa = a.ptr();
  const T* pb = b.ptr();
  for (int64_t i = 0; i < n; ++i) y[i] = pa[i] + pb[i];
  tape.CheckFinite(out, "add");
  if (tape.ShouldRecord({&a, &b})) {
    tape.Record(out, [a, b, out, n]() mutable {
      const T* g = out.grad().data();
      if (a.requires_grad()) kn::Axpy(T(1), g, a.grad().data(), n);
      if (b.requires_grad()) kn::Axpy(T(1), g, b.grad().data(), n);
    });
  }
  return out;
}

template <typename T>
Tensor<T> Hadamard(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  RequireSameShape(a, b, "hadamard");
  auto out = Tensor<T>::Zeros(a.shape());
  const int64_t n = a.numel();
  T* y = out.ptr();
  const T* pa = a.ptr();
  const T* pb = b.ptr();
  for (int64_t i = 0; i < n; ++i) y[i] = pa[i] * pb[i];
  tape.CheckFinite(out, "hadamard");
  if (tape.ShouldRecord({&a, &b})) {
    tape.Record(out, [a, b, out, n]() mutable {
      const T* g = out.grad().data();
      if (a.requires_grad()) {
        T* ga = a.grad().data();
        const T* vb = b.ptr();
        for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * vb[i];
      }
      if (b.requires_grad()) {
        T* gb = b.grad().data();
        const T* va = a.ptr();
        for (int64_t i = 0; i < n; ++i) gb[i] += g[i] * va[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> AddBias(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& bias) {
  if (bias.rank() != 1 || bias.dim(0) != x.dim(-1)) {
    throw DimensionError("add_bias: bias " + ShapeString(bias.shape()) +
                         " not broadcastable over " + ShapeString(x.shape()));
  }
  const int64_t d = bias.dim(0);
  const int64_t rows = x.numel() / d;
  auto out = Tensor<T>::Zeros(x.shape());
  T* y = out.ptr();
  const T* px = x.ptr();
  const T* pb = bias.ptr();
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t j = 0; j < d; ++j) y[r * d + j] = px[r * d + j] + pb[j];
  }
  tape.CheckFinite(out, "add_bias");
  if (tape.ShouldRecord({&x, &bias})) {
    tape.Record(out, [x, bias, out, rows, d]() mutable {
      const T* g = out.grad().data();
      if (x.requires_grad()) kn::Axpy(T(1), g, x.grad().data(), rows * d);
      if (bias.requires_grad()) {
        T* gb = bias.grad().data();
        for (int64_t r = 0; r < rows; ++r) kn::Axpy(T(1), g + r * d, gb, d);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> Sigmoid(Tape<T>& tape, const Tensor<T>& x) {
  auto out = Tensor<T>::Zeros(x.shape());
  const int64_t n = x.numel();
  T* y = out.ptr();
  const T* px = x.ptr();
  for (int64_t i = 0; i < n; ++i) y[i] = StableSigmoid(px[i]);
  tape.CheckFinite(out, "sigmoid");
  if (tape.ShouldRecord({&x})) {
    tape.Record(out, [x, out, n]() mutable {
      const T* g = out.grad().data();
      const T* s = out.ptr();
      T* gx = x.grad().data();
      for (int64_t i = 0; i < n; ++i) gx[i] += g[i] * s[i] * (T(1) - s[i]);
    });
  }
  return out;
}

template <typename T>
Tensor<T> Tanh(Tape<T>& tape, const Tensor<T>& x) {
  auto out = Tensor<T>::Zeros(x.shape());
  const int64_t n = x.numel();
  T* y = out.ptr();
  const T* px = x.ptr();
  for (int64_t i = 0; i < n; ++i) y[i] = std::tanh(px[i]);
  tape.CheckFinite(out, "tanh");
  if (tape.ShouldRecord({&x})) {
    tape.Record(out, [x, out, n]() mutable {
      const T* g = out.grad().data();
      const T* t = out.ptr();
      T* gx = x.grad().data();
      for (int64_t i = 0; i < n; ++i) gx[i] += g[i] * (T(1) - t[i] * t[i]);
    });
  }
  return out;
}

template <typename T>
Tensor<T> Interpolate(Tape<T>& tape, const Tensor<T>& z, const Tensor<T>& a,
                      const Tensor<T>& b) {
  RequireSameShape(z, a, "interpolate");
  RequireSameShape(z, b, "interpolate");
  auto out = Tensor<T>::Zeros(z.shape());
  const int64_t n = z.numel();
  T* y = out.ptr();
  const T* pz = z.ptr();
  const T* pa = a.ptr();
  const T* pb = b.ptr();
  for (int64_t i = 0; i < n; ++i) y[i] = (T(1) - pz[i]) * pa[i] + pz[i] * pb[i];
  tape.CheckFinite(out, "interpolate");
  if (tape.ShouldRecord({&z, &a, &b})) {
    tape.Record(out, [z, a, b, out, n]() mutable {
      const T* g = out.grad().data();
      const T* pz = z.ptr();
      if (z.requires_grad()) {
        T* gz = z.grad().data();
        const T* pa = a.ptr();
        const T* pb = b.ptr();
        for (int64_t i = 0; i < n; ++i) gz[i] += g[i] * (pb[i] - pa[i]);
      }
      if (a.requires_grad()) {
        T* ga = a.grad().data();
        for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * (T(1) - pz[i]);
      }
      if (b.requires_grad()) {
        T* gb = b.grad().data();
        for (int64_t i = 0; i < n; ++i) gb[i] += g[i] * pz[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> Reshape(Tape<T>& tape, const Tensor<T>& x, const Shape& shape) {
  if (NumElements(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + ShapeString(x.shape()) +
                         " as " + ShapeString(shape));
  }
  auto out = Tensor<T>::FromData(shape, {x.data().begin(), x.data().end()});
  if (tape.ShouldRecord({&x})) {
    tape.Record(out, [x, out]() {
      kn::Axpy(T(1), out.grad().data(), x.grad().data(), x.numel());
    });
  }
  return out;
}

template <typename T>
Tensor<T> Sum(Tape<T>& tape, const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.data()) acc += v;
  auto out = Tensor<T>::Scalar(acc);
  tape.CheckFinite(out, "sum");
  if (tape.ShouldRecord({&x})) {
    tape.Record(out, [x, out]() mutable {
      const T g = out.grad()[0];
      for (T& gx : x.grad()) gx += g;
    });
  }
  return out;
}

template <typename T>
Tensor<T> Conv2d(Tape<T>& tape, const Tensor<T>& input,
                 const Tensor<T>& kernels, const Tensor<T>& bias,
                 Stride2d stride) {
  if (input.rank() == 3) {
    // Promote [Cin x H x W] to a batch of one and drop the axis afterwards.
    Shape s = input.shape();
    auto batched = Tensor<T>::FromData({1, s[0], s[1], s[2]},
                                       {input.data().begin(), input.data().end()});
    // Route gradients back through a view-like copy.
    Tensor<T> in = input;
    Tensor<T> b4 = batched;
    if (tape.ShouldRecord({&input})) {
      tape.Record(b4, [in, b4]() mutable {
        kn::Axpy(T(1), b4.grad().data(), in.grad().data(), in.numel());
      });
    }
    auto out4 = Conv2d(tape, b4, kernels, bias, stride);
    Shape os = out4.shape();
    auto out = Tensor<T>::FromData({os[1], os[2], os[3]},
                                   {out4.data().begin(), out4.data().end()});
    if (tape.ShouldRecord({&out4})) {
      tape.Record(out, [out4, out]() mutable {
        kn::Axpy(T(1), out.grad().data(), out4.grad().data(),
                      out.numel());
      });
    }
    return out;
  }
  RequireRank(input, 4, "conv2d", "input");
  RequireRank(kernels, 4, "conv2d", "kernels");
  if (stride.rows < 1 || stride.cols < 1) {
    throw DimensionError("conv2d: stride components must be >= 1");
  }
  const int64_t n = input.dim(0), cin = input.dim(1), h = input.dim(2),
                w = input.dim(3);
  const int64_t cout = kernels.dim(0), kh = kernels.dim(2), kw = kernels.dim(3);
  if (kernels.dim(1) != cin) {
    throw DimensionError("conv2d: kernels " + ShapeString(kernels.shape()) +
                         " do not match input channels of " +
                         ShapeString(input.shape()));
  }
  if (kh > h || kw > w) {
    throw DimensionError("conv2d: kernel " + ShapeString(kernels.shape()) +
                         " larger than input " + ShapeString(input.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != cout)) {
    throw DimensionError("conv2d: bias " + ShapeString(bias.shape()) +
                         " does not match " + std::to_string(cout) +
                         " output channels");
  }
  const int64_t sh = stride.rows, sw = stride.cols;
  const int64_t ho = (h - kh) / sh + 1, wo = (w - kw) / sw + 1;
  auto out = Tensor<T>::Zeros({n, cout, ho, wo});
  const T* x = input.ptr();
  const T* k = kernels.ptr();
  T* y = out.ptr();

  auto x_at = [=](int64_t b, int64_t c, int64_t r) {
    return x + ((b * cin + c) * h + r) * w;
  };
  auto y_at = [=](int64_t b, int64_t c, int64_t r) {
    return y + ((b * cout + c) * ho + r) * wo;
  };
  auto k_at = [=](int64_t co, int64_t ci, int64_t r) {
    return k + ((co * cin + ci) * kh + r) * kw;
  };

  for (int64_t b = 0; b < n; ++b) {
    for (int64_t co = 0; co < cout; ++co) {
      if (bias.defined()) {
        std::fill(y_at(b, co, 0), y_at(b, co, 0) + ho * wo, bias.ptr()[co]);
      }
      for (int64_t ci = 0; ci < cin; ++ci) {
        for (int64_t r = 0; r < kh; ++r) {
          const T* krow = k_at(co, ci, r);
          for (int64_t i = 0; i < ho; ++i) {
            const T* xrow = x_at(b, ci, i * sh + r);
            T* yrow = y_at(b, co, i);
            for (int64_t c = 0; c < kw; ++c) {
              const T kv = krow[c];
              if (sw == 1) {
                kn::Axpy(kv, xrow + c, yrow, wo);
              } else {
                for (int64_t j = 0; j < wo; ++j) yrow[j] += kv * xrow[j * sw + c];
              }
            }
          }
        }
      }
    }
  }
  tape.CheckFinite(out, "conv2d");
  if (tape.ShouldRecord({&input, &kernels, &bias})) {
    tape.Record(out, [input, kernels, bias, out, n, cin, h, w, cout, kh, kw,
                      sh, sw, ho, wo]() mutable {
      const T* g = out.grad().data();
      const T* x = input.ptr();
      const T* k = kernels.ptr();
      auto g_at = [=](int64_t b, int64_t c, int64_t r) {
        return g + ((b * cout + c) * ho + r) * wo;
      };
      if (NeedsGrad(bias)) {
        T* gb = bias.grad().data();
        for (int64_t b = 0; b < n; ++b) {
          for (int64_t co = 0; co < cout; ++co) {
            const T* gp = g_at(b, co, 0);
            T acc = 0;
            for (int64_t i = 0; i < ho * wo; ++i) acc += gp[i];
            gb[co] += acc;
          }
        }
      }
      if (input.requires_grad()) {
        T* gx = input.grad().data();
        for (int64_t b = 0; b < n; ++b) {
          for (int64_t co = 0; co < cout; ++co) {
            for (int64_t ci = 0; ci < cin; ++ci) {
              for (int64_t r = 0; r < kh; ++r) {
                const T* krow = k + ((co * cin + ci) * kh + r) * kw;
                for (int64_t i = 0; i < ho; ++i) {
                  T* gxrow = gx + ((b * cin + ci) * h + i * sh + r) * w;
                  const T* grow = g_at(b, co, i);
                  for (int64_t c = 0; c < kw; ++c) {
                    const T kv = krow[c];
                    if (sw == 1) {
                      kn::Axpy(kv, grow, gxrow + c, wo);
                    } else {
                      for (int64_t j = 0; j < wo; ++j) {
                        gxrow[j * sw + c] += kv * grow[j];
                      }
                    }
                  }
                }
              }
            }
          }
        }
      }
      if (kernels.requires_grad()) {
        T* gk = kernels.grad().data();
        for (int64_t b = 0; b < n; ++b) {
          for (int64_t co = 0; co < cout; ++co) {
            for (int64_t ci = 0; ci < cin; ++ci) {
              for (int64_t r = 0; r < kh; ++r) {
                T* gkrow = gk + ((co * cin + ci) * kh + r) * kw;
                for (int64_t c = 0; c < kw; ++c) {
                  T acc = 0;
                  for (int64_t i = 0; i < ho; ++i) {
                    const T* xrow = x + ((b * cin + ci) * h + i * sh + r) * w;
                    const T* grow = g_at(b, co, i);
                    if (sw == 1) {
                      acc += kn::Dot(xrow + c, grow, wo);
                    } else {
                      for (int64_t j = 0; j < wo; ++j) {
                        acc += xrow[j * sw + c] * grow[j];
                      }
                    }
                  }
                  gkrow[c] += acc;
                }
              }
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> SelectStep(Tape<T>& tape, const Tensor<T>& x, int64_t t) {
  RequireRank(x, 3, "select_step", "sequence");
  const int64_t n = x.dim(0), steps = x.dim(1), d = x.dim(2);
  if (t < 0 || t >= steps) {
    throw DimensionError("select_step: step " + std::to_string(t) +
                         " out of range for " + ShapeString(x.shape()));
  }
  auto out = Tensor<T>::Zeros({n, d});
  for (int64_t b = 0; b < n; ++b) {
    const T* src = x.ptr() + (b * steps + t) * d;
    std::copy(src, src + d, out.ptr() + b * d);
  }
  if (tape.ShouldRecord({&x})) {
    tape.Record(out, [x, out, n, steps, d, t]() mutable {
      const T* g = out.grad().data();
      T* gx = x.grad().data();
      for (int64_t b = 0; b < n; ++b) {
        kn::Axpy(T(1), g + b * d, gx + (b * steps + t) * d, d);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> StackSteps(Tape<T>& tape, const std::vector<Tensor<T>>& steps) {
  if (steps.empty()) throw DimensionError("stack_steps: empty sequence");
  const Shape& s0 = steps.front().shape();
  if (s0.size() != 2) {
    throw DimensionError("stack_steps: steps must be [N x D], got " +
                         ShapeString(s0));
  }
  const int64_t n = s0[0], d = s0[1];
  const int64_t t_len = static_cast<int64_t>(steps.size());
  auto out = Tensor<T>::Zeros({n, t_len, d});
  bool any_grad = false;
  for (int64_t t = 0; t < t_len; ++t) {
    const auto& st = steps[static_cast<size_t>(t)];
    if (st.shape() != s0) {
      throw DimensionError("stack_steps: step shape " + ShapeString(st.shape()) +
                           " differs from " + ShapeString(s0));
    }
    any_grad = any_grad || st.requires_grad();
    for (int64_t b = 0; b < n; ++b) {
      std::copy(st.ptr() + b * d, st.ptr() + (b + 1) * d,
                out.ptr() + (b * t_len + t) * d);
    }
  }
  if (tape.recording() && any_grad) {
    tape.Record(out, [steps, out, n, t_len, d]() mutable {
      const T* g = out.grad().data();
      for (int64_t t = 0; t < t_len; ++t) {
        auto& st = steps[static_cast<size_t>(t)];
        if (!st.requires_grad()) continue;
        T* gs = st.grad().data();
        for (int64_t b = 0; b < n; ++b) {
          kn::Axpy(T(1), g + (b * t_len + t) * d, gs + b * d, d);
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> FramesToImage(Tape<T>& tape, const Tensor<T>& frames, int64_t pad) {
  RequireRank(frames, 3, "frames_to_image", "frames");
  if (pad < 0) throw DimensionError("frames_to_image: negative padding");
  const int64_t n = frames.dim(0), t_len = frames.dim(1), bins = frames.dim(2);
  const int64_t w = t_len + 2 * pad;
  auto out = Tensor<T>::Zeros({n, 1, bins, w});
  const T* x = frames.ptr();
  T* y = out.ptr();
  for (int64_t b = 0; b < n; ++b) {
    for (int64_t t = 0; t < t_len; ++t) {
      for (int64_t f = 0; f < bins; ++f) {
        y[(b * bins + f) * w + t + pad] = x[(b * t_len + t) * bins + f];
      }
    }
  }
  if (tape.ShouldRecord({&frames})) {
    tape.Record(out, [frames, out, n, t_len, bins, w, pad]() mutable {
      const T* g = out.grad().data();
      T* gx = frames.grad().data();
      for (int64_t b = 0; b < n; ++b) {
        for (int64_t t = 0; t < t_len; ++t) {
          for (int64_t f = 0; f < bins; ++f) {
            gx[(b * t_len + t) * bins + f] += g[(b * bins + f) * w + t + pad];
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> ImageToFrames(Tape<T>& tape, const Tensor<T>& maps) {
  RequireRank(maps, 4, "image_to_frames", "maps");
  const int64_t n = maps.dim(0), c = maps.dim(1), h = maps.dim(2),
                t_len = maps.dim(3);
  const int64_t feat = c * h;
  auto out = Tensor<T>::Zeros({n, t_len, feat});
  const T* x = maps.ptr();
  T* y = out.ptr();
  for (int64_t b = 0; b < n; ++b) {
    for (int64_t ch = 0; ch < c; ++ch) {
      for (int64_t r = 0; r < h; ++r) {
        const T* src = x + ((b * c + ch) * h + r) * t_len;
        for (int64_t t = 0; t < t_len; ++t) {
          y[(b * t_len + t) * feat + ch * h + r] = src[t];
        }
      }
    }
  }
  if (tape.ShouldRecord({&maps})) {
    tape.Record(out, [maps, out, n, c, h, t_len, feat]() mutable {
      const T* g = out.grad().data();
      T* gx = maps.grad().data();
      for (int64_t b = 0; b < n; ++b) {
        for (int64_t ch = 0; ch < c; ++ch) {
          for (int64_t r = 0; r < h; ++r) {
            T* dst = gx + ((b * c + ch) * h + r) * t_len;
            for (int64_t t = 0; t < t_len; ++t) {
              dst[t] += g[(b * t_len + t) * feat + ch * h + r];
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> ContextWindow(Tape<T>& tape, const Tensor<T>& frames,
                        int64_t radius) {
  RequireRank(frames, 3, "context_window", "frames");
  if (radius < 0) throw DimensionError("context_window: negative radius");
  const int64_t n = frames.dim(0), t_len = frames.dim(1), bins = frames.dim(2);
  const int64_t span = 2 * radius + 1;
  auto out = Tensor<T>::Zeros({n, t_len, span * bins});
  const T* x = frames.ptr();
  T* y = out.ptr();
  for (int64_t b = 0; b < n; ++b) {
    for (int64_t t = 0; t < t_len; ++t) {
      for (int64_t o = 0; o < span; ++o) {
        const int64_t src = t + o - radius;
        if (src < 0 || src >= t_len) continue;
        std::copy(x + (b * t_len + src) * bins, x + (b * t_len + src + 1) * bins,
                  y + ((b * t_len + t) * span + o) * bins);
      }
    }
  }
  if (tape.ShouldRecord({&frames})) {
    tape.Record(out, [frames, out, n, t_len, bins, span, radius]() mutable {
      const T* g = out.grad().data();
      T* gx = frames.grad().data();
      for (int64_t b = 0; b < n; ++b) {
        for (int64_t t = 0; t < t_len; ++t) {
          for (int64_t o = 0; o < span; ++o) {
            const int64_t src = t + o - radius;
            if (src < 0 || src >= t_len) continue;
            kn::Axpy(T(1), g + ((b * t_len + t) * span + o) * bins,
                          gx + (b * t_len + src) * bins, bins);
          }
        }
      }
    });
  }
  return out;
}

#define DEREVERB_INSTANTIATE_OPS(T)                                          \
  template Tensor<T> MatMul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);   \
  template Tensor<T> Linear(Tape<T>&, const Tensor<T>&, const Tensor<T>&,    \
                            const Tensor<T>&);                               \
  template Tensor<T> Add(Tape<T>&, const Tensor<T>&, const Tensor<T>&);      \
  template Tensor<T> Hadamard(Tape<T>&, const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> AddBias(Tape<T>&, const Tensor<T>&, const Tensor<T>&);  \
  template Tensor<T> Sigmoid(Tape<T>&, const Tensor<T>&);                    \
  template Tensor<T> Tanh(Tape<T>&, const Tensor<T>&);                       \
  template Tensor<T> Interpolate(Tape<T>&, const Tensor<T>&,                 \
                                 const Tensor<T>&, const Tensor<T>&);        \
  template Tensor<T> Sum(Tape<T>&, const Tensor<T>&);                        \
  template Tensor<T> Reshape(Tape<T>&, const Tensor<T>&, const Shape&);      \
  template Tensor<T> Conv2d(Tape<T>&, const Tensor<T>&, const Tensor<T>&,    \
                            const Tensor<T>&, Stride2d);                     \
  template Tensor<T> SelectStep(Tape<T>&, const Tensor<T>&, int64_t);        \
  template Tensor<T> StackSteps(Tape<T>&, const std::vector<Tensor<T>>&);    \
  template Tensor<T> FramesToImage(Tape<T>&, const Tensor<T>&, int64_t);     \
  template Tensor<T> ImageToFrames(Tape<T>&, const Tensor<T>&);              \
  template Tensor<T> ContextWindow(Tape<T>&, const Tensor<T>&, int64_t);

DEREVERB_INSTANTIATE_OPS(float)
DEREVERB_INSTANTIATE_OPS(double)
DEREVERB_INSTANTIATE_OPS(long double)

#undef DEREVERB_INSTANTIATE_OPS

}  // namespace dereverb::ops
