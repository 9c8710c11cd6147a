// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DEREVERB_TENSOR_H_
#define DEREVERB_TENSOR_H_

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dereverb {

using Shape = std::vector<int64_t>;

std::string ShapeString(const Shape& shape);
int64_t NumElements(const Shape& shape);

template <typename T>
struct TensorStorage {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  bool is_leaf = true;
};

// Dense row-major n-dimensional array with an optional gradient buffer.
//
// Tensor is a shared handle: copies alias the same storage, which is what
// lets the tape hand gradients back to parameters. Use Clone() for a deep
// copy. The element type (float or double) is the precision of the arena.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  static Tensor Zeros(const Shape& shape, bool requires_grad = false);
  static Tensor Full(const Shape& shape, T value, bool requires_grad = false);
  static Tensor FromData(const Shape& shape, std::vector<T> data,
                         bool requires_grad = false);
  static Tensor Scalar(T value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(s_); }
  const Shape& shape() const { return s_->shape; }
  int rank() const { return static_cast<int>(s_->shape.size()); }
  int64_t dim(int i) const;
  int64_t numel() const { return static_cast<int64_t>(s_->data.size()); }

  std::span<T> data() { return s_->data; }
  std::span<const T> data() const { return s_->data; }
  T* ptr() { return s_->data.data(); }
  const T* ptr() const { return s_->data.data(); }
  T item() const;

  bool requires_grad() const { return s_->requires_grad; }
  void set_requires_grad(bool value) const { s_->requires_grad = value; }
  bool is_leaf() const { return s_->is_leaf; }
  void mark_non_leaf() { s_->is_leaf = false; }

  bool has_grad() const { return !s_->grad.empty(); }
  // Allocates a zero gradient buffer if none exists. Const because the
  // gradient lives in the shared storage, not in the handle.
  std::span<T> grad() const;
  void ZeroGrad() const;

  Tensor Clone() const;
  bool SameStorage(const Tensor& other) const { return s_ == other.s_; }
  bool AllFinite() const;

 private:
  std::shared_ptr<TensorStorage<T>> s_;
};

// Records differentiable operations in execution order and replays their
// backward rules in reverse.
//
// Nodes are appended as operations run, so every node's inputs were produced
// by earlier nodes (or are leaves). A tape constructed with recording=false
// is an inference context: operations still compute but nothing is stored.
template <typename T>
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  size_t size() const { return nodes_.size(); }

  // When set (the default), every recorded output and every gradient produced
  // by Backward() is checked for NaN/Inf.
  void set_check_finite(bool value) { check_finite_ = value; }
  bool check_finite() const { return check_finite_; }

  // True when `output` should be recorded given these inputs.
  bool ShouldRecord(std::initializer_list<const Tensor<T>*> inputs) const;

  void Record(Tensor<T> output, std::function<void()> backward);

  // Seeds d(loss)/d(loss) = 1 and propagates to every tensor that requires a
  // gradient. Gradients of intermediate tensors are reset first; gradients of
  // leaves (parameters) accumulate across calls until ZeroGrad().
  void Backward(Tensor<T> loss);

  void Clear() { nodes_.clear(); }

  // Throws ContractError when `t` holds NaN/Inf and checking is enabled.
  void CheckFinite(const Tensor<T>& t, const char* op) const;

 private:
  struct Node {
    Tensor<T> output;
    std::function<void()> backward;
  };
  bool recording_;
  bool check_finite_ = true;
  std::vector<Node> nodes_;
};

}  // namespace dereverb

#endif  // DEREVERB_TENSOR_H_
