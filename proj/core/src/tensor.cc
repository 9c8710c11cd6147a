// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dereverb/tensor.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dereverb/error.h"

namespace dereverb {

std::string ShapeString(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

int64_t NumElements(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

namespace {

void ValidateShape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must be non-empty");
  for (int64_t d : shape) {
    if (d <= 0) {
      throw DimensionError("tensor extents must be positive, got " +
                           ShapeString(shape));
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> Tensor<T>::Zeros(const Shape& shape, bool requires_grad) {
  return Full(shape, T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::Full(const Shape& shape, T value, bool requires_grad) {
  ValidateShape(shape);
  Tensor t;
  t.s_ = std::make_shared<TensorStorage<T>>();
  t.s_->shape = shape;
  t.s_->data.assign(static_cast<size_t>(NumElements(shape)), value);
  t.s_->requires_grad = requires_grad;
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::FromData(const Shape& shape, std::vector<T> data,
                              bool requires_grad) {
  ValidateShape(shape);
  if (static_cast<int64_t>(data.size()) != NumElements(shape)) {
    throw DimensionError("data length " + std::to_string(data.size()) +
                         " does not match shape " + ShapeString(shape));
  }
  Tensor t;
  t.s_ = std::make_shared<TensorStorage<T>>();
  t.s_->shape = shape;
  t.s_->data = std::move(data);
  t.s_->requires_grad = requires_grad;
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::Scalar(T value, bool requires_grad) {
  return Full({1}, value, requires_grad);
}

template <typename T>
int64_t Tensor<T>::dim(int i) const {
  const int r = rank();
  if (i < 0) i += r;
  if (i < 0 || i >= r) {
    throw DimensionError("axis " + std::to_string(i) + " out of range for " +
                         ShapeString(shape()));
  }
  return s_->shape[static_cast<size_t>(i)];
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw ContractError("item() on non-scalar tensor " + ShapeString(shape()));
  }
  return s_->data[0];
}

template <typename T>
std::span<T> Tensor<T>::grad() const {
  if (s_->grad.empty()) s_->grad.assign(s_->data.size(), T(0));
  return s_->grad;
}

template <typename T>
void Tensor<T>::ZeroGrad() const {
  std::fill(s_->grad.begin(), s_->grad.end(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::Clone() const {
  Tensor t;
  t.s_ = std::make_shared<TensorStorage<T>>(*s_);
  return t;
}

template <typename T>
bool Tensor<T>::AllFinite() const {
  return std::all_of(s_->data.begin(), s_->data.end(),
                     [](T v) { return std::isfinite(v); });
}

template <typename T>
bool Tape<T>::ShouldRecord(
    std::initializer_list<const Tensor<T>*> inputs) const {
  if (!recording_) return false;
  for (const Tensor<T>* t : inputs) {
    if (t && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

template <typename T>
void Tape<T>::CheckFinite(const Tensor<T>& t, const char* op) const {
  if (check_finite_ && !t.AllFinite()) {
    throw ContractError(std::string("non-finite value produced by ") + op +
                        " " + ShapeString(t.shape()));
  }
}

template <typename T>
void Tape<T>::Record(Tensor<T> output, std::function<void()> backward) {
  output.set_requires_grad(true);
  output.mark_non_leaf();
  nodes_.push_back({std::move(output), std::move(backward)});
}

template <typename T>
void Tape<T>::Backward(Tensor<T> loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() requires a scalar loss, got " +
                        (loss.defined() ? ShapeString(loss.shape())
                                        : std::string("undefined")));
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward() on a loss that does not require grad");
  }
  for (Node& node : nodes_) node.output.ZeroGrad();
  loss.grad()[0] += T(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (!it->output.has_grad()) continue;
    it->backward();
  }
  if (check_finite_) {
    for (const Node& node : nodes_) {
      for (T g : node.output.grad()) {
        if (!std::isfinite(g)) {
          throw ContractError("non-finite gradient during backward");
        }
      }
    }
  }
}

template class Tensor<float>;
template class Tensor<double>;
template class Tensor<long double>;
template class Tape<float>;
template class Tape<double>;
template class Tape<long double>;

}  // namespace dereverb
