// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dereverb/gradcheck.h"

#include <algorithm>
#include <cmath>

#include "dereverb/error.h"

namespace dereverb {

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& b : blocks) m = std::max(m, b.max_rel_error);
  return m;
}

namespace {

template <typename T>
long double Evaluate(const std::function<Tensor<T>(Tape<T>&)>& loss) {
  Tape<T> tape(/*recording=*/false);
  return static_cast<long double>(loss(tape).item());
}

template <typename T>
void CheckDeterministic(const std::function<Tensor<T>(Tape<T>&)>& loss) {
  const long double f0 = Evaluate(loss);
  if (Evaluate(loss) != f0) {
    throw ContractError("finite_diff_check: loss is not deterministic");
  }
}

template <typename T>
void AccumulateGradients(const std::function<Tensor<T>(Tape<T>&)>& loss,
                         const std::vector<NamedTensor<T>>& params) {
  for (const auto& p : params) {
    p.tensor.set_requires_grad(true);
    p.tensor.ZeroGrad();
  }
  Tape<T> tape;
  Tensor<T> l = loss(tape);
  tape.Backward(l);
}

std::vector<int64_t> SampleIndices(int64_t n, int64_t max_entries) {
  std::vector<int64_t> indices;
  if (max_entries <= 0 || n <= max_entries) {
    for (int64_t i = 0; i < n; ++i) indices.push_back(i);
  } else if (max_entries == 1) {
    indices.push_back(0);
  } else {
    for (int64_t j = 0; j < max_entries; ++j) {
      indices.push_back(j * (n - 1) / (max_entries - 1));
    }
  }
  return indices;
}

// Compares the gradients held by `analytic` with differences of `loss`
// taken on `perturbed`, block by block.
template <typename T, typename R>
GradCheckReport Compare(const std::vector<NamedTensor<T>>& analytic,
                        const std::function<Tensor<R>(Tape<R>&)>& loss,
                        const std::vector<NamedTensor<R>>& perturbed,
                        const GradCheckOptions& options) {
  if (analytic.size() != perturbed.size()) {
    throw ContractError("finite_diff_check: parameter lists differ in length");
  }
  GradCheckReport report;
  report.tolerance = options.tolerance;
  for (size_t k = 0; k < analytic.size(); ++k) {
    const Tensor<T>& t = analytic[k].tensor;
    if (t.shape() != perturbed[k].tensor.shape()) {
      throw ContractError("finite_diff_check: block '" + analytic[k].name +
                          "' differs in shape from its reference");
    }
    GradCheckBlock block;
    block.name = analytic[k].name;
    const auto indices = SampleIndices(t.numel(), options.max_entries_per_block);
    const std::vector<double> numeric = CentralDifferences(
        loss, perturbed[k].tensor, options.epsilon, indices, options.order);
    std::span<T> grad = t.grad();
    for (size_t j = 0; j < indices.size(); ++j) {
      const double g_ad =
          static_cast<double>(grad[static_cast<size_t>(indices[j])]);
      block.max_abs_error =
          std::max(block.max_abs_error, std::abs(g_ad - numeric[j]));
      block.max_rel_error =
          std::max(block.max_rel_error, RelativeGradError(g_ad, numeric[j]));
      ++block.checked;
    }
    report.blocks.push_back(block);
  }
  return report;
}

}  // namespace

double RelativeGradError(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

template <typename T>
std::vector<double> CentralDifferences(
    const std::function<Tensor<T>(Tape<T>&)>& loss, Tensor<T> x,
    double epsilon, const std::vector<int64_t>& indices, int order) {
  if (order != 2 && order != 4) {
    throw ContractError("finite_diff_check: order must be 2 or 4");
  }
  const std::vector<int64_t> which =
      indices.empty() ? SampleIndices(x.numel(), 0) : indices;
  std::span<T> data = x.data();
  std::vector<double> out;
  out.reserve(which.size());
  for (int64_t i : which) {
    T& slot = data[static_cast<size_t>(i)];
    const T saved = slot;
    // Symmetric difference at offset h, divided by the step actually taken
    // after rounding to T.
    auto diff = [&](double h) {
      const T eps = static_cast<T>(h);
      slot = saved + eps;
      const long double fp = Evaluate(loss);
      slot = saved - eps;
      const long double fm = Evaluate(loss);
      slot = saved;
      const long double step = static_cast<long double>(saved + eps) -
                               static_cast<long double>(saved - eps);
      return (fp - fm) / step;
    };
    const long double d1 = diff(epsilon);
    long double g = d1;
    if (order == 4) g = (4 * d1 - diff(2 * epsilon)) / 3;  // Richardson
    out.push_back(static_cast<double>(g));
  }
  return out;
}

template <typename T>
GradCheckReport FiniteDiffCheck(
    const std::function<Tensor<T>(Tape<T>&)>& loss,
    const std::vector<NamedTensor<T>>& params,
    const GradCheckOptions& options) {
  CheckDeterministic(loss);
  AccumulateGradients(loss, params);
  return Compare(params, loss, params, options);
}

template <typename T, typename R>
GradCheckReport ReferenceDiffCheck(
    const std::function<Tensor<T>(Tape<T>&)>& loss,
    const std::vector<NamedTensor<T>>& params,
    const std::function<Tensor<R>(Tape<R>&)>& reference,
    const std::vector<NamedTensor<R>>& reference_params,
    const GradCheckOptions& options) {
  CheckDeterministic(loss);
  CheckDeterministic(reference);
  AccumulateGradients(loss, params);
  return Compare(params, reference, reference_params, options);
}

#define DEREVERB_INSTANTIATE_FD(T)                                           \
  template std::vector<double> CentralDifferences<T>(                        \
      const std::function<Tensor<T>(Tape<T>&)>&, Tensor<T>, double,          \
      const std::vector<int64_t>&, int);                                       \
  template GradCheckReport FiniteDiffCheck<T>(                               \
      const std::function<Tensor<T>(Tape<T>&)>&,                             \
      const std::vector<NamedTensor<T>>&, const GradCheckOptions&);

DEREVERB_INSTANTIATE_FD(float)
DEREVERB_INSTANTIATE_FD(double)
DEREVERB_INSTANTIATE_FD(long double)

#undef DEREVERB_INSTANTIATE_FD

#define DEREVERB_INSTANTIATE_REF(T, R)                                       \
  template GradCheckReport ReferenceDiffCheck<T, R>(                         \
      const std::function<Tensor<T>(Tape<T>&)>&,                             \
      const std::vector<NamedTensor<T>>&,                                    \
      const std::function<Tensor<R>(Tape<R>&)>&,                             \
      const std::vector<NamedTensor<R>>&, const GradCheckOptions&);

DEREVERB_INSTANTIATE_REF(float, double)
DEREVERB_INSTANTIATE_REF(double, long double)

#undef DEREVERB_INSTANTIATE_REF

}  // namespace dereverb
