// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DEREVERB_GRADCHECK_H_
#define DEREVERB_GRADCHECK_H_

#include <functional>
#include <string>
#include <vector>

#include "dereverb/tensor.h"

namespace dereverb {

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

struct GradCheckBlock {
  std::string name;
  int64_t checked = 0;     // number of entries compared
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckBlock> blocks;
  double tolerance = 0.0;
  double max_rel_error() const;
  bool passed() const { return max_rel_error() <= tolerance; }
};

struct GradCheckOptions {
  double epsilon = 1e-5;
  double tolerance = 1e-6;
  // Entries per block to compare; <= 0 compares every entry. Larger blocks
  // are sampled at evenly spaced indices.
  int64_t max_entries_per_block = 0;
  // 2: (f(p+h) - f(p-h)) / 2h. 4: Richardson combination of the differences
  // at h and 2h, truncation error O(h^4).
  int order = 2;
};

// r = |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double RelativeGradError(double analytic, double numeric);

// Central-difference estimates of d loss / d x for the entries `indices` of
// `x` (all entries when empty), of the given order (2 or 4). `x` is
// restored afterwards.
template <typename T>
std::vector<double> CentralDifferences(
    const std::function<Tensor<T>(Tape<T>&)>& loss, Tensor<T> x,
    double epsilon, const std::vector<int64_t>& indices = {}, int order = 2);

// Compares reverse-mode gradients against central finite differences,
//   g_fd = (f(p + eps) - f(p - eps)) / (2 eps),
//   r    = |g_ad - g_fd| / max(|g_ad|, |g_fd|, 1e-8),
// for every parameter block. `loss` must build its graph on the given tape
// and return a scalar; it is called with a non-recording tape for the
// perturbed evaluations. Throws ContractError when two unperturbed
// evaluations disagree (non-deterministic function).
template <typename T>
GradCheckReport FiniteDiffCheck(
    const std::function<Tensor<T>(Tape<T>&)>& loss,
    const std::vector<NamedTensor<T>>& params,
    const GradCheckOptions& options = {});

// As FiniteDiffCheck, but the differences are taken on `reference`: the same
// function built in a wider type R over a copy of the parameters, given in
// the same order. Used where differences in T itself are limited by
// roundoff rather than by the gradient under test. Instantiated for
// (float, double) and (double, long double).
template <typename T, typename R>
GradCheckReport ReferenceDiffCheck(
    const std::function<Tensor<T>(Tape<T>&)>& loss,
    const std::vector<NamedTensor<T>>& params,
    const std::function<Tensor<R>(Tape<R>&)>& reference,
    const std::vector<NamedTensor<R>>& reference_params,
    const GradCheckOptions& options = {});

}  // namespace dereverb

#endif  // DEREVERB_GRADCHECK_H_
