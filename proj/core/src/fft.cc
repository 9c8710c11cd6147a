// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dereverb/fft.h"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <vector>

#include "dereverb/error.h"

namespace dereverb {
namespace {

// FFTW's planner is not thread-safe; execution with the new-array interface
// is.
std::mutex& PlannerMutex() {
  static std::mutex m;
  return m;
}

constexpr unsigned kPlanFlags = FFTW_ESTIMATE | FFTW_UNALIGNED;

void CheckSize(int n, const char* what) {
  if (n < 1) {
    throw ContractError(std::string(what) + ": size must be positive, got " +
                        std::to_string(n));
  }
}

template <typename A, typename B>
void CheckSpans(const A& in, size_t in_size, const B& out, size_t out_size,
                const char* what) {
  if (in.size() != in_size || out.size() != out_size) {
    throw DimensionError(std::string(what) + ": expected " +
                         std::to_string(in_size) + " -> " +
                         std::to_string(out_size) + " values, got " +
                         std::to_string(in.size()) + " -> " +
                         std::to_string(out.size()));
  }
}

}  // namespace

template <>
struct RealFft<double>::Plans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

template <>
struct RealFft<float>::Plans {
  fftwf_plan forward = nullptr;
  fftwf_plan inverse = nullptr;
};

template <>
RealFft<double>::RealFft(int n) : n_(n), plans_(std::make_unique<Plans>()) {
  CheckSize(n, "RealFft");
  std::vector<double> r(static_cast<size_t>(n));
  std::vector<fftw_complex> c(static_cast<size_t>(n / 2 + 1));
  std::lock_guard<std::mutex> lock(PlannerMutex());
  plans_->forward = fftw_plan_dft_r2c_1d(n, r.data(), c.data(), kPlanFlags);
  plans_->inverse = fftw_plan_dft_c2r_1d(n, c.data(), r.data(), kPlanFlags);
}

template <>
RealFft<float>::RealFft(int n) : n_(n), plans_(std::make_unique<Plans>()) {
  CheckSize(n, "RealFft");
  std::vector<float> r(static_cast<size_t>(n));
  std::vector<fftwf_complex> c(static_cast<size_t>(n / 2 + 1));
  std::lock_guard<std::mutex> lock(PlannerMutex());
  plans_->forward = fftwf_plan_dft_r2c_1d(n, r.data(), c.data(), kPlanFlags);
  plans_->inverse = fftwf_plan_dft_c2r_1d(n, c.data(), r.data(), kPlanFlags);
}

template <>
RealFft<double>::~RealFft() {
  std::lock_guard<std::mutex> lock(PlannerMutex());
  fftw_destroy_plan(plans_->forward);
  fftw_destroy_plan(plans_->inverse);
}

template <>
RealFft<float>::~RealFft() {
  std::lock_guard<std::mutex> lock(PlannerMutex());
  fftwf_destroy_plan(plans_->forward);
  fftwf_destroy_plan(plans_->inverse);
}

template <>
void RealFft<double>::Forward(std::span<const double> in,
                              std::span<std::complex<double>> out) const {
  CheckSpans(in, static_cast<size_t>(n_), out, static_cast<size_t>(bins()),
             "RealFft::Forward");
  std::vector<double> scratch(in.begin(), in.end());
  fftw_execute_dft_r2c(plans_->forward, scratch.data(),
                       reinterpret_cast<fftw_complex*>(out.data()));
}

template <>
void RealFft<float>::Forward(std::span<const float> in,
                             std::span<std::complex<float>> out) const {
  CheckSpans(in, static_cast<size_t>(n_), out, static_cast<size_t>(bins()),
             "RealFft::Forward");
  std::vector<float> scratch(in.begin(), in.end());
  fftwf_execute_dft_r2c(plans_->forward, scratch.data(),
                        reinterpret_cast<fftwf_complex*>(out.data()));
}

template <>
void RealFft<double>::Inverse(std::span<const std::complex<double>> in,
                              std::span<double> out) const {
  CheckSpans(in, static_cast<size_t>(bins()), out, static_cast<size_t>(n_),
             "RealFft::Inverse");
  // c2r overwrites its input.
  std::vector<std::complex<double>> scratch(in.begin(), in.end());
  fftw_execute_dft_c2r(plans_->inverse,
                       reinterpret_cast<fftw_complex*>(scratch.data()),
                       out.data());
  const double scale = 1.0 / n_;
  for (double& v : out) v *= scale;
}

template <>
void RealFft<float>::Inverse(std::span<const std::complex<float>> in,
                             std::span<float> out) const {
  CheckSpans(in, static_cast<size_t>(bins()), out, static_cast<size_t>(n_),
             "RealFft::Inverse");
  std::vector<std::complex<float>> scratch(in.begin(), in.end());
  fftwf_execute_dft_c2r(plans_->inverse,
                        reinterpret_cast<fftwf_complex*>(scratch.data()),
                        out.data());
  const float scale = 1.0f / static_cast<float>(n_);
  for (float& v : out) v *= scale;
}

struct ComplexFft::Plans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

ComplexFft::ComplexFft(int n) : n_(n), plans_(std::make_unique<Plans>()) {
  CheckSize(n, "ComplexFft");
  std::vector<fftw_complex> a(static_cast<size_t>(n)), b(static_cast<size_t>(n));
  std::lock_guard<std::mutex> lock(PlannerMutex());
  plans_->forward =
      fftw_plan_dft_1d(n, a.data(), b.data(), FFTW_FORWARD, kPlanFlags);
  plans_->inverse =
      fftw_plan_dft_1d(n, a.data(), b.data(), FFTW_BACKWARD, kPlanFlags);
}

ComplexFft::~ComplexFft() {
  std::lock_guard<std::mutex> lock(PlannerMutex());
  fftw_destroy_plan(plans_->forward);
  fftw_destroy_plan(plans_->inverse);
}

void ComplexFft::Forward(std::span<const std::complex<double>> in,
                         std::span<std::complex<double>> out) const {
  CheckSpans(in, static_cast<size_t>(n_), out, static_cast<size_t>(n_),
             "ComplexFft::Forward");
  std::vector<std::complex<double>> scratch(in.begin(), in.end());
  fftw_execute_dft(plans_->forward,
                   reinterpret_cast<fftw_complex*>(scratch.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
}

void ComplexFft::Inverse(std::span<const std::complex<double>> in,
                         std::span<std::complex<double>> out) const {
  CheckSpans(in, static_cast<size_t>(n_), out, static_cast<size_t>(n_),
             "ComplexFft::Inverse");
  std::vector<std::complex<double>> scratch(in.begin(), in.end());
  fftw_execute_dft(plans_->inverse,
                   reinterpret_cast<fftw_complex*>(scratch.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  const double scale = 1.0 / n_;
  for (auto& v : out) v *= scale;
}

namespace {

template <typename F>
std::mutex& CacheMutex() {
  static std::mutex m;
  return m;
}

}  // namespace

template <typename Real>
const RealFft<Real>& GetRealFft(int n) {
  static std::map<int, std::unique_ptr<RealFft<Real>>> cache;
  std::lock_guard<std::mutex> lock(CacheMutex<RealFft<Real>>());
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<RealFft<Real>>(n);
  return *slot;
}

template const RealFft<float>& GetRealFft<float>(int);
template const RealFft<double>& GetRealFft<double>(int);

const ComplexFft& GetComplexFft(int n) {
  static std::map<int, std::unique_ptr<ComplexFft>> cache;
  std::lock_guard<std::mutex> lock(CacheMutex<ComplexFft>());
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<ComplexFft>(n);
  return *slot;
}

int NextPowerOfTwo(int64_t n) {
  int64_t p = 1;
  while (p < n) p <<= 1;
  return static_cast<int>(p);
}

}  // namespace dereverb
