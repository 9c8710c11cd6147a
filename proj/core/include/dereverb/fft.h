// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DEREVERB_FFT_H_
#define DEREVERB_FFT_H_

#include <complex>
#include <memory>
#include <span>

namespace dereverb {

// Real-input FFT of fixed size n backed by FFTW. Forward produces the
// n/2 + 1 non-negative-frequency bins; Inverse maps them back and divides
// by n, so Inverse(Forward(x)) == x. Execution is thread-safe; plans are
// created once per size and shared.
template <typename Real>
class RealFft {
 public:
  explicit RealFft(int n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  int size() const { return n_; }
  int bins() const { return n_ / 2 + 1; }

  void Forward(std::span<const Real> in,
               std::span<std::complex<Real>> out) const;
  void Inverse(std::span<const std::complex<Real>> in,
               std::span<Real> out) const;

 private:
  struct Plans;
  int n_;
  std::unique_ptr<Plans> plans_;
};

// Complex FFT of fixed size n (forward e^{-j...}, inverse scaled by 1/n).
class ComplexFft {
 public:
  explicit ComplexFft(int n);
  ~ComplexFft();
  ComplexFft(const ComplexFft&) = delete;
  ComplexFft& operator=(const ComplexFft&) = delete;

  int size() const { return n_; }
  void Forward(std::span<const std::complex<double>> in,
               std::span<std::complex<double>> out) const;
  void Inverse(std::span<const std::complex<double>> in,
               std::span<std::complex<double>> out) const;

 private:
  struct Plans;
  int n_;
  std::unique_ptr<Plans> plans_;
};

// Shared instance for size n, created on first use.
template <typename Real>
const RealFft<Real>& GetRealFft(int n);
const ComplexFft& GetComplexFft(int n);

// Smallest power of two >= n.
int NextPowerOfTwo(int64_t n);

}  // namespace dereverb

#endif  // DEREVERB_FFT_H_
