// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Dense kernels shared by the tensor ops. All reductions run in a fixed order
// that does not depend on the extent of any other axis, so results are
// reproducible and appending exact-zero rows leaves sums untouched.

#ifndef DEREVERB_CORE_SRC_KERNELS_H_
#define DEREVERB_CORE_SRC_KERNELS_H_

#include <cstdint>

namespace dereverb::kernels {

// Dot product with eight interleaved partial sums, combined pairwise.
template <typename T>
inline T Dot(const T* a, const T* b, int64_t n) {
  T acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (int u = 0; u < 8; ++u) acc[u] += a[i + u] * b[i + u];
  }
  for (int u = 0; i < n; ++i, ++u) acc[u] += a[i] * b[i];
  return ((acc[0] + acc[4]) + (acc[1] + acc[5])) +
         ((acc[2] + acc[6]) + (acc[3] + acc[7]));
}

// y += alpha * x
template <typename T>
inline void Axpy(T alpha, const T* x, T* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// C[M x N] += A[M x K] * B[K x N]
template <typename T>
void GemmNN(int64_t m, int64_t n, int64_t k, const T* a, const T* b, T* c) {
  for (int64_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    const T* ai = a + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const T aip = ai[p];
      if (aip == T(0)) continue;
      Axpy(aip, b + p * n, ci, n);
    }
  }
}

// C[M x N] += A[M x K] * B[N x K]^T
template <typename T>
void GemmNT(int64_t m, int64_t n, int64_t k, const T* a, const T* b, T* c) {
  for (int64_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    T* ci = c + i * n;
    for (int64_t j = 0; j < n; ++j) ci[j] += Dot(ai, b + j * k, k);
  }
}

// C[M x N] += A[K x M]^T * B[K x N]; reduction over K in ascending order.
template <typename T>
void GemmTN(int64_t m, int64_t n, int64_t k, const T* a, const T* b, T* c) {
  for (int64_t p = 0; p < k; ++p) {
    const T* ap = a + p * m;
    const T* bp = b + p * n;
    for (int64_t i = 0; i < m; ++i) {
      const T api = ap[i];
      if (api == T(0)) continue;
      Axpy(api, bp, c + i * n, n);
    }
  }
}

}  // namespace dereverb::kernels

#endif  // DEREVERB_CORE_SRC_KERNELS_H_
