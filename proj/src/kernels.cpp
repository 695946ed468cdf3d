// Copyright 2026 The pofa Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pofa/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "kernel_math.hpp"

namespace pofa::kernels {

namespace {
// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1u << 14;
using Index = std::ptrdiff_t;
}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

template <class T>
void gemm(const T* a, const T* b, T* c, const GemmDims& d, bool accumulate) {
  const std::size_t sa = d.m * d.k, sb = d.k * d.n, sc = d.m * d.n;
  const Index rows = static_cast<Index>(d.batch * d.m);
  const bool big = d.batch * d.m * d.n * d.k >= kParallelWork;

#pragma omp parallel if (big)
  {
    std::vector<T> acc(d.n);
#pragma omp for schedule(static)
    for (Index r = 0; r < rows; ++r) {
      const std::size_t bt = static_cast<std::size_t>(r) / d.m;
      const std::size_t i = static_cast<std::size_t>(r) % d.m;
      const T* A = a + bt * sa;
      const T* B = b + bt * sb;
      T* C = c + bt * sc + i * d.n;
      if (d.trans_b) {
        for (std::size_t j = 0; j < d.n; ++j) {
          const T* brow = B + j * d.k;
          T sum = T(0);
          for (std::size_t p = 0; p < d.k; ++p) {
            const T av = d.trans_a ? A[p * d.m + i] : A[i * d.k + p];
            sum += av * brow[p];
          }
          acc[j] = sum;
        }
      } else {
        std::fill(acc.begin(), acc.end(), T(0));
        for (std::size_t p = 0; p < d.k; ++p) {
          const T av = d.trans_a ? A[p * d.m + i] : A[i * d.k + p];
          const T* brow = B + p * d.n;
          for (std::size_t j = 0; j < d.n; ++j) acc[j] += av * brow[j];
        }
      }
      if (accumulate) {
        for (std::size_t j = 0; j < d.n; ++j) C[j] = C[j] + acc[j];
      } else {
        std::copy(acc.begin(), acc.end(), C);
      }
    }
  }
}

template <class T>
void broadcast_binary(BinaryOp op, const T* a, const T* b, T* y, std::size_t outer,
                      std::size_t inner) {
  const Index n = static_cast<Index>(outer * inner);
#pragma omp parallel for schedule(static) if (outer * inner >= kParallelWork)
  for (Index i = 0; i < n; ++i) {
    const std::size_t j = static_cast<std::size_t>(i) % inner;
    y[i] = detail::binary(op, a[i], b[j]);
  }
}

template <class T>
void reduce_outer(const T* x, T* y, std::size_t outer, std::size_t inner, T scale) {
  const Index cols = static_cast<Index>(inner);
#pragma omp parallel for schedule(static) if (outer * inner >= kParallelWork)
  for (Index j = 0; j < cols; ++j) {
    T sum = T(0);
    for (std::size_t o = 0; o < outer; ++o) sum += x[o * inner + static_cast<std::size_t>(j)];
    y[j] += scale * sum;
  }
}

template <class T>
void softmax_rows(const T* x, T* y, std::size_t rows, std::size_t cols) {
  const Index nr = static_cast<Index>(rows);
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelWork)
  for (Index r = 0; r < nr; ++r) {
    const T* xr = x + static_cast<std::size_t>(r) * cols;
    T* yr = y + static_cast<std::size_t>(r) * cols;
    T mx = xr[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
    T sum = T(0);
    for (std::size_t j = 0; j < cols; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      sum += yr[j];
    }
    for (std::size_t j = 0; j < cols; ++j) yr[j] /= sum;
  }
}

template <class T>
void softmax_rows_backward(const T* y, const T* dy, T* dx, std::size_t rows, std::size_t cols) {
  const Index nr = static_cast<Index>(rows);
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelWork)
  for (Index r = 0; r < nr; ++r) {
    const std::size_t off = static_cast<std::size_t>(r) * cols;
    T dot = T(0);
    for (std::size_t j = 0; j < cols; ++j) dot += dy[off + j] * y[off + j];
    for (std::size_t j = 0; j < cols; ++j) dx[off + j] += y[off + j] * (dy[off + j] - dot);
  }
}

template <class T>
void layer_norm_rows(const T* x, const T* gain, const T* bias, T* y, T* xhat, T* rstd,
                     std::size_t rows, std::size_t cols, double eps) {
  const T n = static_cast<T>(cols);
  const Index nr = static_cast<Index>(rows);
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelWork)
  for (Index r = 0; r < nr; ++r) {
    const std::size_t off = static_cast<std::size_t>(r) * cols;
    const T* xr = x + off;
    T mean = T(0);
    for (std::size_t j = 0; j < cols; ++j) mean += xr[j];
    mean /= n;
    T var = T(0);
    for (std::size_t j = 0; j < cols; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= n;
    const T rs = T(1) / std::sqrt(var + static_cast<T>(eps));
    rstd[r] = rs;
    for (std::size_t j = 0; j < cols; ++j) {
      const T h = (xr[j] - mean) * rs;
      xhat[off + j] = h;
      y[off + j] = h * gain[j] + bias[j];
    }
  }
}

template <class T>
void layer_norm_rows_backward(const T* xhat, const T* rstd, const T* gain, const T* dy, T* dx,
                              T* dgain, T* dbias, std::size_t rows, std::size_t cols) {
  const T n = static_cast<T>(cols);
  const bool big = rows * cols >= kParallelWork;
  if (dx) {
    const Index nr = static_cast<Index>(rows);
#pragma omp parallel for schedule(static) if (big)
    for (Index r = 0; r < nr; ++r) {
      const std::size_t off = static_cast<std::size_t>(r) * cols;
      T mean_d = T(0), mean_dh = T(0);
      for (std::size_t j = 0; j < cols; ++j) {
        const T dh = dy[off + j] * gain[j];
        mean_d += dh;
        mean_dh += dh * xhat[off + j];
      }
      mean_d /= n;
      mean_dh /= n;
      for (std::size_t j = 0; j < cols; ++j) {
        const T dh = dy[off + j] * gain[j];
        dx[off + j] += rstd[r] * (dh - mean_d - xhat[off + j] * mean_dh);
      }
    }
  }
  if (dgain || dbias) {
    const Index nc = static_cast<Index>(cols);
#pragma omp parallel for schedule(static) if (big)
    for (Index j = 0; j < nc; ++j) {
      T sg = T(0), sb = T(0);
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t idx = r * cols + static_cast<std::size_t>(j);
        sg += dy[idx] * xhat[idx];
        sb += dy[idx];
      }
      if (dgain) dgain[j] += sg;
      if (dbias) dbias[j] += sb;
    }
  }
}

template <class T>
void gelu(const T* x, T* y, std::size_t n) {
  const Index nn = static_cast<Index>(n);
#pragma omp parallel for schedule(static) if (n >= kParallelWork)
  for (Index i = 0; i < nn; ++i) y[i] = detail::gelu_value(x[i]);
}

template <class T>
void gelu_backward(const T* x, const T* dy, T* dx, std::size_t n) {
  const Index nn = static_cast<Index>(n);
#pragma omp parallel for schedule(static) if (n >= kParallelWork)
  for (Index i = 0; i < nn; ++i) dx[i] += dy[i] * detail::gelu_derivative(x[i]);
}

void adamw_update(float* w, const float* g, float* m, float* v, const std::uint8_t* mask,
                  std::size_t n, const AdamHyper& hp, bool decay) {
  const auto c = detail::adam_coefficients(hp, decay);
  const Index nn = static_cast<Index>(n);
#pragma omp parallel for schedule(static) if (n >= kParallelWork)
  for (Index i = 0; i < nn; ++i) {
    if (mask && mask[i] == 0) continue;
    detail::adam_element(w[i], g[i], m[i], v[i], c);
  }
}

#define POFA_INSTANTIATE(T)                                                                    \
  template void gemm<T>(const T*, const T*, T*, const GemmDims&, bool);                       \
  template void broadcast_binary<T>(BinaryOp, const T*, const T*, T*, std::size_t,            \
                                    std::size_t);                                             \
  template void reduce_outer<T>(const T*, T*, std::size_t, std::size_t, T);                   \
  template void softmax_rows<T>(const T*, T*, std::size_t, std::size_t);                      \
  template void softmax_rows_backward<T>(const T*, const T*, T*, std::size_t, std::size_t);   \
  template void layer_norm_rows<T>(const T*, const T*, const T*, T*, T*, T*, std::size_t,     \
                                   std::size_t, double);                                      \
  template void layer_norm_rows_backward<T>(const T*, const T*, const T*, const T*, T*, T*,   \
                                            T*, std::size_t, std::size_t);                    \
  template void gelu<T>(const T*, T*, std::size_t);                                           \
  template void gelu_backward<T>(const T*, const T*, T*, std::size_t);

POFA_INSTANTIATE(float)
POFA_INSTANTIATE(double)
#undef POFA_INSTANTIATE

}  // namespace pofa::kernels
