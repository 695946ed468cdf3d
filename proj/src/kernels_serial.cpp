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

#include <algorithm>
#include <cmath>

#include "kernel_math.hpp"
#include "pofa/kernels.hpp"

namespace pofa::kernels::serial {

template <class T>
void gemm(const T* a, const T* b, T* c, const GemmDims& d, bool accumulate) {
  const std::size_t sa = d.m * d.k, sb = d.k * d.n, sc = d.m * d.n;
  for (std::size_t bt = 0; bt < d.batch; ++bt) {
    const T* A = a + bt * sa;
    const T* B = b + bt * sb;
    T* C = c + bt * sc;
    for (std::size_t i = 0; i < d.m; ++i) {
      for (std::size_t j = 0; j < d.n; ++j) {
        T sum = T(0);
        for (std::size_t p = 0; p < d.k; ++p) {
          const T av = d.trans_a ? A[p * d.m + i] : A[i * d.k + p];
          const T bv = d.trans_b ? B[j * d.k + p] : B[p * d.n + j];
          sum += av * bv;
        }
        C[i * d.n + j] = accumulate ? C[i * d.n + j] + sum : sum;
      }
    }
  }
}

template <class T>
void broadcast_binary(BinaryOp op, const T* a, const T* b, T* y, std::size_t outer,
                      std::size_t inner) {
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t j = 0; j < inner; ++j)
      y[o * inner + j] = detail::binary(op, a[o * inner + j], b[j]);
}

template <class T>
void reduce_outer(const T* x, T* y, std::size_t outer, std::size_t inner, T scale) {
  for (std::size_t j = 0; j < inner; ++j) {
    T sum = T(0);
    for (std::size_t o = 0; o < outer; ++o) sum += x[o * inner + j];
    y[j] += scale * sum;
  }
}

template <class T>
void softmax_rows(const T* x, T* y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x + r * cols;
    T* yr = y + r * cols;
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
  for (std::size_t r = 0; r < rows; ++r) {
    const T* yr = y + r * cols;
    const T* dyr = dy + r * cols;
    T dot = T(0);
    for (std::size_t j = 0; j < cols; ++j) dot += dyr[j] * yr[j];
    for (std::size_t j = 0; j < cols; ++j) dx[r * cols + j] += yr[j] * (dyr[j] - dot);
  }
}

template <class T>
void layer_norm_rows(const T* x, const T* gain, const T* bias, T* y, T* xhat, T* rstd,
                     std::size_t rows, std::size_t cols, double eps) {
  const T n = static_cast<T>(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x + r * cols;
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
      xhat[r * cols + j] = h;
      y[r * cols + j] = h * gain[j] + bias[j];
    }
  }
}

template <class T>
void layer_norm_rows_backward(const T* xhat, const T* rstd, const T* gain, const T* dy, T* dx,
                              T* dgain, T* dbias, std::size_t rows, std::size_t cols) {
  const T n = static_cast<T>(cols);
  if (dx) {
    for (std::size_t r = 0; r < rows; ++r) {
      const T* h = xhat + r * cols;
      const T* g = dy + r * cols;
      T mean_d = T(0), mean_dh = T(0);
      for (std::size_t j = 0; j < cols; ++j) {
        const T dh = g[j] * gain[j];
        mean_d += dh;
        mean_dh += dh * h[j];
      }
      mean_d /= n;
      mean_dh /= n;
      for (std::size_t j = 0; j < cols; ++j) {
        const T dh = g[j] * gain[j];
        dx[r * cols + j] += rstd[r] * (dh - mean_d - h[j] * mean_dh);
      }
    }
  }
  for (std::size_t j = 0; j < cols; ++j) {
    T sg = T(0), sb = T(0);
    for (std::size_t r = 0; r < rows; ++r) {
      sg += dy[r * cols + j] * xhat[r * cols + j];
      sb += dy[r * cols + j];
    }
    if (dgain) dgain[j] += sg;
    if (dbias) dbias[j] += sb;
  }
}

template <class T>
void gelu(const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = detail::gelu_value(x[i]);
}

template <class T>
void gelu_backward(const T* x, const T* dy, T* dx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dx[i] += dy[i] * detail::gelu_derivative(x[i]);
}

void adamw_update(float* w, const float* g, float* m, float* v, const std::uint8_t* mask,
                  std::size_t n, const AdamHyper& hp, bool decay) {
  const auto c = detail::adam_coefficients(hp, decay);
  for (std::size_t i = 0; i < n; ++i) {
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

}  // namespace pofa::kernels::serial
