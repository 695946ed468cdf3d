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

#pragma once

#include <cstddef>
#include <cstdint>

// Numeric inner loops used by the autodiff graph and the optimizer.
//
// pofa::kernels          OpenMP-parallel versions (what the library runs).
// pofa::kernels::serial  straightforward single-threaded reference versions,
//                        kept for tests and the benchmark.
//
// Every parallel kernel partitions work so that each output element is
// produced by exactly one thread with the same accumulation order as the
// reference, so results are bit-identical for any thread count.

namespace pofa::kernels {

// C[b] (+)= op(A[b]) * op(B[b]) for b in [0, batch). Per batch entry A is
// m x k (stored k x m when trans_a), B is k x n (stored n x k when trans_b),
// C is m x n. Batches are contiguous.
struct GemmDims {
  std::size_t batch = 1;
  std::size_t m = 0;
  std::size_t k = 0;
  std::size_t n = 0;
  bool trans_a = false;
  bool trans_b = false;
};

enum class BinaryOp { add, sub, mul };

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  std::int64_t step = 1;  // 1-based, for bias correction
};

// GELU, tanh approximation.
inline constexpr double kGeluCubic = 0.044715;
inline constexpr double kSqrt2OverPi = 0.7978845608028654;

template <class T>
void gemm(const T* a, const T* b, T* c, const GemmDims& d, bool accumulate);

// y = a (op) b with b broadcast over the `outer` leading blocks of a.
template <class T>
void broadcast_binary(BinaryOp op, const T* a, const T* b, T* y, std::size_t outer,
                      std::size_t inner);

// y[j] += scale * sum_o x[o * inner + j]
template <class T>
void reduce_outer(const T* x, T* y, std::size_t outer, std::size_t inner, T scale);

template <class T>
void softmax_rows(const T* x, T* y, std::size_t rows, std::size_t cols);

// dx += y * (dy - <dy, y>) per row.
template <class T>
void softmax_rows_backward(const T* y, const T* dy, T* dx, std::size_t rows, std::size_t cols);

// y = (x - mean) * rstd * gain + bias; xhat and rstd are saved for backward.
template <class T>
void layer_norm_rows(const T* x, const T* gain, const T* bias, T* y, T* xhat, T* rstd,
                     std::size_t rows, std::size_t cols, double eps);

// Accumulates into dx, dgain, dbias; any of them may be null.
template <class T>
void layer_norm_rows_backward(const T* xhat, const T* rstd, const T* gain, const T* dy, T* dx,
                              T* dgain, T* dbias, std::size_t rows, std::size_t cols);

template <class T>
void gelu(const T* x, T* y, std::size_t n);

// dx += dy * gelu'(x)
template <class T>
void gelu_backward(const T* x, const T* dy, T* dx, std::size_t n);

// Decoupled-weight-decay Adam. Positions with mask[i] == 0 are skipped
// entirely (weight, and both moments). mask may be null.
void adamw_update(float* w, const float* g, float* m, float* v, const std::uint8_t* mask,
                  std::size_t n, const AdamHyper& hp, bool decay);

// Number of threads the parallel kernels will use (1 without OpenMP).
int max_threads();

namespace serial {

template <class T>
void gemm(const T* a, const T* b, T* c, const GemmDims& d, bool accumulate);

template <class T>
void broadcast_binary(BinaryOp op, const T* a, const T* b, T* y, std::size_t outer,
                      std::size_t inner);

template <class T>
void reduce_outer(const T* x, T* y, std::size_t outer, std::size_t inner, T scale);

template <class T>
void softmax_rows(const T* x, T* y, std::size_t rows, std::size_t cols);

template <class T>
void softmax_rows_backward(const T* y, const T* dy, T* dx, std::size_t rows, std::size_t cols);

template <class T>
void layer_norm_rows(const T* x, const T* gain, const T* bias, T* y, T* xhat, T* rstd,
                     std::size_t rows, std::size_t cols, double eps);

template <class T>
void layer_norm_rows_backward(const T* xhat, const T* rstd, const T* gain, const T* dy, T* dx,
                              T* dgain, T* dbias, std::size_t rows, std::size_t cols);

template <class T>
void gelu(const T* x, T* y, std::size_t n);

template <class T>
void gelu_backward(const T* x, const T* dy, T* dx, std::size_t n);

void adamw_update(float* w, const float* g, float* m, float* v, const std::uint8_t* mask,
                  std::size_t n, const AdamHyper& hp, bool decay);

}  // namespace serial
}  // namespace pofa::kernels
