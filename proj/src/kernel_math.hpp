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

// Per-element formulas shared by the parallel and serial kernels. Keeping a
// single definition is what makes the two bit-identical.

#include <cmath>
#include <cstdint>

#include "pofa/kernels.hpp"

namespace pofa::kernels::detail {

template <class T>
inline T gelu_value(T x) {
  const T c = static_cast<T>(kSqrt2OverPi);
  const T a = static_cast<T>(kGeluCubic);
  const T u = c * (x + a * x * x * x);
  return T(0.5) * x * (T(1) + std::tanh(u));
}

template <class T>
inline T gelu_derivative(T x) {
  const T c = static_cast<T>(kSqrt2OverPi);
  const T a = static_cast<T>(kGeluCubic);
  const T u = c * (x + a * x * x * x);
  const T t = std::tanh(u);
  return T(0.5) * (T(1) + t) + T(0.5) * x * (T(1) - t * t) * c * (T(1) + T(3) * a * x * x);
}

template <class T>
inline T binary(BinaryOp op, T a, T b) {
  switch (op) {
    case BinaryOp::add:
      return a + b;
    case BinaryOp::sub:
      return a - b;
    case BinaryOp::mul:
      return a * b;
  }
  return a;
}

struct AdamCoefficients {
  float beta1, one_minus_beta1, beta2, one_minus_beta2;
  float step_size;      // lr / (1 - beta1^t)
  float inv_sqrt_bc2;   // 1 / sqrt(1 - beta2^t)
  float eps;
  float decay_factor;   // 1 - lr * weight_decay
};

inline AdamCoefficients adam_coefficients(const AdamHyper& hp, bool decay) {
  const double t = static_cast<double>(hp.step);
  const double bc1 = 1.0 - std::pow(hp.beta1, t);
  const double bc2 = 1.0 - std::pow(hp.beta2, t);
  AdamCoefficients c{};
  c.beta1 = static_cast<float>(hp.beta1);
  c.one_minus_beta1 = static_cast<float>(1.0 - hp.beta1);
  c.beta2 = static_cast<float>(hp.beta2);
  c.one_minus_beta2 = static_cast<float>(1.0 - hp.beta2);
  c.step_size = static_cast<float>(hp.lr / bc1);
  c.inv_sqrt_bc2 = static_cast<float>(1.0 / std::sqrt(bc2));
  c.eps = static_cast<float>(hp.eps);
  c.decay_factor = decay ? static_cast<float>(1.0 - hp.lr * hp.weight_decay) : 1.0f;
  return c;
}

inline void adam_element(float& w, float g, float& m, float& v, const AdamCoefficients& c) {
  w *= c.decay_factor;
  m = c.beta1 * m + c.one_minus_beta1 * g;
  v = c.beta2 * v + c.one_minus_beta2 * g * g;
  const float denom = std::sqrt(v) * c.inv_sqrt_bc2 + c.eps;
  w -= c.step_size * m / denom;
}

}  // namespace pofa::kernels::detail
