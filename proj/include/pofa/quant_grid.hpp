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

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace pofa {

// Projection onto an affine integer grid. This one definition is shared by
// the fake-quant graph primitive and int8 export so both land on the same
// float bit patterns.
//
//   q   = clamp(nearbyint(x / scale) + zero_point, qmin, qmax)
//   out = (q - zero_point) * scale
//
// Arithmetic is done in double; (q - zero_point) * scale is exact there for
// 8-bit grids with a float scale, so `out` is the correctly rounded grid
// point. nearbyint uses the default round-half-to-even mode.
inline std::int64_t quantize_to_grid(double x, double scale, std::int64_t zero_point,
                                     std::int64_t qmin, std::int64_t qmax, bool* in_range = nullptr) {
  const double r = std::nearbyint(x / scale) + static_cast<double>(zero_point);
  if (in_range) *in_range = r >= static_cast<double>(qmin) && r <= static_cast<double>(qmax);
  const double c = std::clamp(r, static_cast<double>(qmin), static_cast<double>(qmax));
  return static_cast<std::int64_t>(c);
}

inline double dequantize_from_grid(std::int64_t q, double scale, std::int64_t zero_point) {
  return static_cast<double>(q - zero_point) * scale;
}

}  // namespace pofa
