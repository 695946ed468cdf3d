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
#include <functional>
#include <string_view>

#include "pofa/graph.hpp"

namespace pofa {

// Builds a fresh graph over `params` and returns its scalar loss node.
using LossBuilder64 = std::function<NodeId(Graph64&)>;

struct GradCheckOptions {
  double eps = 1e-3;
  // 0 checks every element; otherwise a seeded sample of this many.
  std::size_t max_elements = 0;
  std::uint64_t seed = 0;
  // Denominator floor. Gradients that vanish structurally (e.g. the key bias
  // under softmax shift invariance) leave only rounding noise of order
  // 1e-11, which a tiny floor would report as a large relative error.
  double floor = 1e-6;
};

// Finite-difference oracle, 64-bit only. Returns
//   max_i |analytic_i - numeric_i| / max(|analytic_i|, |numeric_i|, floor)
// with numeric_i = (L(w + eps e_i) - L(w - eps e_i)) / (2 eps).
// Throws LookupError when `param` is not in `params`.
double finite_diff_check(ParameterStore<double>& params, const LossBuilder64& build,
                         std::string_view param, const GradCheckOptions& options = {});

}  // namespace pofa
