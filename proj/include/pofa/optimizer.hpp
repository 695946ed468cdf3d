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

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pofa/pruning.hpp"
#include "pofa/tensor.hpp"

namespace pofa {

struct AdamConfig {
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with decoupled weight decay. Decay applies to rank-2 tensors only
// (weight matrices and embeddings). Positions where a mask is 0 get no
// update of any kind and keep their moments untouched.
class AdamW {
 public:
  using Filter = std::function<bool(const std::string&)>;

  explicit AdamW(AdamConfig cfg = {}) : cfg_(cfg) {}

  // One update at learning rate `lr` using the grads in `params`.
  // `trainable` (optional) selects which parameters move at all.
  void step(ParameterStore<float>& params, double lr, const MaskSet* masks = nullptr,
            const Filter& trainable = {});

  std::int64_t steps() const { return steps_; }

 private:
  struct Slot {
    std::vector<float> m, v;
  };
  AdamConfig cfg_;
  std::int64_t steps_ = 0;
  std::vector<std::pair<std::string, Slot>> slots_;
};

}  // namespace pofa
