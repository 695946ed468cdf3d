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

#include "pofa/optimizer.hpp"

#include "pofa/errors.hpp"
#include "pofa/kernels.hpp"

namespace pofa {

void AdamW::step(ParameterStore<float>& params, double lr, const MaskSet* masks, const Filter& trainable) {
  ++steps_;
  kernels::AdamHyper hp;
  hp.lr = lr;
  hp.beta1 = cfg_.beta1;
  hp.beta2 = cfg_.beta2;
  hp.eps = cfg_.eps;
  hp.weight_decay = cfg_.weight_decay;
  hp.step = steps_;
  for (auto& [name, t] : params) {
    if (trainable && !trainable(name)) continue;
    if (!t.has_grad()) continue;
    Slot* slot = nullptr;
    for (auto& [n, s] : slots_)
      if (n == name) slot = &s;
    if (!slot) {
      slots_.emplace_back(name, Slot{std::vector<float>(t.size(), 0.0f), std::vector<float>(t.size(), 0.0f)});
      slot = &slots_.back().second;
    }
    if (slot->m.size() != t.size()) throw StateError("optimizer: parameter '" + name + "' changed size");
    const std::uint8_t* mask = nullptr;
    if (masks) {
      if (const Bitmap* m = masks->find(name)) {
        if (m->size() != t.size()) throw ContractError("optimizer: mask size mismatch for '" + name + "'");
        mask = m->data();
      }
    }
    kernels::adamw_update(t.values.data(), t.grad.data(), slot->m.data(), slot->v.data(), mask, t.size(), hp,
                          t.rank() == 2);
  }
}

}  // namespace pofa
