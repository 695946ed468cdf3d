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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pofa/model.hpp"
#include "pofa/tensor.hpp"

namespace pofa {

// Cubic gradual-magnitude-pruning schedule.
struct SparsitySchedule {
  double initial = 0.0;        // s_i in [0, 1)
  double final = 0.9;          // s_f in (0, 1]
  std::int64_t start = 0;      // t_s
  std::int64_t policy_end = 50;  // t_e: end of the cubic ramp
  std::int64_t end = 80;       // t_end: last mask recomputation
  std::int64_t interval = 1;   // f

  void validate() const;  // throws ConfigError
};

//   t < t_s           -> s_i
//   t_s <= t <= t_e   -> s_f + (s_i - s_f) (1 - (t - t_s) / (t_e - t_s))^3
//   t > t_e           -> s_f
double target_sparsity(const SparsitySchedule& sched, std::int64_t t);

// Steps t_s, t_s + f, ... up to t_end inclusive.
bool is_pruning_step(const SparsitySchedule& sched, std::int64_t t);

using Bitmap = std::vector<std::uint8_t>;  // one 0/1 byte per element

class MaskSet {
 public:
  void set(const std::string& name, Bitmap mask);
  const Bitmap* find(const std::string& name) const;
  const Bitmap& at(const std::string& name) const;
  std::vector<std::string> names() const;
  std::size_t size() const { return masks_.size(); }
  bool empty() const { return masks_.empty(); }
  bool operator==(const MaskSet&) const = default;

  auto begin() const { return masks_.begin(); }
  auto end() const { return masks_.end(); }

 private:
  std::vector<std::pair<std::string, Bitmap>> masks_;
};

// floor(ratio * n), treating products within 1e-9 of an integer as that
// integer so that e.g. 0.85 * 20 gives 17 rather than 16.
std::size_t prune_count(std::size_t n, double ratio);

// Keeps the n - k largest |w|; the k smallest are zeroed, ties broken by
// lower flat index pruned first.
Bitmap magnitude_mask(std::span<const float> weights, double ratio);

MaskSet all_ones_masks(const EncoderModel& model);

// Recomputes every prunable tensor's mask from its current magnitudes
// (earlier masks do not constrain the result) and hard-zeroes the pruned
// weights. `current` must cover prunable_parameters(model).
MaskSet prune_step(EncoderModel& model, const MaskSet& current, double ratio);

void apply_masks(EncoderModel& model, const MaskSet& masks);

// 1 where the weight is non-zero, 0 where it is zero.
MaskSet lock_pattern(const EncoderModel& model);

Tensor masked_grad(const Tensor& grad, const Bitmap& mask);
void mask_gradient_in_place(Tensor& param, const Bitmap& mask);

struct SparsityRow {
  std::string name;
  std::size_t elements = 0;
  std::size_t zeros = 0;
  double sparsity = 0.0;
  double mask_sparsity = 0.0;  // NaN-free: 0 when no mask is present
};

struct SparsityReport {
  std::vector<SparsityRow> rows;
  std::size_t elements = 0;
  std::size_t zeros = 0;
  double aggregate = 0.0;  // zeros / elements over prunable weights
  std::size_t nonzero_count = 0;

  // Plain-text table.
  std::string table() const;
};

// Covers prunable weights only (biases are never pruned and embeddings are
// excluded from the aggregate).
SparsityReport sparsity_report(const EncoderModel& model, const MaskSet& masks = {});

}  // namespace pofa
