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
#include <filesystem>
#include <string>
#include <vector>

#include "pofa/checkpoint.hpp"
#include "pofa/lr_schedule.hpp"
#include "pofa/pruning.hpp"

namespace pofa {

struct CompressionRow {
  std::string name;
  std::size_t elements = 0;
  std::size_t dense_bytes = 0;    // 4 n
  std::size_t payload_bytes = 0;  // non-zero values (q8: kept values)
  std::size_t stored_bytes = 0;   // value bytes as written to disk
  std::size_t bitmap_bytes = 0;   // ceil(n / 8) when a bitmap is stored
  std::size_t scale_bytes = 0;    // 8 for a q8 record (scale + zero point)
  std::size_t nonzero = 0;
  double sparsity = 0;
  int bits = 32;
};

// Accounting over the encoder's prunable weights only; embeddings, biases,
// layer norms and heads are left out.
struct CompressionReport {
  std::vector<CompressionRow> rows;
  std::size_t dense_bytes = 0;
  std::size_t payload_bytes = 0;
  std::size_t on_disk_bytes = 0;  // stored values + bitmaps + scales
  std::size_t nonzero_count = 0;
  double parameter_only_ratio = 0;  // dense / payload
  double on_disk_ratio = 0;         // dense / on_disk

  std::string table() const;
};

CompressionReport compression_report(const Checkpoint& ckpt);

// Payload bytes of `a` divided by payload bytes of `b`.
double payload_ratio(const CompressionReport& a, const CompressionReport& b);

// Rows t = 0..total_steps: t,lr_base,lr_rewound,target_sparsity. Without a
// rewind window the lr_rewound column repeats lr_base.
std::string schedule_csv(const LrSchedule& lr, const SparsitySchedule& sparsity);
void schedule_export(const LrSchedule& lr, const SparsitySchedule& sparsity, const std::filesystem::path& path);

}  // namespace pofa
