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
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "pofa/distill.hpp"
#include "pofa/lr_schedule.hpp"
#include "pofa/model.hpp"
#include "pofa/optimizer.hpp"
#include "pofa/pruning.hpp"

namespace pofa {

enum class StageKind { teacher_prep, student_prune, transfer, qat, finetune_prune_baseline };

std::string_view stage_name(StageKind s);
StageKind stage_from_name(std::string_view name);  // ConfigError

struct DataConfig {
  std::uint64_t seed = 7;
  std::size_t corpus_sequences = 2000;
  std::size_t task_examples = 2000;
  std::size_t mlm_seq_len = 32;
  std::size_t task_seq_len = 26;
};

// Text form: [section] headers and `key = value` lines, '#' or ';'
// comments. Sections: stage, model, optimizer, schedule, distill, pruning,
// data, quant. Unknown sections or keys are errors; keys left out take the
// values of default_stage_config for the named stage.
struct StageConfig {
  StageKind stage = StageKind::teacher_prep;
  std::int64_t steps = 100;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  std::int64_t log_every = 1;

  ModelConfig model;

  double lr = 1e-3;
  AdamConfig adam;

  std::int64_t warmup_steps = 0;
  bool rewind = false;
  std::int64_t rewind_end = -1;  // -1: the pruning end step

  DistillConfig distill{2.0, 1.0, 0.0};
  std::optional<SparsitySchedule> pruning;
  DataConfig data;
  int quant_bits = 8;

  // Learning-rate schedule over `steps`, with the rewind window
  // [pruning.start, rewind_end] and interval pruning.interval when enabled.
  LrSchedule lr_schedule() const;

  // Field ranges plus the per-stage combination rules. ConfigError.
  void validate() const;

  // Canonical text (every key, fixed order, round-trippable doubles).
  std::string to_text() const;
  std::uint64_t hash() const;
};

StageConfig parse_stage_config(std::string_view text);
StageConfig load_stage_config(const std::filesystem::path& path);

// Desk-scale defaults for each stage.
StageConfig default_stage_config(StageKind stage);

}  // namespace pofa
