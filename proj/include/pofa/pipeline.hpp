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
#include <string>
#include <utility>
#include <vector>

#include "pofa/checkpoint.hpp"
#include "pofa/data.hpp"
#include "pofa/model.hpp"
#include "pofa/stage_config.hpp"

namespace pofa {

struct StepRecord {
  std::int64_t step = 0;
  double lr = 0;
  double target_sparsity = 0;  // schedule value, or the locked pattern's sparsity
  double actual_sparsity = 0;  // measured after pruning, before the update
  double loss_pt = 0;
  double loss_kd = 0;  // 0 when no teacher is involved
  double loss_total = 0;
};

struct RunMetrics {
  std::vector<StepRecord> steps;
  std::vector<std::pair<std::string, double>> summary;

  double get(std::string_view key) const;  // LookupError
  // Header: step,lr,target_sparsity,actual_sparsity,loss_pt,loss_kd,loss_total
  std::string csv() const;
  void write_csv(const std::filesystem::path& path) const;  // IoError
};

struct StageResult {
  Checkpoint checkpoint;
  RunMetrics metrics;
};

struct EvalResult {
  double accuracy = 0;
  double loss = 0;
};

Corpus stage_corpus(const StageConfig& cfg);
TaskDataset stage_task(const StageConfig& cfg);

// Validation accuracy and mean cross-entropy over the whole split.
EvalResult evaluate_task(EncoderModel& model, const std::vector<TaskExample>& examples, std::size_t seq_len,
                         LinearHook<float>* hook = nullptr);
// Mean masked-LM loss over the validation split, fixed masking seed.
double evaluate_mlm(EncoderModel& model, const Corpus& corpus, std::size_t seq_len);

// Dense MLM training on the pre-training loss only.
StageResult run_teacher_prep(const StageConfig& cfg);

// Student initialised from the teacher; GMP at target_sparsity(t) every f
// steps with regrowth until the pruning end step, masks frozen afterwards;
// loss lambda_pt * L_PT + lambda_kd * L_kd against the frozen teacher.
StageResult run_student_prune(const StageConfig& cfg, const Checkpoint& teacher);

// Pattern-locked fine-tuning on the classification task. With lambda_kd > 0
// the objective is distillation from `task_teacher` alone.
StageResult run_transfer(const StageConfig& cfg, const Checkpoint& start, const Checkpoint* task_teacher);

// Fake-quant training on prunable weights and their inputs, pattern-locked,
// then int8 export.
StageResult run_qat(const StageConfig& cfg, const Checkpoint& finetuned, const Checkpoint* task_teacher);

// GMP during task fine-tuning of a dense checkpoint.
StageResult run_finetune_prune_baseline(const StageConfig& cfg, const Checkpoint& dense,
                                        const Checkpoint* task_teacher);

// Dispatch on cfg.stage. `input` is the stage's starting checkpoint (unused
// for teacher-prep); `teacher` is the MLM teacher for student-prune and the
// task teacher elsewhere.
StageResult run_stage(const StageConfig& cfg, const Checkpoint* input, const Checkpoint* teacher);

}  // namespace pofa
