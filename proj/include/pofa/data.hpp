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
#include <filesystem>
#include <string>
#include <vector>

namespace pofa {

inline constexpr std::int32_t kPadId = 0;
inline constexpr std::int32_t kMaskId = 1;
inline constexpr std::int32_t kUnkId = 2;
inline constexpr std::int32_t kClsId = 3;
inline constexpr std::int32_t kSepId = 4;
inline constexpr std::int32_t kFirstContentId = 5;
inline constexpr std::int32_t kIgnoreLabel = -1;

// Symbols: the five reserved tokens at ids 0-4, then "t5", "t6", ...
class Vocab {
 public:
  explicit Vocab(std::size_t size);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(std::int32_t id) const;
  std::int32_t id(const std::string& token) const;  // kUnkId when absent
  std::uint64_t hash() const;

 private:
  std::vector<std::string> tokens_;
};

using Sequence = std::vector<std::int32_t>;

// Content-token sequences (no special tokens) with a 95/5 train/validation
// split.
struct Corpus {
  std::size_t vocab_size = 0;
  std::uint64_t seed = 0;
  std::vector<Sequence> train;
  std::vector<Sequence> validation;
};

// Seeded order-2 Markov source. The next token depends on the previous token
// and on the class (id mod 2) of the one before it; each such context owns
// four candidate successors with probabilities (0.55, 0.25, 0.15, 0.05).
Corpus build_synthetic_corpus(std::uint64_t seed, std::size_t num_sequences,
                              std::size_t vocab_size = 64, std::size_t sequence_length = 30);

// Line-oriented text: '#' header lines (format, vocab size and hash, split
// counts), then one space-separated id line per sequence, train first.
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

struct MlmBatch {
  std::size_t batch = 0;
  std::size_t seq_len = 0;
  std::vector<std::int32_t> input_ids;       // [batch * seq_len]
  std::vector<std::int32_t> labels;          // kIgnoreLabel where not selected
  std::vector<std::uint8_t> attention_mask;  // 0 on padding
  std::size_t shortened = 0;                 // sequences that took the short path
};

struct MlmOptions {
  double short_prob = 0.1;
  double select_prob = 0.15;
  double mask_frac = 0.8;
  double random_frac = 0.1;
};

// Batch `index` of the stream defined by (corpus, seed): fully determined by
// those three values. Layout per row: [CLS] content... [SEP] PAD...
MlmBatch make_mlm_batch(const Corpus& corpus, std::uint64_t seed, std::size_t index,
                        std::size_t batch, std::size_t seq_len, const MlmOptions& options = {});

// Masked copy of explicit sequences (used for validation sweeps).
MlmBatch make_mlm_batch_from(const std::vector<Sequence>& sequences, std::size_t vocab_size,
                             std::uint64_t seed, std::size_t seq_len, const MlmOptions& options = {});

struct TaskExample {
  Sequence tokens;
  std::int32_t label = 0;
};

struct TaskDataset {
  std::size_t vocab_size = 0;
  std::size_t num_labels = 0;
  std::vector<TaskExample> train;
  std::vector<TaskExample> validation;
};

// Token-statistics classification: content ids are split into num_labels
// groups by (id - 5) % num_labels, and an example's label is the group that
// occurs most often in it (strict majority by construction). Labels are
// balanced to within one example; 80/20 train/validation split.
TaskDataset make_task_dataset(std::uint64_t seed, std::size_t num_examples, std::size_t num_labels,
                              std::size_t vocab_size = 64, std::size_t sequence_length = 24);

std::int32_t task_label_of(const Sequence& tokens, std::size_t num_labels);

struct TaskBatch {
  std::size_t batch = 0;
  std::size_t seq_len = 0;
  std::vector<std::int32_t> input_ids;
  std::vector<std::uint8_t> attention_mask;
  std::vector<std::int32_t> labels;  // [batch]
};

// Random batch `index` drawn from `examples`.
TaskBatch make_task_batch(const std::vector<TaskExample>& examples, std::uint64_t seed,
                          std::size_t index, std::size_t batch, std::size_t seq_len);

// Examples [first, first + count) in order.
TaskBatch task_batch_range(const std::vector<TaskExample>& examples, std::size_t first,
                           std::size_t count, std::size_t seq_len);

}  // namespace pofa
