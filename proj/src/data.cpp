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

#include "pofa/data.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pofa/errors.hpp"
#include "pofa/rng.hpp"

namespace pofa {

namespace {

constexpr std::array<const char*, 5> kReserved{"[PAD]", "[MASK]", "[UNK]", "[CLS]", "[SEP]"};
constexpr std::array<double, 4> kSuccessorProbs{0.55, 0.25, 0.15, 0.05};
// The earlier token only enters through its class (id mod 2), which keeps
// the source order-2 but small enough for a tiny model to learn.
constexpr std::size_t kPrev2Classes = 2;
constexpr double kTaskGroupBias = 0.15;

void check_vocab(std::size_t vocab_size) {
  if (vocab_size < 8)
    throw ConfigError("vocab size must be >= 8, got " + std::to_string(vocab_size));
}

// Lays out [CLS] content [SEP] PAD... into row r of a batch.
void place_row(const Sequence& content, std::size_t content_len, std::size_t seq_len, std::size_t r,
               std::vector<std::int32_t>& ids, std::vector<std::uint8_t>& attention) {
  std::int32_t* row = ids.data() + r * seq_len;
  std::uint8_t* att = attention.data() + r * seq_len;
  row[0] = kClsId;
  for (std::size_t j = 0; j < content_len; ++j) row[1 + j] = content[j];
  row[1 + content_len] = kSepId;
  for (std::size_t j = 0; j < content_len + 2; ++j) att[j] = 1;
}

void apply_mlm_masking(MlmBatch& b, std::size_t vocab_size, Rng& rng, const MlmOptions& o) {
  const std::uint64_t content_count = vocab_size - static_cast<std::size_t>(kFirstContentId);
  for (std::size_t i = 0; i < b.input_ids.size(); ++i) {
    const std::int32_t tok = b.input_ids[i];
    if (tok < kFirstContentId || b.attention_mask[i] == 0) continue;
    if (!rng.bernoulli(o.select_prob)) continue;
    b.labels[i] = tok;
    const double u = rng.uniform();
    if (u < o.mask_frac) {
      b.input_ids[i] = kMaskId;
    } else if (u < o.mask_frac + o.random_frac) {
      b.input_ids[i] = kFirstContentId + static_cast<std::int32_t>(rng.below(content_count));
    }
  }
}

}  // namespace

Vocab::Vocab(std::size_t size) {
  check_vocab(size);
  tokens_.reserve(size);
  for (const char* r : kReserved) tokens_.emplace_back(r);
  for (std::size_t i = kReserved.size(); i < size; ++i) tokens_.push_back("t" + std::to_string(i));
}

const std::string& Vocab::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw DataError("token id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

std::int32_t Vocab::id(const std::string& token) const {
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    if (tokens_[i] == token) return static_cast<std::int32_t>(i);
  return kUnkId;
}

std::uint64_t Vocab::hash() const {
  std::uint64_t h = fnv1a("");
  for (const auto& t : tokens_) {
    h = fnv1a(t, h);
    h = fnv1a(std::string_view("\n"), h);
  }
  return h;
}

Corpus build_synthetic_corpus(std::uint64_t seed, std::size_t num_sequences,
                              std::size_t vocab_size, std::size_t sequence_length) {
  if (num_sequences < 1) throw ContractError("build_synthetic_corpus: num_sequences must be >= 1");
  if (sequence_length < 2) throw ContractError("build_synthetic_corpus: sequence_length must be >= 2");
  check_vocab(vocab_size);
  const std::size_t c = vocab_size - static_cast<std::size_t>(kFirstContentId);

  // successor table: 4 distinct candidates per context (prev1, prev2 class)
  const std::size_t contexts = c * kPrev2Classes;
  std::vector<std::array<std::int32_t, 4>> successors(contexts);
  for (std::size_t ctx = 0; ctx < contexts; ++ctx) {
    Rng rng(mix_seed(seed, ctx));
    std::array<std::int32_t, 4> cand{};
    for (std::size_t j = 0; j < cand.size(); ++j) {
      std::int32_t pick;
      do {
        pick = static_cast<std::int32_t>(rng.below(c));
      } while (c >= cand.size() && std::find(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(j), pick) !=
                                       cand.begin() + static_cast<std::ptrdiff_t>(j));
      cand[j] = pick;
    }
    successors[ctx] = cand;
  }

  Rng rng(mix_seed(seed, 0xC0A7u));
  std::vector<Sequence> all(num_sequences);
  for (auto& seq : all) {
    seq.resize(sequence_length);
    std::size_t p2 = rng.below(c), p1 = rng.below(c);
    seq[0] = static_cast<std::int32_t>(p2);
    seq[1] = static_cast<std::int32_t>(p1);
    for (std::size_t t = 2; t < sequence_length; ++t) {
      const double u = rng.uniform();
      double acc = 0.0;
      std::size_t pick = kSuccessorProbs.size() - 1;
      for (std::size_t j = 0; j < kSuccessorProbs.size(); ++j) {
        acc += kSuccessorProbs[j];
        if (u < acc) {
          pick = j;
          break;
        }
      }
      const auto next = static_cast<std::size_t>(successors[p1 * kPrev2Classes + p2 % kPrev2Classes][pick]);
      seq[t] = static_cast<std::int32_t>(next);
      p2 = p1;
      p1 = next;
    }
    for (auto& tok : seq) tok += kFirstContentId;
  }

  Corpus corpus;
  corpus.vocab_size = vocab_size;
  corpus.seed = seed;
  const std::size_t n_val = (num_sequences * 5 + 50) / 100;
  const std::size_t n_train = num_sequences - n_val;
  corpus.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
  corpus.validation.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train), all.end());
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write corpus file " + path.string());
  char hash[32];
  std::snprintf(hash, sizeof hash, "0x%016llx",
                static_cast<unsigned long long>(Vocab(corpus.vocab_size).hash()));
  out << "# pofa-corpus v1\n";
  out << "# vocab_size " << corpus.vocab_size << "\n";
  out << "# vocab_hash " << hash << "\n";
  out << "# seed " << corpus.seed << "\n";
  out << "# train " << corpus.train.size() << "\n";
  out << "# validation " << corpus.validation.size() << "\n";
  auto write = [&](const std::vector<Sequence>& seqs) {
    for (const auto& s : seqs) {
      for (std::size_t i = 0; i < s.size(); ++i) out << (i ? " " : "") << s[i];
      out << "\n";
    }
  };
  write(corpus.train);
  write(corpus.validation);
  if (!out) throw IoError("failed writing corpus file " + path.string());
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read corpus file " + path.string());
  Corpus corpus;
  std::size_t n_train = 0, n_val = 0;
  std::string expected_hash, line;
  bool saw_magic = false;
  std::vector<Sequence> seqs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (line[0] == '#') {
      std::string hashmark, key, value;
      ls >> hashmark >> key >> value;
      if (key == "pofa-corpus") saw_magic = value == "v1";
      else if (key == "vocab_size") corpus.vocab_size = std::stoull(value);
      else if (key == "vocab_hash") expected_hash = value;
      else if (key == "seed") corpus.seed = std::stoull(value);
      else if (key == "train") n_train = std::stoull(value);
      else if (key == "validation") n_val = std::stoull(value);
      continue;
    }
    Sequence s;
    std::int64_t v;
    while (ls >> v) {
      if (v < 0 || static_cast<std::size_t>(v) >= corpus.vocab_size)
        throw DataError("corpus token " + std::to_string(v) + " out of vocabulary range");
      s.push_back(static_cast<std::int32_t>(v));
    }
    seqs.push_back(std::move(s));
  }
  if (!saw_magic) throw DataError("not a pofa corpus file: " + path.string());
  char hash[32];
  std::snprintf(hash, sizeof hash, "0x%016llx",
                static_cast<unsigned long long>(Vocab(corpus.vocab_size).hash()));
  if (expected_hash != hash) throw DataError("corpus vocab hash mismatch in " + path.string());
  if (seqs.size() != n_train + n_val) throw DataError("corpus sequence count mismatch in " + path.string());
  corpus.train.assign(seqs.begin(), seqs.begin() + static_cast<std::ptrdiff_t>(n_train));
  corpus.validation.assign(seqs.begin() + static_cast<std::ptrdiff_t>(n_train), seqs.end());
  return corpus;
}

MlmBatch make_mlm_batch(const Corpus& corpus, std::uint64_t seed, std::size_t index,
                        std::size_t batch, std::size_t seq_len, const MlmOptions& options) {
  if (corpus.train.empty()) throw DataError("make_mlm_batch: empty training split");
  if (seq_len < 3) throw ContractError("make_mlm_batch: seq_len must be >= 3");
  Rng rng(mix_seed(seed, index));
  MlmBatch b;
  b.batch = batch;
  b.seq_len = seq_len;
  b.input_ids.assign(batch * seq_len, kPadId);
  b.labels.assign(batch * seq_len, kIgnoreLabel);
  b.attention_mask.assign(batch * seq_len, 0);
  for (std::size_t r = 0; r < batch; ++r) {
    const Sequence& seq = corpus.train[rng.below(corpus.train.size())];
    std::size_t total = seq_len;
    // shorter sequence: total length uniform in [4, seq_len - 1]
    if (rng.bernoulli(options.short_prob) && seq_len >= 5) {
      total = 4 + rng.below(seq_len - 4);
      ++b.shortened;
    }
    const std::size_t content_len = std::min(total - 2, seq.size());
    place_row(seq, content_len, seq_len, r, b.input_ids, b.attention_mask);
  }
  apply_mlm_masking(b, corpus.vocab_size, rng, options);
  return b;
}

MlmBatch make_mlm_batch_from(const std::vector<Sequence>& sequences, std::size_t vocab_size,
                             std::uint64_t seed, std::size_t seq_len, const MlmOptions& options) {
  if (seq_len < 3) throw ContractError("make_mlm_batch_from: seq_len must be >= 3");
  Rng rng(seed);
  MlmBatch b;
  b.batch = sequences.size();
  b.seq_len = seq_len;
  b.input_ids.assign(b.batch * seq_len, kPadId);
  b.labels.assign(b.batch * seq_len, kIgnoreLabel);
  b.attention_mask.assign(b.batch * seq_len, 0);
  for (std::size_t r = 0; r < b.batch; ++r) {
    const std::size_t content_len = std::min(seq_len - 2, sequences[r].size());
    place_row(sequences[r], content_len, seq_len, r, b.input_ids, b.attention_mask);
  }
  apply_mlm_masking(b, vocab_size, rng, options);
  return b;
}

std::int32_t task_label_of(const Sequence& tokens, std::size_t num_labels) {
  std::vector<std::size_t> counts(num_labels, 0);
  for (auto t : tokens)
    if (t >= kFirstContentId) ++counts[static_cast<std::size_t>(t - kFirstContentId) % num_labels];
  return static_cast<std::int32_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

TaskDataset make_task_dataset(std::uint64_t seed, std::size_t num_examples, std::size_t num_labels,
                              std::size_t vocab_size, std::size_t sequence_length) {
  if (num_labels < 2) throw ContractError("make_task_dataset: num_labels must be >= 2");
  check_vocab(vocab_size);
  const std::size_t c = vocab_size - static_cast<std::size_t>(kFirstContentId);
  if (c < num_labels) throw ContractError("make_task_dataset: fewer content tokens than labels");

  Rng rng(mix_seed(seed, 0x7A5Cu));
  std::vector<std::int32_t> labels(num_examples);
  for (std::size_t i = 0; i < num_examples; ++i) labels[i] = static_cast<std::int32_t>(i % num_labels);
  for (std::size_t i = num_examples; i > 1; --i) std::swap(labels[i - 1], labels[rng.below(i)]);

  // group g holds content indices {g, g + K, g + 2K, ...}
  auto group_size = [&](std::size_t g) { return (c - g + num_labels - 1) / num_labels; };

  std::vector<TaskExample> all(num_examples);
  for (std::size_t i = 0; i < num_examples; ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    Sequence s(sequence_length);
    for (;;) {
      for (auto& tok : s) {
        std::size_t content;
        if (rng.bernoulli(kTaskGroupBias)) {
          content = y + num_labels * rng.below(group_size(y));
        } else {
          content = rng.below(c);
        }
        tok = kFirstContentId + static_cast<std::int32_t>(content);
      }
      // keep only strict majorities for the intended group
      std::vector<std::size_t> counts(num_labels, 0);
      for (auto t : s) ++counts[static_cast<std::size_t>(t - kFirstContentId) % num_labels];
      bool strict = true;
      for (std::size_t g = 0; g < num_labels; ++g)
        if (g != y && counts[g] >= counts[y]) strict = false;
      if (strict) break;
    }
    all[i] = {std::move(s), labels[i]};
  }

  TaskDataset ds;
  ds.vocab_size = vocab_size;
  ds.num_labels = num_labels;
  const std::size_t n_train = (num_examples * 4) / 5;
  ds.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
  ds.validation.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train), all.end());
  return ds;
}

namespace {

TaskBatch empty_task_batch(std::size_t batch, std::size_t seq_len) {
  TaskBatch b;
  b.batch = batch;
  b.seq_len = seq_len;
  b.input_ids.assign(batch * seq_len, kPadId);
  b.attention_mask.assign(batch * seq_len, 0);
  b.labels.assign(batch, 0);
  return b;
}

}  // namespace

TaskBatch make_task_batch(const std::vector<TaskExample>& examples, std::uint64_t seed,
                          std::size_t index, std::size_t batch, std::size_t seq_len) {
  if (examples.empty()) throw DataError("make_task_batch: no examples");
  if (seq_len < 3) throw ContractError("make_task_batch: seq_len must be >= 3");
  Rng rng(mix_seed(seed, index));
  TaskBatch b = empty_task_batch(batch, seq_len);
  for (std::size_t r = 0; r < batch; ++r) {
    const auto& ex = examples[rng.below(examples.size())];
    place_row(ex.tokens, std::min(seq_len - 2, ex.tokens.size()), seq_len, r, b.input_ids,
              b.attention_mask);
    b.labels[r] = ex.label;
  }
  return b;
}

TaskBatch task_batch_range(const std::vector<TaskExample>& examples, std::size_t first,
                           std::size_t count, std::size_t seq_len) {
  if (first + count > examples.size()) throw ContractError("task_batch_range: range out of bounds");
  TaskBatch b = empty_task_batch(count, seq_len);
  for (std::size_t r = 0; r < count; ++r) {
    const auto& ex = examples[first + r];
    place_row(ex.tokens, std::min(seq_len - 2, ex.tokens.size()), seq_len, r, b.input_ids,
              b.attention_mask);
    b.labels[r] = ex.label;
  }
  return b;
}

}  // namespace pofa
