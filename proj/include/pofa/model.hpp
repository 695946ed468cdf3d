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
#include <string>
#include <utility>
#include <vector>

#include "pofa/data.hpp"
#include "pofa/graph.hpp"
#include "pofa/tensor.hpp"

namespace pofa {

enum class HeadKind { mlm, classify, both };

std::string_view head_kind_name(HeadKind h);
HeadKind head_kind_from_name(std::string_view name);

struct ModelConfig {
  int num_layers = 2;
  int hidden = 32;
  int heads = 4;
  int ffn_dim = 64;
  int vocab = 64;
  int max_seq = 32;
  bool has_pooler = true;
  HeadKind head = HeadKind::both;
  int num_labels = 3;  // used by classify / both

  // Throws ConfigError.
  void validate() const;
  bool has_mlm_head() const { return head != HeadKind::classify; }
  bool has_classifier() const { return head != HeadKind::mlm; }
  bool operator==(const ModelConfig&) const = default;
};

inline constexpr double kLayerNormEps = 1e-5;

// Parameter naming scheme (stable public contract), in canonical order:
//   embeddings.token.weight [vocab, hidden]
//   embeddings.position.weight [max_seq, hidden]
//   embeddings.ln.gain / embeddings.ln.bias [hidden]
//   layer.{i}.{q|k|v|attn_out}.weight [hidden, hidden] and .bias [hidden]
//   layer.{i}.attn_ln.gain / .bias
//   layer.{i}.ffn_in.weight [hidden, ffn] / .bias [ffn]
//   layer.{i}.ffn_out.weight [ffn, hidden] / .bias [hidden]
//   layer.{i}.ffn_ln.gain / .bias
//   pooler.weight [hidden, hidden] / pooler.bias           (has_pooler)
//   mlm_head.weight [hidden, vocab] / mlm_head.bias        (mlm head)
//   classifier.weight [hidden, labels] / classifier.bias   (classify head)
// Linear weights are stored [in, out]: y = x W + b.
std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& config);

// Weight matrices of every encoder Linear layer plus the pooler: q, k, v,
// attn_out, ffn_in, ffn_out per layer, then pooler.weight. Embeddings,
// biases, layer-norm parameters and task heads are excluded.
std::vector<std::string> prunable_parameter_names(const ModelConfig& config);

// Interception point on every prunable Linear layer (used by fake
// quantization). `layer` is the name prefix, e.g. "layer.0.q".
template <class T>
class LinearHook {
 public:
  virtual ~LinearHook() = default;
  virtual NodeId input(BasicGraph<T>& g, const std::string& layer, NodeId x) = 0;
  virtual NodeId weight(BasicGraph<T>& g, const std::string& layer, NodeId w) = 0;
};

struct MlmOutput {
  NodeId logits = 0;  // [masked positions, vocab]
  NodeId loss = 0;
  bool degenerate = false;  // no masked positions: loss is the constant 0
  std::vector<std::int64_t> rows;  // flat positions of the masked tokens
};

struct ClassifyOutput {
  NodeId logits = 0;  // [batch, num_labels]
  NodeId loss = 0;
};

template <class T>
class BasicEncoderModel {
 public:
  // Checks that `params` matches parameter_layout(config) exactly.
  BasicEncoderModel(ModelConfig config, ParameterStore<T> params);

  // Weights N(0, 0.02^2), biases zero, layer-norm gains one. Each tensor's
  // seed is derived from (seed, parameter name).
  static BasicEncoderModel build(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParameterStore<T>& parameters() { return params_; }
  const ParameterStore<T>& parameters() const { return params_; }
  std::vector<std::string> prunable_parameters() const { return prunable_parameter_names(config_); }

  // Final hidden states [batch * seq, hidden].
  NodeId encode(BasicGraph<T>& g, const std::vector<std::int32_t>& input_ids,
                const std::vector<std::uint8_t>& attention_mask, std::size_t batch,
                std::size_t seq_len, LinearHook<T>* hook = nullptr);

  MlmOutput forward_mlm(BasicGraph<T>& g, const MlmBatch& batch, LinearHook<T>* hook = nullptr);
  ClassifyOutput forward_classify(BasicGraph<T>& g, const TaskBatch& batch,
                                  LinearHook<T>* hook = nullptr);

  template <class U>
  BasicEncoderModel<U> cast() const {
    return BasicEncoderModel<U>(config_, params_.template cast<U>());
  }

 private:
  NodeId param(BasicGraph<T>& g, const std::string& name);
  NodeId linear(BasicGraph<T>& g, NodeId x, const std::string& layer, LinearHook<T>* hook);
  void validate_tokens(const std::vector<std::int32_t>& ids, std::size_t batch, std::size_t seq_len,
                       std::size_t mask_len) const;

  ModelConfig config_;
  ParameterStore<T> params_;
};

using EncoderModel = BasicEncoderModel<float>;
using EncoderModel64 = BasicEncoderModel<double>;

}  // namespace pofa
