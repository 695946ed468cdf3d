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

#include "pofa/model.hpp"

#include <cmath>

#include "pofa/rng.hpp"

namespace pofa {

namespace {

constexpr const char* kLinearLayers[] = {"q", "k", "v", "attn_out", "ffn_in", "ffn_out"};
constexpr double kMaskedScore = -1e9;

std::int64_t as_i64(std::size_t v) { return static_cast<std::int64_t>(v); }

}  // namespace

std::string_view head_kind_name(HeadKind h) {
  switch (h) {
    case HeadKind::mlm:
      return "mlm";
    case HeadKind::classify:
      return "classify";
    case HeadKind::both:
      return "both";
  }
  return "both";
}

HeadKind head_kind_from_name(std::string_view name) {
  if (name == "mlm") return HeadKind::mlm;
  if (name == "classify") return HeadKind::classify;
  if (name == "both") return HeadKind::both;
  throw ConfigError("unknown head kind '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  if (num_layers < 1) throw ConfigError("model: num_layers must be >= 1");
  if (hidden < 1 || heads < 1) throw ConfigError("model: hidden and heads must be >= 1");
  if (hidden % heads != 0)
    throw ConfigError("model: hidden (" + std::to_string(hidden) + ") is not divisible by heads (" +
                      std::to_string(heads) + ")");
  if (ffn_dim < 1) throw ConfigError("model: ffn_dim must be >= 1");
  if (vocab < 8) throw ConfigError("model: vocab must be >= 8");
  if (max_seq < 4) throw ConfigError("model: max_seq must be >= 4");
  if (has_classifier() && num_labels < 2) throw ConfigError("model: num_labels must be >= 2");
}

std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& c) {
  c.validate();
  const auto h = static_cast<std::size_t>(c.hidden), f = static_cast<std::size_t>(c.ffn_dim);
  std::vector<std::pair<std::string, Shape>> out;
  out.emplace_back("embeddings.token.weight", Shape{static_cast<std::size_t>(c.vocab), h});
  out.emplace_back("embeddings.position.weight", Shape{static_cast<std::size_t>(c.max_seq), h});
  out.emplace_back("embeddings.ln.gain", Shape{h});
  out.emplace_back("embeddings.ln.bias", Shape{h});
  for (int i = 0; i < c.num_layers; ++i) {
    const std::string p = "layer." + std::to_string(i) + ".";
    for (const char* name : {"q", "k", "v", "attn_out"}) {
      out.emplace_back(p + name + ".weight", Shape{h, h});
      out.emplace_back(p + name + ".bias", Shape{h});
    }
    out.emplace_back(p + "attn_ln.gain", Shape{h});
    out.emplace_back(p + "attn_ln.bias", Shape{h});
    out.emplace_back(p + "ffn_in.weight", Shape{h, f});
    out.emplace_back(p + "ffn_in.bias", Shape{f});
    out.emplace_back(p + "ffn_out.weight", Shape{f, h});
    out.emplace_back(p + "ffn_out.bias", Shape{h});
    out.emplace_back(p + "ffn_ln.gain", Shape{h});
    out.emplace_back(p + "ffn_ln.bias", Shape{h});
  }
  if (c.has_pooler) {
    out.emplace_back("pooler.weight", Shape{h, h});
    out.emplace_back("pooler.bias", Shape{h});
  }
  if (c.has_mlm_head()) {
    out.emplace_back("mlm_head.weight", Shape{h, static_cast<std::size_t>(c.vocab)});
    out.emplace_back("mlm_head.bias", Shape{static_cast<std::size_t>(c.vocab)});
  }
  if (c.has_classifier()) {
    out.emplace_back("classifier.weight", Shape{h, static_cast<std::size_t>(c.num_labels)});
    out.emplace_back("classifier.bias", Shape{static_cast<std::size_t>(c.num_labels)});
  }
  return out;
}

std::vector<std::string> prunable_parameter_names(const ModelConfig& c) {
  c.validate();
  std::vector<std::string> out;
  for (int i = 0; i < c.num_layers; ++i)
    for (const char* name : kLinearLayers)
      out.push_back("layer." + std::to_string(i) + "." + name + ".weight");
  if (c.has_pooler) out.emplace_back("pooler.weight");
  return out;
}

template <class T>
BasicEncoderModel<T>::BasicEncoderModel(ModelConfig config, ParameterStore<T> params)
    : config_(config), params_(std::move(params)) {
  const auto layout = parameter_layout(config_);
  if (layout.size() != params_.size())
    throw ConfigError("model: expected " + std::to_string(layout.size()) + " parameters, got " +
                      std::to_string(params_.size()));
  std::size_t i = 0;
  for (const auto& [name, tensor] : params_) {
    if (name != layout[i].first || tensor.shape != layout[i].second)
      throw ConfigError("model: parameter " + std::to_string(i) + " is '" + name + "' " +
                        shape_str(tensor.shape) + ", expected '" + layout[i].first + "' " +
                        shape_str(layout[i].second));
    ++i;
  }
}

template <class T>
BasicEncoderModel<T> BasicEncoderModel<T>::build(const ModelConfig& config, std::uint64_t seed) {
  ParameterStore<T> params;
  for (const auto& [name, shape] : parameter_layout(config)) {
    const bool is_gain = name.ends_with(".gain");
    const bool is_bias = name.ends_with(".bias");
    const InitScheme scheme = is_gain ? InitScheme::ones : is_bias ? InitScheme::zeros : InitScheme::normal_002;
    params.add(name, seeded_init<T>(shape, scheme, mix_seed(seed, fnv1a(name))));
  }
  return BasicEncoderModel(config, std::move(params));
}

template <class T>
NodeId BasicEncoderModel<T>::param(BasicGraph<T>& g, const std::string& name) {
  return g.parameter(name, params_.at(name));
}

template <class T>
NodeId BasicEncoderModel<T>::linear(BasicGraph<T>& g, NodeId x, const std::string& layer,
                                    LinearHook<T>* hook) {
  NodeId w = param(g, layer + ".weight");
  if (hook) {
    x = hook->input(g, layer, x);
    w = hook->weight(g, layer, w);
  }
  const NodeId y = g.apply(Primitive::matmul, {x, w});
  return g.apply(Primitive::add, {y, param(g, layer + ".bias")});
}

template <class T>
void BasicEncoderModel<T>::validate_tokens(const std::vector<std::int32_t>& ids, std::size_t batch,
                                           std::size_t seq_len, std::size_t mask_len) const {
  if (seq_len > static_cast<std::size_t>(config_.max_seq))
    throw DataError("sequence length " + std::to_string(seq_len) + " exceeds max_seq " +
                    std::to_string(config_.max_seq));
  if (ids.size() != batch * seq_len || mask_len != ids.size())
    throw DataError("batch buffers do not match [" + std::to_string(batch) + ", " +
                    std::to_string(seq_len) + "]");
  for (auto id : ids)
    if (id < 0 || id >= config_.vocab)
      throw DataError("token id " + std::to_string(id) + " outside vocab of " + std::to_string(config_.vocab));
}

template <class T>
NodeId BasicEncoderModel<T>::encode(BasicGraph<T>& g, const std::vector<std::int32_t>& input_ids,
                                    const std::vector<std::uint8_t>& attention_mask, std::size_t batch,
                                    std::size_t seq_len, LinearHook<T>* hook) {
  validate_tokens(input_ids, batch, seq_len, attention_mask.size());
  // every parameter takes part in backward, so unused ones get zero grads
  for (auto& [name, tensor] : params_) g.parameter(name, tensor);

  const std::size_t hidden = static_cast<std::size_t>(config_.hidden);
  const std::size_t heads = static_cast<std::size_t>(config_.heads);
  const std::size_t head_dim = hidden / heads;
  const std::size_t tokens = batch * seq_len;

  std::vector<std::int64_t> ids(input_ids.begin(), input_ids.end());
  std::vector<std::int64_t> positions(tokens);
  for (std::size_t i = 0; i < tokens; ++i) positions[i] = as_i64(i % seq_len);

  NodeId h = g.apply(Primitive::add,
                     {g.apply(Primitive::embedding, {param(g, "embeddings.token.weight")}, {{"ids", ids}}),
                      g.apply(Primitive::embedding, {param(g, "embeddings.position.weight")},
                              {{"ids", positions}})});
  h = g.apply(Primitive::layer_norm, {h, param(g, "embeddings.ln.gain"), param(g, "embeddings.ln.bias")},
              {{"eps", kLayerNormEps}});

  // additive key-padding mask, one [seq, seq] block per (example, head)
  BasicTensor<T> mask({batch * heads, seq_len, seq_len});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t hd = 0; hd < heads; ++hd)
      for (std::size_t qi = 0; qi < seq_len; ++qi)
        for (std::size_t kj = 0; kj < seq_len; ++kj)
          if (attention_mask[b * seq_len + kj] == 0)
            mask.values[((b * heads + hd) * seq_len + qi) * seq_len + kj] = static_cast<T>(kMaskedScore);
  const NodeId mask_node = g.constant(std::move(mask));

  const std::vector<std::int64_t> split_shape{as_i64(batch), as_i64(seq_len), as_i64(heads), as_i64(head_dim)};
  const std::vector<std::int64_t> heads_shape{as_i64(batch * heads), as_i64(seq_len), as_i64(head_dim)};
  const std::vector<std::int64_t> merged_shape{as_i64(batch), as_i64(heads), as_i64(seq_len), as_i64(head_dim)};
  const std::vector<std::int64_t> swap12{0, 2, 1, 3};
  auto split = [&](NodeId x) {
    x = g.apply(Primitive::reshape, {x}, {{"shape", split_shape}});
    x = g.apply(Primitive::permute, {x}, {{"axes", swap12}});
    return g.apply(Primitive::reshape, {x}, {{"shape", heads_shape}});
  };
  auto merge = [&](NodeId x) {
    x = g.apply(Primitive::reshape, {x}, {{"shape", merged_shape}});
    x = g.apply(Primitive::permute, {x}, {{"axes", swap12}});
    return g.apply(Primitive::reshape, {x}, {{"shape", std::vector<std::int64_t>{as_i64(tokens), as_i64(hidden)}}});
  };

  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(head_dim));
  for (int l = 0; l < config_.num_layers; ++l) {
    const std::string p = "layer." + std::to_string(l) + ".";
    const NodeId q = split(linear(g, h, p + "q", hook));
    const NodeId k = split(linear(g, h, p + "k", hook));
    const NodeId v = split(linear(g, h, p + "v", hook));
    NodeId scores = g.apply(Primitive::matmul, {q, g.apply(Primitive::transpose, {k})});
    scores = g.apply(Primitive::scale, {scores}, {{"factor", inv_sqrt_d}});
    scores = g.apply(Primitive::add, {scores, mask_node});
    const NodeId probs = g.apply(Primitive::softmax, {scores});
    const NodeId ctx = merge(g.apply(Primitive::matmul, {probs, v}));
    const NodeId attn = linear(g, ctx, p + "attn_out", hook);
    h = g.apply(Primitive::layer_norm,
                {g.apply(Primitive::add, {h, attn}), param(g, p + "attn_ln.gain"), param(g, p + "attn_ln.bias")},
                {{"eps", kLayerNormEps}});
    NodeId f = g.apply(Primitive::gelu, {linear(g, h, p + "ffn_in", hook)});
    f = linear(g, f, p + "ffn_out", hook);
    h = g.apply(Primitive::layer_norm,
                {g.apply(Primitive::add, {h, f}), param(g, p + "ffn_ln.gain"), param(g, p + "ffn_ln.bias")},
                {{"eps", kLayerNormEps}});
  }
  return h;
}

template <class T>
MlmOutput BasicEncoderModel<T>::forward_mlm(BasicGraph<T>& g, const MlmBatch& batch, LinearHook<T>* hook) {
  if (!config_.has_mlm_head()) throw ContractError("forward_mlm: model has no MLM head");
  if (batch.labels.size() != batch.input_ids.size()) throw DataError("forward_mlm: label buffer size mismatch");
  const NodeId h = encode(g, batch.input_ids, batch.attention_mask, batch.batch, batch.seq_len, hook);

  MlmOutput out;
  std::vector<std::int64_t> targets;
  for (std::size_t i = 0; i < batch.labels.size(); ++i) {
    const auto label = batch.labels[i];
    if (label == kIgnoreLabel) continue;
    if (label < 0 || label >= config_.vocab) throw DataError("MLM label " + std::to_string(label) + " outside vocab");
    out.rows.push_back(as_i64(i));
    targets.push_back(label);
  }
  if (out.rows.empty()) {
    out.degenerate = true;
    out.logits = g.constant(BasicTensor<T>({0, static_cast<std::size_t>(config_.vocab)}));
    out.loss = g.constant(BasicTensor<T>({1}, T(0)));
    return out;
  }
  const NodeId picked = g.apply(Primitive::gather_rows, {h}, {{"rows", out.rows}});
  out.logits = linear(g, picked, "mlm_head", nullptr);
  out.loss = g.apply(Primitive::cross_entropy, {out.logits}, {{"targets", targets}});
  return out;
}

template <class T>
ClassifyOutput BasicEncoderModel<T>::forward_classify(BasicGraph<T>& g, const TaskBatch& batch,
                                                      LinearHook<T>* hook) {
  if (!config_.has_classifier()) throw ContractError("forward_classify: model has no classifier head");
  if (batch.labels.size() != batch.batch) throw DataError("forward_classify: label count mismatch");
  const NodeId h = encode(g, batch.input_ids, batch.attention_mask, batch.batch, batch.seq_len, hook);

  std::vector<std::int64_t> first_tokens(batch.batch), targets(batch.batch);
  for (std::size_t b = 0; b < batch.batch; ++b) {
    first_tokens[b] = as_i64(b * batch.seq_len);
    if (batch.labels[b] < 0 || batch.labels[b] >= config_.num_labels)
      throw DataError("class label " + std::to_string(batch.labels[b]) + " out of range");
    targets[b] = batch.labels[b];
  }
  NodeId rep = g.apply(Primitive::gather_rows, {h}, {{"rows", first_tokens}});
  if (config_.has_pooler) rep = g.apply(Primitive::tanh, {linear(g, rep, "pooler", hook)});
  ClassifyOutput out;
  out.logits = linear(g, rep, "classifier", nullptr);
  out.loss = g.apply(Primitive::cross_entropy, {out.logits}, {{"targets", targets}});
  return out;
}

template class BasicEncoderModel<float>;
template class BasicEncoderModel<double>;

}  // namespace pofa
