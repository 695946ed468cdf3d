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

// Finite-difference checks of the full encoder losses in 64-bit mode.
#include <doctest.h>

#include "pofa/data.hpp"
#include "pofa/distill.hpp"
#include "pofa/gradcheck.hpp"
#include "pofa/model.hpp"
#include "pofa/rng.hpp"

using namespace pofa;

namespace {

ModelConfig small() {
  ModelConfig c;
  c.num_layers = 1;
  c.hidden = 8;
  c.heads = 2;
  c.ffn_dim = 12;
  c.vocab = 16;
  c.max_seq = 8;
  c.num_labels = 3;
  return c;
}

// Weights at N(0, 0.02^2) give near-zero gradients; larger values make the
// relative error meaningful.
EncoderModel64 scaled(const ModelConfig& c, std::uint64_t seed) {
  auto m = EncoderModel::build(c, seed).cast<double>();
  Rng r(seed + 1);
  for (auto& [name, t] : m.parameters())
    for (auto& v : t.values) v += 0.3 * r.normal();
  return m;
}

}  // namespace

TEST_CASE("MLM loss gradient of a small encoder") {
  const ModelConfig c = small();
  auto model = scaled(c, 3);
  const MlmBatch b = make_mlm_batch_from({{5, 6, 7, 8, 9}, {10, 11, 12}}, 16, 1, 7, {0.0, 0.6, 0.8, 0.1});
  auto build = [&](Graph64& g) { return model.forward_mlm(g, b).loss; };
  for (const auto& name : model.parameters().names())
    CHECK_MESSAGE(finite_diff_check(model.parameters(), build, name, {1e-5, 0, 0}) < 1e-4, name);
}

TEST_CASE("classification loss gradient including pooler") {
  const ModelConfig c = small();
  auto model = scaled(c, 4);
  const TaskBatch b = task_batch_range({{{5, 6, 7}, 0}, {{8, 9, 10, 11}, 2}}, 0, 2, 6);
  auto build = [&](Graph64& g) { return model.forward_classify(g, b).loss; };
  for (const auto& name : model.parameters().names()) {
    if (name.rfind("mlm_head", 0) == 0) continue;
    CHECK_MESSAGE(finite_diff_check(model.parameters(), build, name, {1e-5, 0, 0}) < 1e-4, name);
  }
}

TEST_CASE("distillation gradient at T = 1 equals (s - t) / rows") {
  Graph64 g;
  Tensor64 s({2, 3}, {0.1, 0.5, -0.2, 1.0, 0.0, 0.3});
  const Tensor64 t_logits({2, 3}, {0.3, -0.1, 0.2, 0.0, 2.0, 0.1});
  const NodeId p = g.parameter("s", s);
  g.backward(kd_loss(g, p, t_logits, 1.0));
  const auto sp = soft_probs(s, 1.0), tp = soft_probs(t_logits, 1.0);
  for (std::size_t i = 0; i < 6; ++i) CHECK(s.grad[i] == doctest::Approx((sp.values[i] - tp.values[i]) / 2.0).epsilon(1e-12));
}

TEST_CASE("quadratic loss is exact to rounding at eps 1e-3") {
  ParameterStore<double> ps;
  ps.add("w", Tensor64({4}, {0.3, -1.2, 2.0, 0.01}));
  auto build = [&](Graph64& g) {
    const NodeId w = g.parameter("w", ps.at("w"));
    return g.apply(Primitive::mean, {g.apply(Primitive::mul, {w, w})});
  };
  CHECK(finite_diff_check(ps, build, "w") < 1e-5);
}

TEST_CASE("a loss independent of the parameter gives error 0") {
  ParameterStore<double> ps;
  ps.add("w", Tensor64({3}, {1, 2, 3}));
  ps.add("v", Tensor64({2}, {4, 5}));
  auto build = [&](Graph64& g) {
    g.parameter("w", ps.at("w"));
    return g.apply(Primitive::mean, {g.parameter("v", ps.at("v"))});
  };
  CHECK(finite_diff_check(ps, build, "w") == 0.0);
}

TEST_CASE("full MLM loss at eps 1e-3, sampled elements") {
  ModelConfig c = small();
  auto model = scaled(c, 8);
  const MlmBatch b = make_mlm_batch_from({{5, 6, 7, 8, 9, 10}}, 16, 2, 8, {0.0, 0.5, 0.8, 0.1});
  auto build = [&](Graph64& g) { return model.forward_mlm(g, b).loss; };
  for (const auto& name : model.parameters().names()) {
    if (name.rfind("pooler", 0) == 0 || name.rfind("classifier", 0) == 0) continue;
    CHECK_MESSAGE(finite_diff_check(model.parameters(), build, name, {1e-3, 100, 5}) < 1e-3, name);
  }
}
