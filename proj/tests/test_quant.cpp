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

#include <doctest.h>

#include <cmath>

#include "pofa/errors.hpp"
#include "pofa/quant.hpp"
#include "pofa/rng.hpp"

using namespace pofa;

namespace {

ModelConfig tiny() {
  ModelConfig c;
  c.num_layers = 1;
  c.hidden = 16;
  c.heads = 2;
  c.ffn_dim = 20;
  c.vocab = 24;
  c.max_seq = 10;
  c.head = HeadKind::classify;
  return c;
}

QuantParams sym(float scale) { return {scale, 0, 8, QuantScheme::symmetric_weight}; }

}  // namespace

TEST_CASE("observer examples") {
  Observer o;
  const std::vector<float> a{1, 2, 3}, b{-1, 0}, c{0, 0};
  o = observe(o, a);
  CHECK(o.initialized);
  CHECK(o.running_min == 1.0f);
  CHECK(o.running_max == 3.0f);
  o = observe(o, b);
  CHECK(o.running_min == -1.0f);
  CHECK(o.running_max == 3.0f);
  o = observe(o, c);
  CHECK(o.running_min == -1.0f);
  CHECK(o.running_max == 3.0f);
  CHECK(observe(Observer{}, std::span<const float>{}).initialized == false);
}

TEST_CASE("weight quantization parameters") {
  const std::vector<float> w{-1.27f, 0.5f};
  const auto qp = weight_qparams(w);
  CHECK(qp.scale == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(qp.zero_point == 0);
  CHECK(qp.qmin() == -127);
  CHECK(qp.qmax() == 127);
  CHECK(weight_qparams(std::vector<float>{0, 0}).scale == 1.0f);
  CHECK_THROWS_AS(weight_qparams(std::vector<float>{}), ContractError);
  CHECK(quantize(0.5f, sym(0.01f)) == 50);
  CHECK(dequantize(50, sym(0.01f)) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(quantize(100.0f, sym(0.01f)) == 127);
  CHECK(quantize(-100.0f, sym(0.01f)) == -127);
}

TEST_CASE("activation quantization parameters") {
  CHECK_THROWS_AS(activation_qparams(Observer{}), StateError);
  const auto a = activation_qparams({-1.0f, 3.0f, true});
  CHECK(a.scale == doctest::Approx(4.0 / 255.0).epsilon(1e-6));
  CHECK(a.zero_point == 64);
  CHECK(a.qmin() == 0);
  CHECK(a.qmax() == 255);
  const auto b = activation_qparams({0.0f, 6.0f, true});
  CHECK(b.scale == doctest::Approx(6.0 / 255.0).epsilon(1e-6));
  CHECK(b.zero_point == 0);
  const auto c = activation_qparams({2.0f, 5.0f, true});  // widened to include 0
  CHECK(c.zero_point == 0);
  CHECK(c.scale == doctest::Approx(5.0 / 255.0).epsilon(1e-6));
  const auto d = activation_qparams({-4.0f, -1.0f, true});
  CHECK(d.zero_point == 255);
  CHECK(activation_qparams({0.0f, 0.0f, true}).scale == 1.0f);
}

TEST_CASE("zero is exactly representable under asymmetric parameters") {
  Rng r(3);
  for (int i = 0; i < 2000; ++i) {
    float lo = static_cast<float>(r.normal() * 5), hi = static_cast<float>(r.normal() * 5);
    if (lo > hi) std::swap(lo, hi);
    const auto qp = activation_qparams({lo, hi, true});
    CHECK(qp.zero_point >= 0);
    CHECK(qp.zero_point <= 255);
    CHECK(fake_quant(Tensor({1}, {0.0f}), qp).values[0] == 0.0f);
    CHECK(quantize(0.0f, qp) == qp.zero_point);
  }
}

TEST_CASE("rounding error bound, idempotence and fixpoints") {
  Rng r(11);
  for (int trial = 0; trial < 20; ++trial) {
    const bool asym = trial % 2 == 1;
    QuantParams qp = asym ? activation_qparams({-static_cast<float>(0.5 + r.uniform()), static_cast<float>(0.2 + 3 * r.uniform()), true})
                          : weight_qparams(std::vector<float>{static_cast<float>(0.1 + r.uniform())});
    const double lo = static_cast<double>(qp.qmin() - qp.zero_point) * qp.scale;
    const double hi = static_cast<double>(qp.qmax() - qp.zero_point) * qp.scale;
    Tensor x({5000});
    for (auto& v : x.values) v = static_cast<float>(lo + (hi - lo) * r.uniform());
    const Tensor y = fake_quant(x, qp);
    for (std::size_t i = 0; i < x.size(); ++i)
      CHECK(std::fabs(static_cast<double>(x.values[i]) - static_cast<double>(y.values[i])) <= qp.scale / 2.0 + 1e-12);
    CHECK(fake_quant(y, qp).values == y.values);
  }
  const auto qp = sym(0.01f);
  const Tensor on_grid({3}, {dequantize(5, qp), dequantize(-127, qp), 0.0f});
  CHECK(fake_quant(on_grid, qp).values == on_grid.values);
}

TEST_CASE("qparams validation") {
  CHECK_THROWS_AS((QuantParams{0.0f, 0, 8, QuantScheme::symmetric_weight}.validate()), ContractError);
  CHECK_THROWS_AS((QuantParams{1.0f, 3, 8, QuantScheme::symmetric_weight}.validate()), ContractError);
  CHECK_THROWS_AS((QuantParams{1.0f, 300, 8, QuantScheme::asymmetric_activation}.validate()), ContractError);
}

TEST_CASE("layer and record names") {
  CHECK(layer_of_weight("layer.0.q.weight") == "layer.0.q");
  CHECK(layer_of_weight("pooler.weight") == "pooler");
  CHECK(observer_record_name("layer.1.ffn_out") == "observer.layer.1.ffn_out.input");
}

TEST_CASE("export reproduces the fake-quant forward bit-exactly") {
  auto model = EncoderModel::build(tiny(), 4);
  Rng r(1);
  for (auto& [name, t] : model.parameters())
    for (auto& v : t.values) v += static_cast<float>(0.1 * r.normal());
  prune_step(model, all_ones_masks(model), 0.9);
  const MaskSet masks = lock_pattern(model);
  const TaskBatch batch = task_batch_range({{{5, 6, 7, 8}, 1}, {{9, 10}, 0}, {{11, 12, 13}, 2}}, 0, 3, 8);

  FakeQuantHook hook;
  CHECK_THROWS_AS(
      [&] {
        FakeQuantHook frozen(FakeQuantHook::Mode::frozen);
        Graph g;
        model.forward_classify(g, batch, &frozen);
      }(),
      StateError);
  {
    Graph g;
    model.forward_classify(g, batch, &hook);
  }
  CHECK(hook.observers().size() == model.prunable_parameters().size());
  hook.set_mode(FakeQuantHook::Mode::frozen);
  Graph g1;
  const auto logits_before = g1.value(model.forward_classify(g1, batch, &hook).logits).values;

  const Checkpoint ckpt = export_int8(model, masks, hook, "qat");
  for (const auto& name : model.prunable_parameters()) {
    const TensorRecord& rec = ckpt.at(name);
    CHECK(rec.quantized);
    CHECK(rec.bitmap == masks.at(name));
    const Tensor deq = decode(rec);
    const Tensor fq = fake_quant(model.parameters().at(name), weight_qparams(model.parameters().at(name).values));
    CHECK(deq.values == fq.values);
    for (std::size_t i = 0; i < deq.size(); ++i)
      if (!masks.at(name)[i]) CHECK(deq.values[i] == 0.0f);
  }
  CHECK(ckpt.find(observer_record_name("layer.0.q")) != nullptr);

  const Checkpoint back = deserialize(serialize(ckpt));
  CHECK(back == ckpt);
  auto restored = model_from_checkpoint(back);
  auto restored_hook = hook_from_checkpoint(back);
  Graph g2;
  const auto logits_after = g2.value(restored.forward_classify(g2, batch, &restored_hook).logits).values;
  CHECK(logits_after == logits_before);
  CHECK(lock_pattern(restored) == masks);
}

TEST_CASE("graph fake-quant forward matches the tensor function") {
  Rng r(5);
  Tensor x({64});
  for (auto& v : x.values) v = static_cast<float>(r.normal());
  const auto qp = activation_qparams({-1.0f, 1.5f, true});
  Graph g;
  CHECK(g.value(fake_quant(g, g.constant(x), qp)).values == fake_quant(x, qp).values);
}
