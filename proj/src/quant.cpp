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

#include "pofa/quant.hpp"

#include <algorithm>
#include <cmath>

#include "pofa/errors.hpp"
#include "pofa/quant_grid.hpp"

namespace pofa {

std::int64_t QuantParams::qmin() const { return scheme == QuantScheme::symmetric_weight ? -127 : 0; }
std::int64_t QuantParams::qmax() const { return scheme == QuantScheme::symmetric_weight ? 127 : 255; }

void QuantParams::validate() const {
  if (bits != 8) throw ContractError("quantization: only 8-bit grids are supported");
  if (!(scale > 0.0f) || !std::isfinite(scale)) throw ContractError("quantization: scale must be finite and > 0");
  if (scheme == QuantScheme::symmetric_weight && zero_point != 0)
    throw ContractError("quantization: symmetric weights need zero_point 0");
  if (zero_point < qmin() || zero_point > qmax()) throw ContractError("quantization: zero_point outside range");
}

Observer observe(Observer obs, std::span<const float> x) {
  for (float v : x) {
    if (!obs.initialized) {
      obs.running_min = obs.running_max = v;
      obs.initialized = true;
    } else {
      obs.running_min = std::min(obs.running_min, v);
      obs.running_max = std::max(obs.running_max, v);
    }
  }
  return obs;
}

QuantParams weight_qparams(std::span<const float> w) {
  if (w.empty()) throw ContractError("weight_qparams: empty tensor");
  float m = 0.0f;
  for (float v : w) m = std::max(m, std::abs(v));
  QuantParams qp;
  qp.scheme = QuantScheme::symmetric_weight;
  qp.scale = m > 0.0f ? static_cast<float>(static_cast<double>(m) / 127.0) : 1.0f;
  return qp;
}

QuantParams activation_qparams(const Observer& obs) {
  if (!obs.initialized) throw StateError("activation_qparams: observer has not seen any data");
  const double lo = std::min(0.0, static_cast<double>(obs.running_min));
  const double hi = std::max(0.0, static_cast<double>(obs.running_max));
  QuantParams qp;
  qp.scheme = QuantScheme::asymmetric_activation;
  const float s = static_cast<float>((hi - lo) / 255.0);
  qp.scale = s > 0.0f ? s : 1.0f;
  const double zp = std::nearbyint(-lo / static_cast<double>(qp.scale));
  qp.zero_point = static_cast<std::int32_t>(std::clamp(zp, 0.0, 255.0));
  return qp;
}

std::int64_t quantize(float x, const QuantParams& qp) {
  return quantize_to_grid(static_cast<double>(x), static_cast<double>(qp.scale), qp.zero_point, qp.qmin(), qp.qmax());
}

float dequantize(std::int64_t q, const QuantParams& qp) {
  return static_cast<float>(dequantize_from_grid(q, static_cast<double>(qp.scale), qp.zero_point));
}

Tensor fake_quant(const Tensor& x, const QuantParams& qp) {
  qp.validate();
  Tensor out(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) out.values[i] = dequantize(quantize(x.values[i], qp), qp);
  return out;
}

template <class T>
NodeId fake_quant(BasicGraph<T>& g, NodeId x, const QuantParams& qp) {
  qp.validate();
  return g.apply(Primitive::fake_quant, {x},
                 {{"scale", static_cast<double>(qp.scale)},
                  {"zero_point", std::int64_t{qp.zero_point}},
                  {"qmin", qp.qmin()},
                  {"qmax", qp.qmax()}});
}

template NodeId fake_quant<float>(Graph&, NodeId, const QuantParams&);
template NodeId fake_quant<double>(Graph64&, NodeId, const QuantParams&);

NodeId FakeQuantHook::input(Graph& g, const std::string& layer, NodeId x) {
  Observer& obs = observers_[layer];
  if (mode_ == Mode::observe) {
    obs = observe(obs, g.value(x).values);
  } else if (!obs.initialized) {
    throw StateError("fake-quant: no observer statistics for '" + layer + "'");
  }
  return fake_quant(g, x, activation_qparams(obs));
}

NodeId FakeQuantHook::weight(Graph& g, const std::string& layer, NodeId w) {
  if (auto it = fixed_.find(layer); it != fixed_.end()) return fake_quant(g, w, it->second);
  return fake_quant(g, w, weight_qparams(g.value(w).values));
}

std::string layer_of_weight(const std::string& name) {
  constexpr std::string_view suffix = ".weight";
  if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0)
    throw ContractError("'" + name + "' is not a weight name");
  return name.substr(0, name.size() - suffix.size());
}

std::string observer_record_name(const std::string& layer) { return "observer." + layer + ".input"; }

Checkpoint export_int8(const EncoderModel& model, const MaskSet& masks, const FakeQuantHook& hook,
                       std::string stage) {
  Checkpoint c = checkpoint_from_model(model, std::move(stage));
  for (const auto& name : model.prunable_parameters()) {
    const Tensor& w = model.parameters().at(name);
    const QuantParams qp = weight_qparams(w.values);
    TensorRecord r;
    r.name = name;
    r.shape = w.shape;
    r.quantized = true;
    r.scale = qp.scale;
    r.zero_point = qp.zero_point;
    r.bits = 8;
    r.scheme = qp.scheme;
    r.q.resize(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) r.q[i] = static_cast<std::int8_t>(quantize(w.values[i], qp));
    if (const Bitmap* m = masks.find(name)) {
      if (m->size() != w.size()) throw ContractError("export_int8: mask size mismatch for '" + name + "'");
      r.bitmap = *m;
      for (std::size_t i = 0; i < w.size(); ++i)
        if (!r.bitmap[i]) r.q[i] = static_cast<std::int8_t>(qp.zero_point);
    }
    for (auto& rec : c.tensors)
      if (rec.name == name) rec = std::move(r);
  }
  for (const auto& [layer, obs] : hook.observers()) {
    if (!obs.initialized) continue;
    c.tensors.push_back(float_record(observer_record_name(layer), Tensor({2}, {obs.running_min, obs.running_max})));
  }
  return c;
}

FakeQuantHook hook_from_checkpoint(const Checkpoint& ckpt) {
  FakeQuantHook hook(FakeQuantHook::Mode::frozen);
  for (const auto& name : prunable_parameter_names(ckpt.model)) {
    const auto& r = ckpt.at(name);
    if (!r.quantized) throw FormatError("'" + name + "' is not stored as q8", 0);
    const std::string layer = layer_of_weight(name);
    QuantParams qp;
    qp.scale = r.scale;
    qp.zero_point = r.zero_point;
    qp.scheme = r.scheme;
    qp.validate();
    hook.fix_weight_params(layer, qp);
    const auto& o = ckpt.at(observer_record_name(layer));
    if (o.quantized || o.values.size() != 2) throw FormatError("malformed observer record '" + o.name + "'", 0);
    hook.observers()[layer] = Observer{o.values[0], o.values[1], true};
  }
  return hook;
}

}  // namespace pofa
