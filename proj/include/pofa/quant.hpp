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
#include <map>
#include <optional>
#include <span>
#include <string>

#include "pofa/checkpoint.hpp"
#include "pofa/graph.hpp"
#include "pofa/model.hpp"
#include "pofa/pruning.hpp"

namespace pofa {

struct QuantParams {
  float scale = 1.0f;
  std::int32_t zero_point = 0;
  int bits = 8;
  QuantScheme scheme = QuantScheme::symmetric_weight;

  // [-127, 127] for symmetric weights, [0, 255] for asymmetric activations.
  std::int64_t qmin() const;
  std::int64_t qmax() const;
  void validate() const;  // ContractError
};

// Running extrema of a tensor stream.
struct Observer {
  float running_min = 0.0f;
  float running_max = 0.0f;
  bool initialized = false;
};

Observer observe(Observer obs, std::span<const float> x);

// scale = max|w| / 127 (1 when all zero), zero point 0. w must be non-empty.
QuantParams weight_qparams(std::span<const float> w);

// Range widened to include 0, scale = (hi - lo) / 255,
// zero_point = round(-lo / scale) clamped to [0, 255]. A constant-zero range
// gets scale 1. Throws StateError on an uninitialized observer.
QuantParams activation_qparams(const Observer& obs);

std::int64_t quantize(float x, const QuantParams& qp);
float dequantize(std::int64_t q, const QuantParams& qp);

Tensor fake_quant(const Tensor& x, const QuantParams& qp);
// Straight-through estimator in backward: gradient passes where x was in
// range and is zeroed where it was clamped.
template <class T>
NodeId fake_quant(BasicGraph<T>& g, NodeId x, const QuantParams& qp);

// Fake quantization on every prunable Linear layer. Inputs use per-layer
// activation observers; weights use weight_qparams of the current values
// unless fixed parameters were supplied for that layer.
class FakeQuantHook : public LinearHook<float> {
 public:
  enum class Mode { observe, frozen };

  explicit FakeQuantHook(Mode mode = Mode::observe) : mode_(mode) {}

  void set_mode(Mode m) { mode_ = m; }
  Mode mode() const { return mode_; }

  NodeId input(Graph& g, const std::string& layer, NodeId x) override;
  NodeId weight(Graph& g, const std::string& layer, NodeId w) override;

  std::map<std::string, Observer>& observers() { return observers_; }
  const std::map<std::string, Observer>& observers() const { return observers_; }
  void fix_weight_params(const std::string& layer, QuantParams qp) { fixed_[layer] = qp; }

 private:
  Mode mode_;
  std::map<std::string, Observer> observers_;
  std::map<std::string, QuantParams> fixed_;
};

// "layer.0.q.weight" -> "layer.0.q"
std::string layer_of_weight(const std::string& param_name);
// Checkpoint record holding a layer's input observer: [min, max].
std::string observer_record_name(const std::string& layer);

// Prunable weights become q8 records on their symmetric grid, with the mask
// as bitmap; everything else stays float32. Observers are stored as
// two-element float records.
Checkpoint export_int8(const EncoderModel& model, const MaskSet& masks, const FakeQuantHook& hook,
                       std::string stage);

// Frozen hook reproducing the quantized forward of an exported checkpoint.
FakeQuantHook hook_from_checkpoint(const Checkpoint& ckpt);

}  // namespace pofa
