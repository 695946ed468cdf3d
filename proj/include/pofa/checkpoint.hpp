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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pofa/model.hpp"
#include "pofa/pruning.hpp"
#include "pofa/tensor.hpp"

namespace pofa {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// On-disk storage kinds.
enum class Storage : std::uint8_t { dense_f32 = 0, sparse = 1, q8 = 2 };

std::string_view storage_name(Storage s);

enum class QuantScheme : std::uint8_t { symmetric_weight = 0, asymmetric_activation = 1 };

// In memory a record is either float values or an int8 grid. Float records
// are written dense or sparse depending on their zero fraction (see
// encoded_storage); q8 records keep their grid and optional bitmap.
struct TensorRecord {
  std::string name;
  Shape shape;
  bool quantized = false;

  std::vector<float> values;  // float records

  float scale = 1.0f;  // q8 records
  std::int32_t zero_point = 0;
  std::uint8_t bits = 8;
  QuantScheme scheme = QuantScheme::symmetric_weight;
  std::vector<std::int8_t> q;  // full grid, numel(shape) entries
  Bitmap bitmap;               // empty, or numel(shape) 0/1 entries

  std::size_t size() const { return numel(shape); }
};

// Bitwise comparison (so -0.0f and NaN payloads count).
bool operator==(const TensorRecord& a, const TensorRecord& b);

TensorRecord float_record(const std::string& name, const Tensor& t);

// Float records whose zero fraction exceeds 0.5 are stored sparse.
Storage encoded_storage(const TensorRecord& r);

// Float view of a record; q8 records are dequantized on their grid.
Tensor decode(const TensorRecord& r);

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string stage;
  ModelConfig model;
  std::uint64_t config_hash = 0;
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<TensorRecord> tensors;

  const TensorRecord* find(std::string_view name) const;
  const TensorRecord& at(std::string_view name) const;  // throws LookupError
  double metric(std::string_view name) const;           // throws LookupError
  void set_metric(const std::string& name, double value);
  bool operator==(const Checkpoint&) const = default;
};

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt);
// Throws FormatError (with the byte offset) on bad magic, unknown version,
// truncation, inconsistent records or trailing bytes.
Checkpoint deserialize(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);  // IoError
Checkpoint load_checkpoint(const std::filesystem::path& path);                  // IoError, FormatError

// Parameters of `model` as float records, canonical order.
Checkpoint checkpoint_from_model(const EncoderModel& model, std::string stage);

// Rebuilds the model from the parameter records; extra records (observers)
// are ignored, q8 records are dequantized.
EncoderModel model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace pofa
