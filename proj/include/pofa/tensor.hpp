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
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pofa/errors.hpp"

namespace pofa {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor. `grad` is either empty (absent) or the same length
// as `values`. Training state is BasicTensor<float>; BasicTensor<double> is
// used only by the finite-difference checker.
template <class T>
struct BasicTensor {
  Shape shape;
  std::vector<T> values;
  std::vector<T> grad;

  BasicTensor() = default;

  explicit BasicTensor(Shape s, T fill = T{0})
      : shape(std::move(s)), values(numel(shape), fill) {}

  BasicTensor(Shape s, std::vector<T> v) : shape(std::move(s)), values(std::move(v)) {
    if (numel(shape) != values.size()) {
      throw DimensionError("tensor: shape " + shape_str(shape) + " holds " +
                           std::to_string(numel(shape)) + " elements, got " +
                           std::to_string(values.size()));
    }
  }

  std::size_t size() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  bool has_grad() const { return !grad.empty(); }

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), T{0});
  }
  void zero_grad() { grad.assign(values.size(), T{0}); }
  void clear_grad() { grad.clear(); }

  template <class U>
  BasicTensor<U> cast() const {
    BasicTensor<U> out;
    out.shape = shape;
    out.values.assign(values.begin(), values.end());
    out.grad.assign(grad.begin(), grad.end());
    return out;
  }
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

// Named tensors in stable insertion order. The order is part of the public
// contract: checkpoints, tie-breaking and reports all iterate in it.
template <class T>
class ParameterStore {
 public:
  using Entry = std::pair<std::string, BasicTensor<T>>;

  BasicTensor<T>& add(std::string name, BasicTensor<T> tensor) {
    if (find(name) != nullptr) throw ContractError("parameter '" + name + "' already exists");
    entries_.emplace_back(std::move(name), std::move(tensor));
    return entries_.back().second;
  }

  BasicTensor<T>* find(std::string_view name) {
    for (auto& [n, t] : entries_)
      if (n == name) return &t;
    return nullptr;
  }
  const BasicTensor<T>* find(std::string_view name) const {
    for (const auto& [n, t] : entries_)
      if (n == name) return &t;
    return nullptr;
  }

  BasicTensor<T>& at(std::string_view name) {
    if (auto* t = find(name)) return *t;
    throw LookupError("unknown parameter '" + std::string(name) + "'");
  }
  const BasicTensor<T>& at(std::string_view name) const {
    if (const auto* t = find(name)) return *t;
    throw LookupError("unknown parameter '" + std::string(name) + "'");
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.first);
    return out;
  }

  void zero_grad() {
    for (auto& e : entries_) e.second.zero_grad();
  }

  std::size_t size() const { return entries_.size(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  template <class U>
  ParameterStore<U> cast() const {
    ParameterStore<U> out;
    for (const auto& [n, t] : entries_) out.add(n, t.template cast<U>());
    return out;
  }

 private:
  std::vector<Entry> entries_;
};

enum class InitScheme { normal_002, zeros, ones };

// Deterministic initialisation: identical (shape, scheme, seed) always
// produce a bit-identical buffer. normal_002 draws N(0, 0.02^2) through Rng.
template <class T>
BasicTensor<T> seeded_init(const Shape& shape, InitScheme scheme, std::uint64_t seed);

}  // namespace pofa
