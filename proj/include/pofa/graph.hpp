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
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pofa/tensor.hpp"

namespace pofa {

// The primitive set. Every op the model, losses and quantizer need, and
// nothing else.
enum class Primitive {
  matmul,
  add,
  mul,
  sub,
  transpose,           // swap the last two axes
  permute,             // attr "axes"
  reshape,             // attr "shape"
  gelu,                // tanh approximation
  tanh,
  softmax,             // last axis
  layer_norm,          // last axis; inputs (x, gain, bias), attr "eps"
  embedding,           // input table [V, d], attr "ids"
  gather_rows,         // input x [n, d], attr "rows"
  cross_entropy,       // input logits [n, K], attr "targets" (-1 = ignore)
  soft_cross_entropy,  // inputs (student logits, teacher probs), attr "temperature"
  mean,                // all elements -> [1]
  scale,               // attr "factor"
  fake_quant,          // attrs "scale", "zero_point", "qmin", "qmax"
};

std::string_view primitive_name(Primitive p);
// Throws UnsupportedPrimitive for unknown names.
Primitive primitive_from_name(std::string_view name);

using AttrValue = std::variant<double, std::int64_t, std::vector<std::int64_t>>;

class Attrs {
 public:
  Attrs() = default;
  Attrs(std::initializer_list<std::pair<const std::string, AttrValue>> init) : values_(init) {}

  void set(const std::string& key, AttrValue v) { values_[key] = std::move(v); }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  double real(const std::string& key) const;
  double real_or(const std::string& key, double fallback) const;
  std::int64_t integer(const std::string& key) const;
  const std::vector<std::int64_t>& ints(const std::string& key) const;

 private:
  std::map<std::string, AttrValue> values_;
};

using NodeId = std::size_t;

// Eager tape. apply() evaluates immediately and records the node so that
// backward() can replay it in reverse. Parameter leaves are bound by
// reference to tensors owned elsewhere (a ParameterStore); their gradients
// are accumulated into those tensors' grad buffers.
template <class T>
class BasicGraph {
 public:
  using TensorT = BasicTensor<T>;

  BasicGraph() = default;
  BasicGraph(const BasicGraph&) = delete;
  BasicGraph& operator=(const BasicGraph&) = delete;
  BasicGraph(BasicGraph&&) = default;
  BasicGraph& operator=(BasicGraph&&) = default;

  // Binding the same name to the same tensor again returns the existing
  // node; a different tensor under a taken name is a contract error.
  NodeId parameter(const std::string& name, TensorT& tensor);
  NodeId constant(TensorT value);

  NodeId apply(Primitive kind, std::vector<NodeId> inputs, Attrs attrs = {});
  NodeId apply(std::string_view kind, std::vector<NodeId> inputs, Attrs attrs = {}) {
    return apply(primitive_from_name(kind), std::move(inputs), std::move(attrs));
  }

  const TensorT& value(NodeId id) const;
  const Shape& shape(NodeId id) const { return value(id).shape; }
  T scalar(NodeId id) const;

  // Reverse-mode accumulation from a scalar node. Every bound parameter
  // ends up with a grad buffer; parameters that do not reach the loss get
  // zeros. Gradients accumulate across calls.
  void backward(NodeId loss);

  std::size_t size() const { return nodes_.size(); }
  std::vector<std::string> parameter_names() const;

 private:
  enum class Role { parameter, constant, op };

  struct Node {
    Role role = Role::op;
    Primitive kind = Primitive::add;
    std::vector<NodeId> inputs;
    Attrs attrs;
    TensorT value;
    TensorT* param = nullptr;
    std::string name;
    std::vector<T> saved;       // primitive-specific forward state
    std::vector<T> saved_aux;
    bool needs_grad = false;
  };

  void check_id(NodeId id) const;
  void forward(Node& node);
  void backward_node(const Node& node, const std::vector<T>& gy, std::vector<std::vector<T>>& grads);

  std::vector<Node> nodes_;
  std::map<std::string, NodeId> param_index_;
};

using Graph = BasicGraph<float>;
using Graph64 = BasicGraph<double>;

}  // namespace pofa
