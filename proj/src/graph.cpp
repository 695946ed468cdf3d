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

#include "pofa/graph.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "pofa/kernels.hpp"
#include "pofa/quant_grid.hpp"

namespace pofa {

namespace {

constexpr std::array<std::pair<Primitive, std::string_view>, 18> kPrimitiveNames{{
    {Primitive::matmul, "matmul"},
    {Primitive::add, "add"},
    {Primitive::mul, "mul"},
    {Primitive::sub, "sub"},
    {Primitive::transpose, "transpose"},
    {Primitive::permute, "permute"},
    {Primitive::reshape, "reshape"},
    {Primitive::gelu, "gelu"},
    {Primitive::tanh, "tanh"},
    {Primitive::softmax, "softmax-last-axis"},
    {Primitive::layer_norm, "layer-norm-last-axis"},
    {Primitive::embedding, "embedding-lookup"},
    {Primitive::gather_rows, "gather-rows"},
    {Primitive::cross_entropy, "cross-entropy-with-targets"},
    {Primitive::soft_cross_entropy, "soft-cross-entropy"},
    {Primitive::mean, "mean"},
    {Primitive::scale, "scale"},
    {Primitive::fake_quant, "fake-quant"},
}};

[[noreturn]] void dim_error(Primitive p, const std::string& detail) {
  throw DimensionError(std::string(primitive_name(p)) + ": " + detail);
}

std::size_t expect_inputs(Primitive p, std::size_t got, std::size_t want) {
  if (got != want) {
    throw ContractError(std::string(primitive_name(p)) + ": expects " + std::to_string(want) +
                        " input(s), got " + std::to_string(got));
  }
  return want;
}

// Shape suffix test for right-aligned broadcasting of b onto a.
bool is_suffix(const Shape& a, const Shape& b) {
  if (b.size() > a.size()) return false;
  return std::equal(b.rbegin(), b.rend(), a.rbegin());
}

Shape permuted_shape(const Shape& in, const std::vector<std::int64_t>& axes) {
  Shape out(in.size());
  for (std::size_t i = 0; i < axes.size(); ++i) out[i] = in[static_cast<std::size_t>(axes[i])];
  return out;
}

// out[perm(idx)] (+)= in[idx] for a generic axis permutation.
template <class T>
void permute_copy(const T* in, const Shape& in_shape, const std::vector<std::int64_t>& axes, T* out,
                  bool accumulate) {
  const std::size_t rank = in_shape.size();
  const Shape out_shape = permuted_shape(in_shape, axes);
  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_strides[i - 1] = in_strides[i] * in_shape[i];
  // stride into `in` for each output axis
  std::vector<std::size_t> walk(rank);
  for (std::size_t i = 0; i < rank; ++i) walk[i] = in_strides[static_cast<std::size_t>(axes[i])];
  std::vector<std::size_t> idx(rank, 0);
  const std::size_t total = numel(in_shape);
  for (std::size_t o = 0; o < total; ++o) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < rank; ++i) src += idx[i] * walk[i];
    if (accumulate)
      out[o] += in[src];
    else
      out[o] = in[src];
    for (std::size_t i = rank; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
}

std::vector<std::int64_t> inverse_axes(const std::vector<std::int64_t>& axes) {
  std::vector<std::int64_t> inv(axes.size());
  for (std::size_t i = 0; i < axes.size(); ++i) inv[static_cast<std::size_t>(axes[i])] = static_cast<std::int64_t>(i);
  return inv;
}

}  // namespace

std::string_view primitive_name(Primitive p) {
  for (const auto& [k, name] : kPrimitiveNames)
    if (k == p) return name;
  return "unknown";
}

Primitive primitive_from_name(std::string_view name) {
  for (const auto& [k, n] : kPrimitiveNames)
    if (n == name) return k;
  throw UnsupportedPrimitive("unsupported primitive '" + std::string(name) + "'");
}

double Attrs::real(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ContractError("missing attribute '" + key + "'");
  if (const auto* d = std::get_if<double>(&it->second)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
  throw ContractError("attribute '" + key + "' is not a number");
}

double Attrs::real_or(const std::string& key, double fallback) const {
  return has(key) ? real(key) : fallback;
}

std::int64_t Attrs::integer(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ContractError("missing attribute '" + key + "'");
  if (const auto* i = std::get_if<std::int64_t>(&it->second)) return *i;
  throw ContractError("attribute '" + key + "' is not an integer");
}

const std::vector<std::int64_t>& Attrs::ints(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ContractError("missing attribute '" + key + "'");
  if (const auto* v = std::get_if<std::vector<std::int64_t>>(&it->second)) return *v;
  throw ContractError("attribute '" + key + "' is not an integer list");
}

template <class T>
void BasicGraph<T>::check_id(NodeId id) const {
  if (id >= nodes_.size()) throw LookupError("graph: unknown node " + std::to_string(id));
}

template <class T>
NodeId BasicGraph<T>::parameter(const std::string& name, TensorT& tensor) {
  if (auto it = param_index_.find(name); it != param_index_.end()) {
    if (nodes_[it->second].param != &tensor)
      throw ContractError("graph: parameter name '" + name + "' bound to a different tensor");
    return it->second;
  }
  Node node;
  node.role = Role::parameter;
  node.param = &tensor;
  node.name = name;
  node.needs_grad = true;
  nodes_.push_back(std::move(node));
  param_index_[name] = nodes_.size() - 1;
  return nodes_.size() - 1;
}

template <class T>
NodeId BasicGraph<T>::constant(TensorT value) {
  Node node;
  node.role = Role::constant;
  node.value = std::move(value);
  node.value.grad.clear();
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

template <class T>
const BasicTensor<T>& BasicGraph<T>::value(NodeId id) const {
  check_id(id);
  const Node& n = nodes_[id];
  return n.role == Role::parameter ? *n.param : n.value;
}

template <class T>
T BasicGraph<T>::scalar(NodeId id) const {
  const auto& v = value(id);
  if (v.size() != 1) throw ContractError("graph: node " + std::to_string(id) + " is not scalar");
  return v.values[0];
}

template <class T>
std::vector<std::string> BasicGraph<T>::parameter_names() const {
  std::vector<std::string> out;
  for (const auto& n : nodes_)
    if (n.role == Role::parameter) out.push_back(n.name);
  return out;
}

template <class T>
NodeId BasicGraph<T>::apply(Primitive kind, std::vector<NodeId> inputs, Attrs attrs) {
  for (NodeId id : inputs) check_id(id);
  Node node;
  node.role = Role::op;
  node.kind = kind;
  node.inputs = std::move(inputs);
  node.attrs = std::move(attrs);
  for (NodeId id : node.inputs) node.needs_grad = node.needs_grad || nodes_[id].needs_grad;
  // soft targets are constants by definition
  if (kind == Primitive::soft_cross_entropy && node.inputs.size() == 2)
    node.needs_grad = nodes_[node.inputs[0]].needs_grad;
  forward(node);
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

template <class T>
void BasicGraph<T>::forward(Node& node) {
  const Primitive p = node.kind;
  auto in = [&](std::size_t i) -> const TensorT& { return value(node.inputs[i]); };
  TensorT& out = node.value;

  switch (p) {
    case Primitive::matmul: {
      expect_inputs(p, node.inputs.size(), 2);
      const auto& a = in(0);
      const auto& b = in(1);
      if (a.rank() >= 2 && b.rank() == 2 && a.shape.back() == b.shape[0]) {
        const std::size_t k = b.shape[0], n = b.shape[1];
        Shape s = a.shape;
        s.back() = n;
        out = TensorT(s);
        kernels::gemm(a.values.data(), b.values.data(), out.values.data(),
                      {1, a.size() / k, k, n, false, false}, false);
      } else if (a.rank() == 3 && b.rank() == 3 && a.shape[0] == b.shape[0] &&
                 a.shape[2] == b.shape[1]) {
        out = TensorT({a.shape[0], a.shape[1], b.shape[2]});
        kernels::gemm(a.values.data(), b.values.data(), out.values.data(),
                      {a.shape[0], a.shape[1], a.shape[2], b.shape[2], false, false}, false);
      } else {
        dim_error(p, "cannot multiply " + shape_str(a.shape) + " by " + shape_str(b.shape));
      }
      return;
    }
    case Primitive::add:
    case Primitive::sub:
    case Primitive::mul: {
      expect_inputs(p, node.inputs.size(), 2);
      const auto& a = in(0);
      const auto& b = in(1);
      if (!is_suffix(a.shape, b.shape) || b.size() == 0)
        dim_error(p, "cannot broadcast " + shape_str(b.shape) + " onto " + shape_str(a.shape));
      out = TensorT(a.shape);
      const auto op = p == Primitive::add   ? kernels::BinaryOp::add
                      : p == Primitive::sub ? kernels::BinaryOp::sub
                                            : kernels::BinaryOp::mul;
      kernels::broadcast_binary(op, a.values.data(), b.values.data(), out.values.data(),
                                a.size() / b.size(), b.size());
      return;
    }
    case Primitive::transpose: {
      expect_inputs(p, node.inputs.size(), 1);
      const auto& a = in(0);
      if (a.rank() < 2) dim_error(p, "needs rank >= 2, got " + shape_str(a.shape));
      std::vector<std::int64_t> axes(a.rank());
      for (std::size_t i = 0; i < axes.size(); ++i) axes[i] = static_cast<std::int64_t>(i);
      std::swap(axes[a.rank() - 1], axes[a.rank() - 2]);
      node.attrs.set("axes", axes);
      out = TensorT(permuted_shape(a.shape, axes));
      permute_copy(a.values.data(), a.shape, axes, out.values.data(), false);
      return;
    }
    case Primitive::permute: {
      expect_inputs(p, node.inputs.size(), 1);
      const auto& a = in(0);
      const auto& axes = node.attrs.ints("axes");
      std::vector<bool> seen(a.rank(), false);
      bool ok = axes.size() == a.rank();
      for (auto ax : axes) {
        if (!ok || ax < 0 || static_cast<std::size_t>(ax) >= a.rank() || seen[static_cast<std::size_t>(ax)]) {
          ok = false;
          break;
        }
        seen[static_cast<std::size_t>(ax)] = true;
      }
      if (!ok) dim_error(p, "invalid axes for " + shape_str(a.shape));
      out = TensorT(permuted_shape(a.shape, axes));
      permute_copy(a.values.data(), a.shape, axes, out.values.data(), false);
      return;
    }
    case Primitive::reshape: {
      expect_inputs(p, node.inputs.size(), 1);
      const auto& a = in(0);
      Shape s;
      for (auto d : node.attrs.ints("shape")) {
        if (d < 0) dim_error(p, "negative dimension");
        s.push_back(static_cast<std::size_t>(d));
      }
      if (numel(s) != a.size())
        dim_error(p, "cannot reshape " + shape_str(a.shape) + " to " + shape_str(s));
      out = TensorT(s, a.values);
      return;
    }
    case Primitive::gelu: {
      expect_inputs(p, node.inputs.size(), 1);
      const auto& a = in(0);
      out = TensorT(a.shape);
      kernels::gelu(a.values.data(), out.values.data(), a.size());
      return;
    }
    case Primitive::tanh: {
      expect_inputs(p, node.inputs.size(), 1);
      const auto& a = in(0);
      out = TensorT(a.shape);
      for (std::size_t i = 0; i < a.size(); ++i) out.values[i] = std::tanh(a.values[i]);
      return;
    }
    case Primitive::softmax: {
      expect_inputs(p, node.inputs.size(), 1);
      const auto& a = in(0);
      if (a.rank() < 1 || a.shape.back() == 0) dim_error(p, "empty last axis " + shape_str(a.shape));
      out = TensorT(a.shape);
      const std::size_t cols = a.shape.back();
      kernels::softmax_rows(a.values.data(), out.values.data(), a.size() / cols, cols);
      return;
    }
    case Primitive::layer_norm: {
      expect_inputs(p, node.inputs.size(), 3);
      const auto& x = in(0);
      const auto& g = in(1);
      const auto& b = in(2);
      if (x.rank() < 1 || g.shape != Shape{x.shape.back()} || b.shape != g.shape)
        dim_error(p, "x " + shape_str(x.shape) + ", gain " + shape_str(g.shape) + ", bias " +
                         shape_str(b.shape));
      const std::size_t cols = x.shape.back(), rows = x.size() / cols;
      out = TensorT(x.shape);
      node.saved.assign(x.size(), T(0));
      node.saved_aux.assign(rows, T(0));
      kernels::layer_norm_rows(x.values.data(), g.values.data(), b.values.data(), out.values.data(),
                               node.saved.data(), node.saved_aux.data(), rows, cols,
                               node.attrs.real_or("eps", 1e-5));
      return;
    }
    case Primitive::embedding:
    case Primitive::gather_rows: {
      expect_inputs(p, node.inputs.size(), 1);
      const auto& table = in(0);
      if (p == Primitive::embedding ? table.rank() != 2 : table.rank() < 2)
        dim_error(p, "bad table shape " + shape_str(table.shape));
      const std::size_t d = table.shape.back(), n = table.size() / d;
      const auto& ids = node.attrs.ints(p == Primitive::embedding ? "ids" : "rows");
      out = TensorT({ids.size(), d});
      for (std::size_t r = 0; r < ids.size(); ++r) {
        if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= n)
          dim_error(p, "index " + std::to_string(ids[r]) + " out of range for " + shape_str(table.shape));
        std::copy_n(table.values.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(ids[r]) * d), d,
                    out.values.begin() + static_cast<std::ptrdiff_t>(r * d));
      }
      return;
    }
    case Primitive::cross_entropy: {
      expect_inputs(p, node.inputs.size(), 1);
      const auto& x = in(0);
      if (x.rank() != 2) dim_error(p, "logits must be rank 2, got " + shape_str(x.shape));
      const std::size_t n = x.shape[0], k = x.shape[1];
      const auto& targets = node.attrs.ints("targets");
      if (targets.size() != n)
        dim_error(p, std::to_string(targets.size()) + " targets for logits " + shape_str(x.shape));
      node.saved.assign(x.size(), T(0));
      if (n > 0) kernels::softmax_rows(x.values.data(), node.saved.data(), n, k);
      T total = T(0);
      std::size_t counted = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto t = targets[i];
        if (t < 0) continue;
        if (static_cast<std::size_t>(t) >= k) dim_error(p, "target " + std::to_string(t) + " >= " + std::to_string(k));
        const T* row = x.values.data() + i * k;
        T mx = row[0];
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        T s = T(0);
        for (std::size_t j = 0; j < k; ++j) s += std::exp(row[j] - mx);
        total += std::log(s) + mx - row[t];
        ++counted;
      }
      node.saved_aux = {static_cast<T>(counted)};
      out = TensorT({1}, {counted ? total / static_cast<T>(counted) : T(0)});
      return;
    }
    case Primitive::soft_cross_entropy: {
      expect_inputs(p, node.inputs.size(), 2);
      const auto& s = in(0);
      const auto& t = in(1);
      if (s.rank() != 2 || s.shape != t.shape)
        dim_error(p, "student " + shape_str(s.shape) + " vs teacher " + shape_str(t.shape));
      const double temp = node.attrs.real("temperature");
      if (!(temp > 0)) throw ContractError("soft-cross-entropy: temperature must be > 0");
      const std::size_t n = s.shape[0], k = s.shape[1];
      const T inv_t = static_cast<T>(1.0 / temp);
      std::vector<T> scaled(s.size());
      for (std::size_t i = 0; i < s.size(); ++i) scaled[i] = s.values[i] * inv_t;
      node.saved.assign(s.size(), T(0));
      if (n > 0) kernels::softmax_rows(scaled.data(), node.saved.data(), n, k);
      node.saved_aux.assign(n, T(0));
      T total = T(0);
      for (std::size_t i = 0; i < n; ++i) {
        const T* row = scaled.data() + i * k;
        T mx = row[0];
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        T z = T(0);
        for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
        const T lse = std::log(z) + mx;
        T row_loss = T(0), tsum = T(0);
        for (std::size_t j = 0; j < k; ++j) {
          const T tv = t.values[i * k + j];
          row_loss += tv * (lse - row[j]);
          tsum += tv;
        }
        node.saved_aux[i] = tsum;
        total += row_loss;
      }
      out = TensorT({1}, {n ? total / static_cast<T>(n) : T(0)});
      return;
    }
    case Primitive::mean: {
      expect_inputs(p, node.inputs.size(), 1);
      const auto& a = in(0);
      if (a.size() == 0) dim_error(p, "mean of empty tensor");
      T s = T(0);
      for (T v : a.values) s += v;
      out = TensorT({1}, {s / static_cast<T>(a.size())});
      return;
    }
    case Primitive::scale: {
      expect_inputs(p, node.inputs.size(), 1);
      const auto& a = in(0);
      const T f = static_cast<T>(node.attrs.real("factor"));
      out = TensorT(a.shape);
      for (std::size_t i = 0; i < a.size(); ++i) out.values[i] = a.values[i] * f;
      return;
    }
    case Primitive::fake_quant: {
      expect_inputs(p, node.inputs.size(), 1);
      const auto& a = in(0);
      const double sc = node.attrs.real("scale");
      const auto zp = node.attrs.integer("zero_point");
      const auto qmin = node.attrs.integer("qmin"), qmax = node.attrs.integer("qmax");
      if (!(sc > 0) || qmin > qmax || zp < qmin || zp > qmax)
        throw ContractError("fake-quant: invalid quantization parameters");
      out = TensorT(a.shape);
      node.saved.assign(a.size(), T(0));
      for (std::size_t i = 0; i < a.size(); ++i) {
        bool in_range = false;
        const auto q = quantize_to_grid(static_cast<double>(a.values[i]), sc, zp, qmin, qmax, &in_range);
        out.values[i] = static_cast<T>(dequantize_from_grid(q, sc, zp));
        node.saved[i] = in_range ? T(1) : T(0);
      }
      return;
    }
  }
  throw UnsupportedPrimitive("unsupported primitive");
}

template <class T>
void BasicGraph<T>::backward(NodeId loss) {
  check_id(loss);
  if (value(loss).size() != 1)
    throw ContractError("backward: loss node must be scalar, got shape " + shape_str(value(loss).shape));

  std::vector<std::vector<T>> grads(nodes_.size());
  grads[loss] = {T(1)};
  for (NodeId id = loss + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (!node.needs_grad || grads[id].empty()) continue;
    if (node.role == Role::op) {
      backward_node(node, grads[id], grads);
      if (id != loss) std::vector<T>().swap(grads[id]);
    }
  }
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    const Node& node = nodes_[id];
    if (node.role != Role::parameter) continue;
    node.param->ensure_grad();
    const auto& g = grads[id];
    for (std::size_t i = 0; i < g.size(); ++i) node.param->grad[i] += g[i];
  }
}

template <class T>
void BasicGraph<T>::backward_node(const Node& node, const std::vector<T>& gy,
                                  std::vector<std::vector<T>>& grads) {
  const Primitive p = node.kind;
  auto in = [&](std::size_t i) -> const TensorT& { return value(node.inputs[i]); };
  // Gradient buffer for input i, or null when that input does not need one.
  auto gin = [&](std::size_t i) -> T* {
    const NodeId id = node.inputs[i];
    if (!nodes_[id].needs_grad) return nullptr;
    auto& g = grads[id];
    if (g.empty()) g.assign(value(id).size(), T(0));
    return g.data();
  };
  const TensorT& y = node.value;

  switch (p) {
    case Primitive::matmul: {
      const auto& a = in(0);
      const auto& b = in(1);
      if (b.rank() == 2) {
        const std::size_t k = b.shape[0], n = b.shape[1], m = a.size() / k;
        if (T* ga = gin(0)) kernels::gemm(gy.data(), b.values.data(), ga, {1, m, n, k, false, true}, true);
        if (T* gb = gin(1)) kernels::gemm(a.values.data(), gy.data(), gb, {1, k, m, n, true, false}, true);
      } else {
        const std::size_t bt = a.shape[0], m = a.shape[1], k = a.shape[2], n = b.shape[2];
        if (T* ga = gin(0)) kernels::gemm(gy.data(), b.values.data(), ga, {bt, m, n, k, false, true}, true);
        if (T* gb = gin(1)) kernels::gemm(a.values.data(), gy.data(), gb, {bt, k, m, n, true, false}, true);
      }
      return;
    }
    case Primitive::add:
    case Primitive::sub:
    case Primitive::mul: {
      const auto& a = in(0);
      const auto& b = in(1);
      const std::size_t inner = b.size(), outer = a.size() / inner;
      if (T* ga = gin(0)) {
        if (p == Primitive::mul) {
          for (std::size_t i = 0; i < a.size(); ++i) ga[i] += gy[i] * b.values[i % inner];
        } else {
          for (std::size_t i = 0; i < a.size(); ++i) ga[i] += gy[i];
        }
      }
      if (T* gb = gin(1)) {
        if (p == Primitive::mul) {
          std::vector<T> prod(a.size());
          for (std::size_t i = 0; i < a.size(); ++i) prod[i] = gy[i] * a.values[i];
          kernels::reduce_outer(prod.data(), gb, outer, inner, T(1));
        } else {
          kernels::reduce_outer(gy.data(), gb, outer, inner, p == Primitive::sub ? T(-1) : T(1));
        }
      }
      return;
    }
    case Primitive::transpose:
    case Primitive::permute: {
      if (T* ga = gin(0)) {
        const auto& axes = node.attrs.ints("axes");
        permute_copy(gy.data(), y.shape, inverse_axes(axes), ga, true);
      }
      return;
    }
    case Primitive::reshape: {
      if (T* ga = gin(0))
        for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
      return;
    }
    case Primitive::gelu: {
      if (T* ga = gin(0)) kernels::gelu_backward(in(0).values.data(), gy.data(), ga, gy.size());
      return;
    }
    case Primitive::tanh: {
      if (T* ga = gin(0))
        for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * (T(1) - y.values[i] * y.values[i]);
      return;
    }
    case Primitive::softmax: {
      if (T* ga = gin(0)) {
        const std::size_t cols = y.shape.back();
        kernels::softmax_rows_backward(y.values.data(), gy.data(), ga, y.size() / cols, cols);
      }
      return;
    }
    case Primitive::layer_norm: {
      const auto& g = in(1);
      const std::size_t cols = y.shape.back(), rows = y.size() / cols;
      kernels::layer_norm_rows_backward(node.saved.data(), node.saved_aux.data(), g.values.data(),
                                        gy.data(), gin(0), gin(1), gin(2), rows, cols);
      return;
    }
    case Primitive::embedding:
    case Primitive::gather_rows: {
      if (T* ga = gin(0)) {
        const std::size_t d = y.shape.back();
        const auto& ids = node.attrs.ints(p == Primitive::embedding ? "ids" : "rows");
        for (std::size_t r = 0; r < ids.size(); ++r) {
          T* dst = ga + static_cast<std::size_t>(ids[r]) * d;
          for (std::size_t j = 0; j < d; ++j) dst[j] += gy[r * d + j];
        }
      }
      return;
    }
    case Primitive::cross_entropy: {
      T* ga = gin(0);
      const std::size_t counted = static_cast<std::size_t>(node.saved_aux[0]);
      if (!ga || counted == 0) return;
      const auto& x = in(0);
      const std::size_t n = x.shape[0], k = x.shape[1];
      const auto& targets = node.attrs.ints("targets");
      const T s = gy[0] / static_cast<T>(counted);
      for (std::size_t i = 0; i < n; ++i) {
        if (targets[i] < 0) continue;
        for (std::size_t j = 0; j < k; ++j) {
          const T onehot = static_cast<std::int64_t>(j) == targets[i] ? T(1) : T(0);
          ga[i * k + j] += s * (node.saved[i * k + j] - onehot);
        }
      }
      return;
    }
    case Primitive::soft_cross_entropy: {
      T* ga = gin(0);
      const auto& st = in(0);
      const std::size_t n = st.shape[0], k = st.shape[1];
      if (!ga || n == 0) return;
      const auto& t = in(1);
      const T s = gy[0] / (static_cast<T>(n) * static_cast<T>(node.attrs.real("temperature")));
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j)
          ga[i * k + j] += s * (node.saved[i * k + j] * node.saved_aux[i] - t.values[i * k + j]);
      return;
    }
    case Primitive::mean: {
      if (T* ga = gin(0)) {
        const std::size_t n = in(0).size();
        const T s = gy[0] / static_cast<T>(n);
        for (std::size_t i = 0; i < n; ++i) ga[i] += s;
      }
      return;
    }
    case Primitive::scale: {
      if (T* ga = gin(0)) {
        const T f = static_cast<T>(node.attrs.real("factor"));
        for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * f;
      }
      return;
    }
    case Primitive::fake_quant: {
      // straight-through inside the representable range, zero where clamped
      if (T* ga = gin(0))
        for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * node.saved[i];
      return;
    }
  }
}

template class BasicGraph<float>;
template class BasicGraph<double>;

}  // namespace pofa
