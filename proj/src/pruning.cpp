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

#include "pofa/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace pofa {

void SparsitySchedule::validate() const {
  if (!(initial >= 0.0 && initial < final && final <= 1.0))
    throw ConfigError("pruning: need 0 <= initial_sparsity < final_sparsity <= 1");
  if (!(start <= policy_end && policy_end <= end))
    throw ConfigError("pruning: need start <= policy_end <= end");
  if (start < 0) throw ConfigError("pruning: start must be >= 0");
  if (interval < 1) throw ConfigError("pruning: interval must be >= 1");
}

double target_sparsity(const SparsitySchedule& s, std::int64_t t) {
  if (t >= s.policy_end) return s.final;
  if (t <= s.start) return s.initial;
  const double frac = 1.0 - static_cast<double>(t - s.start) / static_cast<double>(s.policy_end - s.start);
  return s.final + (s.initial - s.final) * frac * frac * frac;
}

bool is_pruning_step(const SparsitySchedule& s, std::int64_t t) {
  return t >= s.start && t <= s.end && (t - s.start) % s.interval == 0;
}

void MaskSet::set(const std::string& name, Bitmap mask) {
  for (auto& [n, m] : masks_) {
    if (n == name) {
      m = std::move(mask);
      return;
    }
  }
  masks_.emplace_back(name, std::move(mask));
}

const Bitmap* MaskSet::find(const std::string& name) const {
  for (const auto& [n, m] : masks_)
    if (n == name) return &m;
  return nullptr;
}

const Bitmap& MaskSet::at(const std::string& name) const {
  if (const auto* m = find(name)) return *m;
  throw LookupError("no mask for parameter '" + name + "'");
}

std::vector<std::string> MaskSet::names() const {
  std::vector<std::string> out;
  for (const auto& e : masks_) out.push_back(e.first);
  return out;
}

std::size_t prune_count(std::size_t n, double ratio) {
  if (!(ratio >= 0.0 && ratio <= 1.0))
    throw ContractError("pruning ratio must be in [0, 1], got " + std::to_string(ratio));
  const double exact = ratio * static_cast<double>(n);
  const double nearest = std::round(exact);
  const double k = std::abs(exact - nearest) < 1e-9 ? nearest : std::floor(exact);
  return std::min(n, static_cast<std::size_t>(k));
}

Bitmap magnitude_mask(std::span<const float> w, double ratio) {
  const std::size_t k = prune_count(w.size(), ratio);
  Bitmap mask(w.size(), 1);
  if (k == 0) return mask;
  std::vector<std::size_t> order(w.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto smaller = [&](std::size_t a, std::size_t b) {
    const float ma = std::abs(w[a]), mb = std::abs(w[b]);
    return ma < mb || (ma == mb && a < b);
  };
  std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1), order.end(), smaller);
  for (std::size_t i = 0; i < k; ++i) mask[order[i]] = 0;
  return mask;
}

MaskSet all_ones_masks(const EncoderModel& model) {
  MaskSet out;
  for (const auto& name : model.prunable_parameters())
    out.set(name, Bitmap(model.parameters().at(name).size(), 1));
  return out;
}

namespace {

void check_mask_shape(const std::string& name, const Tensor& t, const Bitmap& m) {
  if (m.size() != t.size())
    throw ContractError("mask for '" + name + "' has " + std::to_string(m.size()) + " entries, tensor has " +
                        std::to_string(t.size()));
}

}  // namespace

MaskSet prune_step(EncoderModel& model, const MaskSet& current, double ratio) {
  if (!(ratio >= 0.0 && ratio <= 1.0))
    throw ContractError("prune_step: ratio must be in [0, 1], got " + std::to_string(ratio));
  MaskSet next;
  for (const auto& name : model.prunable_parameters()) {
    Tensor& w = model.parameters().at(name);
    check_mask_shape(name, w, current.at(name));
    Bitmap m = magnitude_mask(w.values, ratio);
    for (std::size_t i = 0; i < m.size(); ++i)
      if (!m[i]) w.values[i] = 0.0f;
    next.set(name, std::move(m));
  }
  return next;
}

void apply_masks(EncoderModel& model, const MaskSet& masks) {
  for (const auto& [name, m] : masks) {
    Tensor& w = model.parameters().at(name);
    check_mask_shape(name, w, m);
    for (std::size_t i = 0; i < m.size(); ++i)
      if (!m[i]) w.values[i] = 0.0f;
  }
}

MaskSet lock_pattern(const EncoderModel& model) {
  MaskSet out;
  for (const auto& name : model.prunable_parameters()) {
    const Tensor& w = model.parameters().at(name);
    Bitmap m(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) m[i] = w.values[i] != 0.0f ? 1 : 0;
    out.set(name, std::move(m));
  }
  return out;
}

Tensor masked_grad(const Tensor& grad, const Bitmap& mask) {
  if (mask.size() != grad.size())
    throw ContractError("masked_grad: mask has " + std::to_string(mask.size()) + " entries, gradient has " +
                        std::to_string(grad.size()));
  Tensor out(grad.shape);
  for (std::size_t i = 0; i < grad.size(); ++i) out.values[i] = mask[i] ? grad.values[i] : 0.0f;
  return out;
}

void mask_gradient_in_place(Tensor& param, const Bitmap& mask) {
  if (!param.has_grad()) return;
  if (mask.size() != param.grad.size())
    throw ContractError("mask_gradient_in_place: size mismatch");
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (!mask[i]) param.grad[i] = 0.0f;
}

SparsityReport sparsity_report(const EncoderModel& model, const MaskSet& masks) {
  SparsityReport r;
  for (const auto& name : model.prunable_parameters()) {
    const Tensor& w = model.parameters().at(name);
    SparsityRow row;
    row.name = name;
    row.elements = w.size();
    row.zeros = static_cast<std::size_t>(std::count(w.values.begin(), w.values.end(), 0.0f));
    row.sparsity = row.elements ? static_cast<double>(row.zeros) / static_cast<double>(row.elements) : 0.0;
    if (const auto* m = masks.find(name); m && !m->empty())
      row.mask_sparsity = static_cast<double>(std::count(m->begin(), m->end(), std::uint8_t{0})) /
                          static_cast<double>(m->size());
    r.elements += row.elements;
    r.zeros += row.zeros;
    r.rows.push_back(std::move(row));
  }
  r.aggregate = r.elements ? static_cast<double>(r.zeros) / static_cast<double>(r.elements) : 0.0;
  r.nonzero_count = r.elements - r.zeros;
  return r;
}

std::string SparsityReport::table() const {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-28s %10s %10s %9s\n", "tensor", "elements", "zeros", "sparsity");
  out += line;
  for (const auto& row : rows) {
    std::snprintf(line, sizeof line, "%-28s %10zu %10zu %9.4f\n", row.name.c_str(), row.elements, row.zeros,
                  row.sparsity);
    out += line;
  }
  std::snprintf(line, sizeof line, "%-28s %10zu %10zu %9.4f\n", "total (prunable)", elements, zeros, aggregate);
  out += line;
  std::snprintf(line, sizeof line, "non-zero prunable parameters: %zu (biases are not pruned)\n", nonzero_count);
  out += line;
  return out;
}

}  // namespace pofa
