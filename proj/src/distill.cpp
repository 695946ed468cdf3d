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

#include "pofa/distill.hpp"

#include <cmath>
#include <string>

#include "pofa/errors.hpp"
#include "pofa/kernels.hpp"

namespace pofa {

void DistillConfig::validate() const {
  if (!(temperature > 0)) throw ConfigError("distill: temperature must be > 0");
  if (!(lambda_pt >= 0) || !(lambda_kd >= 0)) throw ConfigError("distill: lambdas must be >= 0");
  if (!(lambda_pt + lambda_kd > 0)) throw ConfigError("distill: lambda_pt + lambda_kd must be > 0");
}

namespace {

void check_temperature(double t) {
  if (!(t > 0)) throw ContractError("temperature must be > 0, got " + std::to_string(t));
}

std::size_t row_width(const Shape& s) {
  if (s.empty()) throw DimensionError("soft_probs: logits must have rank >= 1");
  return s.back();
}

}  // namespace

template <class T>
BasicTensor<T> soft_probs(const BasicTensor<T>& logits, double temperature) {
  check_temperature(temperature);
  const std::size_t k = row_width(logits.shape);
  BasicTensor<T> out(logits.shape);
  if (k == 0 || logits.size() == 0) return out;
  const T inv = static_cast<T>(1.0 / temperature);
  std::vector<T> scaled(logits.size());
  for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] = logits.values[i] * inv;
  kernels::softmax_rows(scaled.data(), out.values.data(), logits.size() / k, k);
  return out;
}

template <class T>
double kd_loss(const BasicTensor<T>& student, const BasicTensor<T>& teacher, double temperature) {
  check_temperature(temperature);
  if (student.shape != teacher.shape)
    throw ContractError("kd_loss: student " + shape_str(student.shape) + " vs teacher " + shape_str(teacher.shape));
  const std::size_t k = row_width(student.shape);
  const std::size_t rows = k ? student.size() / k : 0;
  if (rows == 0) return 0.0;
  const auto t = soft_probs(teacher.template cast<double>(), temperature);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    // log s_j = z_j - lse(z), z = student / T
    double mx = -INFINITY;
    for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, static_cast<double>(student.values[r * k + j]) / temperature);
    double se = 0.0;
    for (std::size_t j = 0; j < k; ++j) se += std::exp(static_cast<double>(student.values[r * k + j]) / temperature - mx);
    const double lse = mx + std::log(se);
    for (std::size_t j = 0; j < k; ++j)
      total -= t.values[r * k + j] * (static_cast<double>(student.values[r * k + j]) / temperature - lse);
  }
  return total / static_cast<double>(rows);
}

template <class T>
NodeId kd_loss(BasicGraph<T>& g, NodeId student, const BasicTensor<T>& teacher, double temperature) {
  check_temperature(temperature);
  if (g.shape(student) != teacher.shape)
    throw ContractError("kd_loss: student " + shape_str(g.shape(student)) + " vs teacher " + shape_str(teacher.shape));
  const NodeId t = g.constant(soft_probs(teacher, temperature));
  return g.apply(Primitive::soft_cross_entropy, {student, t}, {{"temperature", temperature}});
}

double combined_loss(double l_pt, double l_kd, const DistillConfig& cfg) {
  return cfg.lambda_pt * l_pt + cfg.lambda_kd * l_kd;
}

template <class T>
NodeId combined_loss(BasicGraph<T>& g, NodeId l_pt, NodeId l_kd, const DistillConfig& cfg) {
  const bool use_pt = cfg.lambda_pt != 0.0, use_kd = cfg.lambda_kd != 0.0;
  if (!use_pt && !use_kd) throw ContractError("combined_loss: both lambdas are zero");
  const NodeId pt = use_pt ? g.apply(Primitive::scale, {l_pt}, {{"factor", cfg.lambda_pt}}) : 0;
  const NodeId kd = use_kd ? g.apply(Primitive::scale, {l_kd}, {{"factor", cfg.lambda_kd}}) : 0;
  if (use_pt && use_kd) return g.apply(Primitive::add, {pt, kd});
  return use_pt ? pt : kd;
}

#define POFA_DISTILL(T)                                                                        \
  template BasicTensor<T> soft_probs<T>(const BasicTensor<T>&, double);                       \
  template double kd_loss<T>(const BasicTensor<T>&, const BasicTensor<T>&, double);           \
  template NodeId kd_loss<T>(BasicGraph<T>&, NodeId, const BasicTensor<T>&, double);          \
  template NodeId combined_loss<T>(BasicGraph<T>&, NodeId, NodeId, const DistillConfig&);
POFA_DISTILL(float)
POFA_DISTILL(double)
#undef POFA_DISTILL

}  // namespace pofa
