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

#include "pofa/graph.hpp"
#include "pofa/tensor.hpp"

namespace pofa {

struct DistillConfig {
  double temperature = 2.0;
  double lambda_pt = 0.5;
  double lambda_kd = 0.5;

  void validate() const;  // throws ConfigError
};

// softmax(logits / T) along the last axis. T <= 0 is a contract error.
template <class T>
BasicTensor<T> soft_probs(const BasicTensor<T>& logits, double temperature);

// -sum_i t_i log s_i averaged over rows; t and s are soft_probs at T.
// No T^2 factor. Evaluated without a tape.
template <class T>
double kd_loss(const BasicTensor<T>& student_logits, const BasicTensor<T>& teacher_logits, double temperature);

// Same loss as a tape node. The teacher distribution enters as a constant,
// so nothing flows back into the teacher.
template <class T>
NodeId kd_loss(BasicGraph<T>& g, NodeId student_logits, const BasicTensor<T>& teacher_logits,
               double temperature);

double combined_loss(double l_pt, double l_kd, const DistillConfig& cfg);

// lambda_pt * l_pt + lambda_kd * l_kd; terms with a zero weight are left
// out of the tape.
template <class T>
NodeId combined_loss(BasicGraph<T>& g, NodeId l_pt, NodeId l_kd, const DistillConfig& cfg);

}  // namespace pofa
