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

#include "pofa/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pofa/rng.hpp"

namespace pofa {

double finite_diff_check(ParameterStore<double>& params, const LossBuilder64& build,
                         std::string_view param, const GradCheckOptions& options) {
  if (!(options.eps > 0)) throw ContractError("finite_diff_check: eps must be > 0");
  Tensor64& w = params.at(param);

  params.zero_grad();
  {
    Graph64 g;
    const NodeId loss = build(g);
    g.backward(loss);
  }
  w.ensure_grad();
  const std::vector<double> analytic = w.grad;

  std::vector<std::size_t> idx(w.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (options.max_elements != 0 && options.max_elements < idx.size()) {
    Rng rng(options.seed);
    for (std::size_t i = 0; i < options.max_elements; ++i)
      std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
    idx.resize(options.max_elements);
  }

  auto eval = [&] {
    Graph64 g;
    const NodeId loss = build(g);
    return g.scalar(loss);
  };

  double worst = 0.0;
  for (std::size_t i : idx) {
    const double saved = w.values[i];
    w.values[i] = saved + options.eps;
    const double up = eval();
    w.values[i] = saved - options.eps;
    const double down = eval();
    w.values[i] = saved;
    const double numeric = (up - down) / (2.0 * options.eps);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), options.floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  params.zero_grad();
  return worst;
}

}  // namespace pofa
