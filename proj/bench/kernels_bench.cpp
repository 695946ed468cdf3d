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

// Serial reference kernels against the OpenMP versions.
#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "pofa/kernels.hpp"
#include "pofa/rng.hpp"

namespace {

std::vector<float> random_values(std::size_t n, std::uint64_t seed) {
  pofa::Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

template <bool Parallel>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const pofa::kernels::GemmDims d{1, n, n, n, false, false};
  const auto a = random_values(n * n, 1), b = random_values(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel)
      pofa::kernels::gemm(a.data(), b.data(), c.data(), d, false);
    else
      pofa::kernels::serial::gemm(a.data(), b.data(), c.data(), d, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

template <bool Parallel>
void BM_Softmax(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  constexpr std::size_t cols = 64;
  const auto x = random_values(rows * cols, 3);
  std::vector<float> y(rows * cols);
  for (auto _ : state) {
    if constexpr (Parallel)
      pofa::kernels::softmax_rows(x.data(), y.data(), rows, cols);
    else
      pofa::kernels::serial::softmax_rows(x.data(), y.data(), rows, cols);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_LayerNorm(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  constexpr std::size_t cols = 128;
  const auto x = random_values(rows * cols, 4);
  const std::vector<float> gain(cols, 1.0f), bias(cols, 0.0f);
  std::vector<float> y(rows * cols), xhat(rows * cols), rstd(rows);
  for (auto _ : state) {
    if constexpr (Parallel)
      pofa::kernels::layer_norm_rows(x.data(), gain.data(), bias.data(), y.data(), xhat.data(), rstd.data(), rows,
                                     cols, 1e-5);
    else
      pofa::kernels::serial::layer_norm_rows(x.data(), gain.data(), bias.data(), y.data(), xhat.data(), rstd.data(),
                                             rows, cols, 1e-5);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_Adam(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto w = random_values(n, 5);
  const auto g = random_values(n, 6);
  std::vector<float> m(n), v(n);
  pofa::kernels::AdamHyper hp;
  hp.weight_decay = 0.01;
  for (auto _ : state) {
    if constexpr (Parallel)
      pofa::kernels::adamw_update(w.data(), g.data(), m.data(), v.data(), nullptr, n, hp, true);
    else
      pofa::kernels::serial::adamw_update(w.data(), g.data(), m.data(), v.data(), nullptr, n, hp, true);
    benchmark::DoNotOptimize(w.data());
  }
}

}  // namespace

BENCHMARK(BM_Gemm<false>)->Name("gemm/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_Gemm<true>)->Name("gemm/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_Softmax<false>)->Name("softmax/serial")->Arg(4096);
BENCHMARK(BM_Softmax<true>)->Name("softmax/parallel")->Arg(4096);
BENCHMARK(BM_LayerNorm<false>)->Name("layer_norm/serial")->Arg(4096);
BENCHMARK(BM_LayerNorm<true>)->Name("layer_norm/parallel")->Arg(4096);
BENCHMARK(BM_Adam<false>)->Name("adamw/serial")->Arg(1 << 20);
BENCHMARK(BM_Adam<true>)->Name("adamw/parallel")->Arg(1 << 20);

BENCHMARK_MAIN();
