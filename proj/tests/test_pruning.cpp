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

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "pofa/errors.hpp"
#include "pofa/optimizer.hpp"
#include "pofa/pruning.hpp"
#include "pofa/rng.hpp"

using namespace pofa;

namespace {

ModelConfig tiny() {
  ModelConfig c;
  c.num_layers = 1;
  c.hidden = 16;
  c.heads = 2;
  c.ffn_dim = 20;
  c.vocab = 24;
  c.max_seq = 10;
  return c;
}

std::vector<float> random_weights(std::size_t n, std::uint64_t seed, bool with_ties) {
  Rng r(seed);
  std::vector<float> w(n);
  for (auto& v : w) v = with_ties ? static_cast<float>(static_cast<int>(r.below(21)) - 10) * 0.125f
                                  : static_cast<float>(r.normal());
  return w;
}

}  // namespace

TEST_CASE("target sparsity examples") {
  const SparsitySchedule s{0.0, 0.9, 0, 100, 100, 1};
  CHECK(target_sparsity(s, 0) == 0.0);
  CHECK(target_sparsity(s, 100) == 0.9);
  CHECK(target_sparsity(s, 50) == doctest::Approx(0.7875).epsilon(1e-12));
  CHECK(target_sparsity(s, 1000) == 0.9);
  const SparsitySchedule late{0.1, 0.5, 10, 20, 30, 2};
  CHECK(target_sparsity(late, 3) == 0.1);
}

TEST_CASE("target sparsity is monotone and matches the cubic oracle") {
  Rng r(42);
  for (int k = 0; k < 5; ++k) {
    SparsitySchedule s;
    s.initial = r.uniform() * 0.4;
    s.final = s.initial + 0.01 + r.uniform() * (0.99 - s.initial);
    s.start = static_cast<std::int64_t>(r.below(100));
    s.policy_end = s.start + 1 + static_cast<std::int64_t>(r.below(1000));
    s.end = s.policy_end;
    s.validate();
    double prev = -1;
    for (std::int64_t t = 0; t < s.policy_end + 50; ++t) {
      const double v = target_sparsity(s, t);
      CHECK(v >= prev);
      prev = v;
      const long double ref = oracle::cubic_sparsity(s.initial, s.final, s.start, s.policy_end, t);
      CHECK(std::fabs(static_cast<long double>(v) - ref) < 1e-12L);
    }
    CHECK(target_sparsity(s, s.start) == s.initial);
    CHECK(target_sparsity(s, s.policy_end) == s.final);
  }
}

TEST_CASE("schedule validation and pruning steps") {
  CHECK_THROWS_AS((SparsitySchedule{0.5, 0.5, 0, 10, 10, 1}.validate()), ConfigError);
  CHECK_THROWS_AS((SparsitySchedule{0.0, 0.9, 10, 5, 20, 1}.validate()), ConfigError);
  CHECK_THROWS_AS((SparsitySchedule{0.0, 0.9, 0, 5, 20, 0}.validate()), ConfigError);
  const SparsitySchedule s{0.0, 0.9, 4, 10, 13, 3};
  std::vector<std::int64_t> steps;
  for (std::int64_t t = 0; t < 30; ++t)
    if (is_pruning_step(s, t)) steps.push_back(t);
  CHECK(steps == std::vector<std::int64_t>{4, 7, 10, 13});
}

TEST_CASE("magnitude mask examples") {
  const std::vector<float> w{0.1f, -0.5f, 0.3f, 0.05f};
  CHECK(magnitude_mask(w, 0.5) == Bitmap{0, 1, 1, 0});
  CHECK(magnitude_mask(w, 0.0) == Bitmap{1, 1, 1, 1});
  CHECK(magnitude_mask(w, 1.0) == Bitmap{0, 0, 0, 0});
  const std::vector<float> tie{0.2f, -0.2f, 0.3f};
  CHECK(magnitude_mask(tie, 1.0 / 3.0) == Bitmap{0, 1, 1});
  CHECK_THROWS_AS(magnitude_mask(w, 1.5), ContractError);
  CHECK_THROWS_AS(magnitude_mask(w, -0.1), ContractError);
}

TEST_CASE("prune count uses floor, robust to representation error") {
  CHECK(prune_count(20, 0.85) == 17);
  CHECK(prune_count(1024, 0.9) == 921);
  CHECK(prune_count(10, 0.99) == 9);
  CHECK(prune_count(0, 0.5) == 0);
  for (std::size_t n = 1; n < 2000; n += 37)
    for (double r : {0.1, 0.3, 0.7, 0.85, 0.9}) CHECK(prune_count(n, r) == static_cast<std::size_t>(std::floor(r * double(n) + 1e-9)));
}

TEST_CASE("kept set equals the brute-force sort oracle") {
  Rng r(7);
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = 1 + r.below(10000);
    const double ratio = r.uniform();
    const auto w = random_weights(n, 100 + k, k % 2 == 0);
    CHECK(magnitude_mask(w, ratio) == oracle::brute_force_keep(w, prune_count(n, ratio)));
  }
}

TEST_CASE("prune_step on a model") {
  auto model = EncoderModel::build(tiny(), 3);
  const auto before = model.parameters().at("layer.0.ffn_in.bias").values;
  const auto untouched = model;
  MaskSet ones = all_ones_masks(model);
  CHECK(prune_step(model, ones, 0.0) == ones);
  CHECK(model.parameters().at("layer.0.q.weight").values == untouched.parameters().at("layer.0.q.weight").values);

  const MaskSet m = prune_step(model, ones, 0.85);
  for (const auto& name : model.prunable_parameters()) {
    const auto& t = model.parameters().at(name);
    const auto zeros = static_cast<std::size_t>(std::count(t.values.begin(), t.values.end(), 0.0f));
    CHECK(zeros == prune_count(t.size(), 0.85));
    for (std::size_t i = 0; i < t.size(); ++i) CHECK((m.at(name)[i] == 0) == (t.values[i] == 0.0f));
  }
  CHECK(model.parameters().at("layer.0.ffn_in.bias").values == before);
  CHECK(model.parameters().at("embeddings.token.weight").values ==
        untouched.parameters().at("embeddings.token.weight").values);

  SUBCASE("idempotent at fixed weights and ratio") {
    const auto snapshot = model;
    CHECK(prune_step(model, m, 0.85) == m);
    for (const auto& name : model.prunable_parameters())
      CHECK(model.parameters().at(name).values == snapshot.parameters().at(name).values);
  }
  SUBCASE("contract errors") {
    CHECK_THROWS_AS(prune_step(model, m, 1.2), ContractError);
    CHECK_THROWS_AS(prune_step(model, MaskSet{}, 0.5), LookupError);
  }
}

TEST_CASE("aggregate sparsity after pruning") {
  auto model = EncoderModel::build(tiny(), 3);
  CHECK(sparsity_report(model).aggregate == 0.0);
  prune_step(model, all_ones_masks(model), 0.85);
  const auto rep = sparsity_report(model);
  std::size_t n = 0, k = 0;
  for (const auto& name : model.prunable_parameters()) {
    n += model.parameters().at(name).size();
    k += prune_count(model.parameters().at(name).size(), 0.85);
  }
  CHECK(rep.elements == n);
  CHECK(rep.zeros == k);
  CHECK(std::fabs(rep.aggregate - 0.85) <= 1.0 / double(n) * double(rep.rows.size()));
  CHECK(rep.nonzero_count == n - k);
  for (const auto& row : rep.rows) CHECK(row.name.find("embeddings") == std::string::npos);
  CHECK(rep.table().find("total (prunable)") != std::string::npos);
}

TEST_CASE("apply_masks, lock_pattern, masked_grad examples") {
  auto model = EncoderModel::build(tiny(), 1);
  auto& w = model.parameters().at("pooler.weight");
  const auto original = w.values;
  apply_masks(model, all_ones_masks(model));
  CHECK(w.values == original);

  MaskSet zeros;
  zeros.set("pooler.weight", Bitmap(w.size(), 0));
  apply_masks(model, zeros);
  CHECK(std::all_of(w.values.begin(), w.values.end(), [](float v) { return v == 0.0f; }));
  MaskSet bad;
  bad.set("nope.weight", Bitmap{1});
  CHECK_THROWS_AS(apply_masks(model, bad), LookupError);

  auto& q = model.parameters().at("layer.0.q.weight");
  std::fill(q.values.begin(), q.values.end(), 1.0f);
  q.values[0] = 0.0f;
  const MaskSet locked = lock_pattern(model);
  CHECK(locked.at("layer.0.q.weight")[0] == 0);
  CHECK(locked.at("layer.0.q.weight")[1] == 1);
  CHECK(std::count(locked.at("pooler.weight").begin(), locked.at("pooler.weight").end(), 0) == long(w.size()));

  Tensor g({3}, {1, 2, 3});
  CHECK(masked_grad(g, Bitmap{1, 0, 1}).values == std::vector<float>{1, 0, 3});
  CHECK(masked_grad(g, Bitmap{1, 1, 1}).values == g.values);
  CHECK_THROWS_AS(masked_grad(g, Bitmap{1, 1}), ContractError);
  CHECK_THROWS_AS(MaskSet{}.at("x"), LookupError);
}

TEST_CASE("lock_pattern on explicit tensors") {
  auto model = EncoderModel::build(tiny(), 1);
  auto& w = model.parameters().at("layer.0.v.weight");
  for (std::size_t i = 0; i < w.size(); ++i) w.values[i] = i < prune_count(w.size(), 0.9) ? 0.0f : 1.0f;
  const MaskSet locked = lock_pattern(model);
  const auto& m = locked.at("layer.0.v.weight");
  CHECK(double(std::count(m.begin(), m.end(), 0)) / double(m.size()) == double(prune_count(w.size(), 0.9)) / double(w.size()));
}

TEST_CASE("pattern-lock survives 200 optimizer steps") {
  auto model = EncoderModel::build(tiny(), 5);
  prune_step(model, all_ones_masks(model), 0.9);
  const MaskSet locked = lock_pattern(model);
  for (double lr : {1e-3, 0.1}) {
    for (double wd : {0.0, 0.5}) {
      auto m = model;
      AdamW opt({wd, 0.9, 0.999, 1e-8});
      Rng r(static_cast<std::uint64_t>(lr * 1000 + wd * 10));
      for (int step = 0; step < 200; ++step) {
        for (auto& [name, t] : m.parameters()) {
          t.ensure_grad();
          for (auto& gv : t.grad) gv = static_cast<float>(r.normal());
        }
        for (const auto& [name, mask] : locked) mask_gradient_in_place(m.parameters().at(name), mask);
        opt.step(m.parameters(), lr, &locked);
      }
      CHECK(lock_pattern(m) == locked);
    }
  }
}
