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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.
#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pofa/distill.hpp"
#include "pofa/errors.hpp"
#include "pofa/gradcheck.hpp"
#include "pofa/lr_schedule.hpp"
#include "pofa/pipeline.hpp"
#include "pofa/pruning.hpp"
#include "pofa/quant.hpp"
#include "pofa/report.hpp"
#include "pofa/rng.hpp"

using namespace pofa;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const Outcome& o) {
  fmt::print("{} criterion {:>2} {}: {}\n", o.pass ? "PASS" : "FAIL", id, title, o.detail);
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

void run(int id, const std::string& title, const std::function<Outcome()>& f) {
  Outcome o;
  try {
    o = f();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  report(id, title, o);
}

std::uint64_t zero_set_hash(const Checkpoint& ckpt) {
  const auto model = model_from_checkpoint(ckpt);
  std::string bytes;
  for (const auto& [name, m] : lock_pattern(model)) {
    bytes += name;
    bytes.append(m.begin(), m.end());
  }
  return fnv1a(bytes);
}

bool round_trips(const Checkpoint& c) {
  const auto bytes = serialize(c);
  const Checkpoint back = deserialize(bytes);
  return back == c && serialize(back) == bytes;
}

// 1 ------------------------------------------------------------------------
Outcome schedule_fidelity() {
  const auto t0 = Clock::now();
  Rng r(2024);
  double worst = 0;
  bool boundaries = true;
  for (int k = 0; k < 5; ++k) {
    SparsitySchedule s;
    s.initial = r.uniform() * 0.5;
    s.final = s.initial + 0.01 + r.uniform() * (0.99 - s.initial);
    s.start = static_cast<std::int64_t>(r.below(5000));
    s.policy_end = s.start + 1 + static_cast<std::int64_t>(r.below(100000));
    s.end = s.policy_end + static_cast<std::int64_t>(r.below(1000));
    s.interval = 1 + static_cast<std::int64_t>(r.below(10));
    s.validate();
    const std::int64_t horizon = s.end + 1000;
    for (int i = 0; i < 10000; ++i) {
      const auto t = static_cast<std::int64_t>(r.below(static_cast<std::uint64_t>(horizon)));
      const long double ref = oracle::cubic_sparsity(s.initial, s.final, s.start, s.policy_end, t);
      worst = std::max(worst, static_cast<double>(std::fabs(target_sparsity(s, t) - ref)));
    }
    boundaries = boundaries && target_sparsity(s, s.start) == s.initial && target_sparsity(s, s.policy_end) == s.final;
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-9 && boundaries && secs < 1.0,
          fmt::format("max |delta| {:.3g} over 5x10^4 steps, boundaries exact: {}, {:.3f} s", worst, boundaries, secs)};
}

// 2 ------------------------------------------------------------------------
Outcome lrr_semantics() {
  const LrSchedule lr{1.0, 10, 100, RewindWindow{10, 10, 50}};
  lr.validate();
  bool ok = true;
  for (int k = 0; k <= 4; ++k) ok = ok && lr_rewound(lr, 10 + 10 * k) == lr_base(lr, 10);
  for (std::int64_t t = 51; t <= 100; ++t) ok = ok && lr_rewound(lr, t) == lr_base(lr, t);

  // sawtooth shape in the exported CSV: resets to the peak at each window
  // start, strictly decreasing inside a window, base schedule elsewhere
  const std::string csv = schedule_csv(lr, SparsitySchedule{0.0, 0.9, 10, 50, 50, 10});
  std::vector<double> col;
  std::size_t pos = csv.find('\n') + 1;
  while (pos < csv.size()) {
    const std::size_t eol = csv.find('\n', pos);
    long long t;
    double base, rew, sp;
    std::sscanf(csv.c_str() + pos, "%lld,%lf,%lf,%lf", &t, &base, &rew, &sp);
    col.push_back(rew);
    pos = eol + 1;
  }
  bool shape = col.size() == 101;
  for (std::int64_t t = 10; shape && t <= 50; ++t) {
    if ((t - 10) % 10 == 0) shape = col[t] == 1.0 && (t == 10 || col[t] > col[t - 1]);
    else shape = col[t] < col[t - 1];
  }
  for (std::int64_t t = 51; shape && t <= 100; ++t) shape = col[t] == lr_base(lr, t);
  return {ok && shape, fmt::format("exact equalities hold: {}, CSV sawtooth (5 resets to lr_base(10) = 1): {}", ok, shape)};
}

// 3 ------------------------------------------------------------------------
StageConfig tiny_transfer(std::int64_t steps) {
  StageConfig c = default_stage_config(StageKind::transfer);
  c.steps = steps;
  c.model.num_layers = 1;
  c.model.hidden = 16;
  c.model.heads = 2;
  c.model.ffn_dim = 32;
  c.data.task_examples = 400;
  c.distill = {2.0, 1.0, 0.0};
  c.adam.weight_decay = 0.1;
  return c;
}

Outcome pattern_lock() {
  const auto t0 = Clock::now();
  const StageConfig cfg = tiny_transfer(500);
  auto model = EncoderModel::build(cfg.model, 17);
  prune_step(model, all_ones_masks(model), 0.9);
  const Checkpoint start = checkpoint_from_model(model, "student-prune");
  const auto result = run_transfer(cfg, start, nullptr);
  const double secs = seconds_since(t0);
  const auto before = zero_set_hash(start), after = zero_set_hash(result.checkpoint);
  const bool moved = serialize(result.checkpoint) != serialize(start);
  return {before == after && moved && secs < 120.0,
          fmt::format("zero-set hash {:016x} -> {:016x}, weights updated: {}, wd {}, {:.1f} s", before, after, moved,
                      cfg.adam.weight_decay, secs)};
}

// 4 ------------------------------------------------------------------------
Outcome pruning_exactness() {
  Rng r(99);
  int matches = 0;
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = 1 + r.below(10000);
    const double ratio = r.uniform();
    std::vector<float> w(n);
    // every other tensor draws from a coarse grid so ties are common
    for (auto& v : w)
      v = k % 2 ? static_cast<float>(r.normal()) : static_cast<float>(static_cast<int>(r.below(41)) - 20) * 0.05f;
    if (magnitude_mask(w, ratio) == oracle::brute_force_keep(w, prune_count(n, ratio))) ++matches;
  }
  // prune_step on a model applies the same kernel to every prunable tensor
  ModelConfig mc;
  mc.num_layers = 1;
  mc.hidden = 16;
  mc.heads = 2;
  mc.ffn_dim = 24;
  auto model = EncoderModel::build(mc, 4);
  const auto original = model;
  const MaskSet masks = prune_step(model, all_ones_masks(model), 0.73);
  bool model_ok = true;
  for (const auto& name : model.prunable_parameters()) {
    const auto& w = original.parameters().at(name).values;
    model_ok = model_ok && masks.at(name) == oracle::brute_force_keep(w, prune_count(w.size(), 0.73));
  }
  return {matches == 100 && model_ok,
          fmt::format("{}/100 random tensors match the sort oracle, model tensors match: {}", matches, model_ok)};
}

// 5 ------------------------------------------------------------------------
Tensor64 randn64(Shape s, std::uint64_t seed, double scale = 1.0) {
  Rng r(seed);
  Tensor64 t(std::move(s));
  for (auto& v : t.values) v = r.normal() * scale;
  return t;
}

NodeId probe(Graph64& g, NodeId y, std::uint64_t seed) {
  const NodeId c = g.constant(randn64(g.shape(y), seed));
  return g.apply(Primitive::mean, {g.apply(Primitive::mul, {y, c})});
}

double check_all(ParameterStore<double>& ps, const LossBuilder64& build) {
  double worst = 0;
  for (const auto& name : ps.names()) worst = std::max(worst, finite_diff_check(ps, build, name, {1e-5, 0, 0}));
  return worst;
}

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  std::vector<std::pair<std::string, double>> errs;

  auto unary = [&](const std::string& label, Primitive p, Shape shape, Attrs attrs = {}) {
    ParameterStore<double> ps;
    ps.add("x", randn64(shape, errs.size() + 1, 1.5));
    errs.emplace_back(label, check_all(ps, [&](Graph64& g) {
                        return probe(g, g.apply(p, {g.parameter("x", ps.at("x"))}, attrs), 77);
                      }));
  };
  {
    ParameterStore<double> ps;
    ps.add("a", randn64({2, 3, 4}, 1));
    ps.add("b", randn64({2, 4, 5}, 2));
    errs.emplace_back("matmul", check_all(ps, [&](Graph64& g) {
                        return probe(g, g.apply(Primitive::matmul, {g.parameter("a", ps.at("a")), g.parameter("b", ps.at("b"))}), 3);
                      }));
  }
  for (auto [label, p] : {std::pair{"add", Primitive::add}, {"sub", Primitive::sub}, {"mul", Primitive::mul}}) {
    ParameterStore<double> ps;
    ps.add("a", randn64({3, 4}, 4));
    ps.add("b", randn64({4}, 5));
    errs.emplace_back(label, check_all(ps, [&](Graph64& g) {
                        return probe(g, g.apply(p, {g.parameter("a", ps.at("a")), g.parameter("b", ps.at("b"))}), 6);
                      }));
  }
  unary("transpose", Primitive::transpose, {3, 4});
  unary("permute", Primitive::permute, {2, 3, 4}, {{"axes", std::vector<std::int64_t>{2, 0, 1}}});
  unary("reshape", Primitive::reshape, {2, 6}, {{"shape", std::vector<std::int64_t>{3, 4}}});
  unary("gelu", Primitive::gelu, {4, 5});
  unary("tanh", Primitive::tanh, {4, 5});
  unary("softmax-last-axis", Primitive::softmax, {4, 6});
  unary("scale", Primitive::scale, {4}, {{"factor", 0.3}});
  unary("mean", Primitive::mean, {7});
  unary("gather_rows", Primitive::gather_rows, {5, 3}, {{"rows", std::vector<std::int64_t>{4, 1, 4}}});
  unary("embedding", Primitive::embedding, {6, 3}, {{"ids", std::vector<std::int64_t>{5, 0, 5, 2}}});
  unary("cross_entropy", Primitive::cross_entropy, {5, 4}, {{"targets", std::vector<std::int64_t>{0, -1, 3, 2, 1}}});
  {
    ParameterStore<double> ps;
    ps.add("x", randn64({4, 5}, 8));
    ps.add("gain", randn64({5}, 9));
    ps.add("bias", randn64({5}, 10));
    errs.emplace_back("layer_norm", check_all(ps, [&](Graph64& g) {
                        return probe(g, g.apply(Primitive::layer_norm, {g.parameter("x", ps.at("x")), g.parameter("gain", ps.at("gain")),
                                                                        g.parameter("bias", ps.at("bias"))}),
                                     11);
                      }));
  }
  {
    ParameterStore<double> ps;
    ps.add("s", randn64({3, 4}, 12));
    Graph64 tg;
    const auto teacher = tg.value(tg.apply(Primitive::softmax, {tg.constant(randn64({3, 4}, 13))}));
    errs.emplace_back("soft_cross_entropy", check_all(ps, [&](Graph64& g) {
                        return g.apply(Primitive::soft_cross_entropy, {g.parameter("s", ps.at("s")), g.constant(teacher)},
                                       {{"temperature", 2.0}});
                      }));
  }
  // fake_quant's backward is the straight-through estimator, not the
  // derivative of its (piecewise constant) forward, so it is checked against
  // the STE definition itself: upstream gradient inside the range, 0 outside.
  bool ste_ok = true;
  {
    Graph64 g;
    Tensor64 x = randn64({200}, 14, 2.0);
    const NodeId p = g.parameter("x", x);
    const NodeId q = g.apply(Primitive::fake_quant, {p},
                             {{"scale", 0.01}, {"zero_point", std::int64_t{0}}, {"qmin", std::int64_t{-127}},
                              {"qmax", std::int64_t{127}}});
    g.backward(g.apply(Primitive::mean, {q}));
    for (std::size_t i = 0; i < x.size(); ++i) {
      const bool in = std::nearbyint(x.values[i] / 0.01) >= -127 && std::nearbyint(x.values[i] / 0.01) <= 127;
      ste_ok = ste_ok && x.grad[i] == (in ? 1.0 / 200.0 : 0.0);
    }
  }

  // Full combined loss on a 2-layer hidden-32 model.
  ModelConfig mc;  // 2 layers, hidden 32, 4 heads, ffn 64, vocab 64
  mc.max_seq = 16;
  auto student = EncoderModel::build(mc, 21).cast<double>();
  Rng r(22);
  for (auto& [name, t] : student.parameters())
    for (auto& v : t.values) v += 0.2 * r.normal();
  auto teacher = EncoderModel::build(mc, 23).cast<double>();
  for (auto& [name, t] : teacher.parameters())
    for (auto& v : t.values) v += 0.2 * r.normal();
  const Corpus corpus = build_synthetic_corpus(5, 20, 64, 14);
  const MlmBatch batch = make_mlm_batch_from({corpus.train[0], corpus.train[1]}, 64, 3, 12, {0.0, 0.3, 0.8, 0.1});
  Graph64 tg;
  const auto t_logits = tg.value(teacher.forward_mlm(tg, batch).logits);
  const DistillConfig dc{2.0, 0.5, 0.5};
  auto build = [&](Graph64& g) {
    const auto out = student.forward_mlm(g, batch);
    return combined_loss(g, out.loss, kd_loss(g, out.logits, t_logits, dc.temperature), dc);
  };
  double model_err = 0;
  for (const auto& name : student.parameters().names()) {
    if (name.rfind("pooler", 0) == 0 || name.rfind("classifier", 0) == 0) continue;  // not on the MLM path
    model_err = std::max(model_err, finite_diff_check(student.parameters(), build, name, {1e-5, 0, 0}));
  }

  double prim_err = 0;
  std::string worst = "";
  for (const auto& [label, e] : errs)
    if (e >= prim_err) {
      prim_err = e;
      worst = label;
    }
  const double secs = seconds_since(t0);
  return {prim_err < 1e-3 && model_err < 1e-3 && ste_ok && secs < 300.0,
          fmt::format("{} primitives max rel err {:.2e} ({}), fake_quant STE exact: {}, combined loss on 2x32 model "
                      "max rel err {:.2e}, {:.1f} s",
                      errs.size(), prim_err, worst, ste_ok, model_err, secs)};
}

// 6 ------------------------------------------------------------------------
Outcome kd_identities() {
  Rng r(6);
  double self_err = 0, shift_err = 0;
  for (int k = 0; k < 50; ++k) {
    Tensor s({3, 6}), t({3, 6});
    for (auto& v : s.values) v = static_cast<float>(2 * r.normal());
    for (auto& v : t.values) v = static_cast<float>(2 * r.normal());
    const double temp = 0.5 + 3 * r.uniform();
    long double h = 0;
    for (std::size_t row = 0; row < 3; ++row) {
      std::vector<long double> z;
      for (std::size_t j = 0; j < 6; ++j) z.push_back(s.values[row * 6 + j] / static_cast<long double>(temp));
      h += oracle::entropy(oracle::softmax(z));
    }
    self_err = std::max(self_err, std::fabs(kd_loss(s, s, temp) - static_cast<double>(h / 3)));
    Tensor shifted = s;
    for (auto& v : shifted.values) v += 4.0f;
    shift_err = std::max(shift_err, std::fabs(kd_loss(shifted, t, temp) - kd_loss(s, t, temp)));
    shifted = t;
    for (auto& v : shifted.values) v -= 3.0f;
    shift_err = std::max(shift_err, std::fabs(kd_loss(s, shifted, temp) - kd_loss(s, t, temp)));
  }
  const Tensor u({1, 4}, 0.0f);
  const double ln4_err = std::fabs(kd_loss(u, u, 1.0) - std::log(4.0));
  return {self_err < 1e-6 && ln4_err < 1e-6 && shift_err < 1e-6,
          fmt::format("self-KD vs entropy {:.2e}, uniform K=4 vs ln 4 {:.2e}, shift {:.2e}", self_err, ln4_err, shift_err)};
}

// 7 ------------------------------------------------------------------------
Outcome quant_bounds() {
  Rng r(7);
  double worst_ratio = 0;
  bool idempotent = true, zero_exact = true;
  std::size_t count = 0;
  for (int k = 0; k < 20; ++k) {
    const bool asym = k % 2 == 1;
    const float lo = -static_cast<float>(0.1 + 3 * r.uniform()), hi = static_cast<float>(0.1 + 3 * r.uniform());
    const QuantParams qp = asym ? activation_qparams({lo, hi, true}) : weight_qparams(std::vector<float>{lo, hi});
    const double a = static_cast<double>(qp.qmin() - qp.zero_point) * qp.scale;
    const double b = static_cast<double>(qp.qmax() - qp.zero_point) * qp.scale;
    Tensor x({5000});
    for (auto& v : x.values) v = static_cast<float>(a + (b - a) * r.uniform());
    count += x.size();
    const Tensor y = fake_quant(x, qp);
    for (std::size_t i = 0; i < x.size(); ++i)
      worst_ratio = std::max(worst_ratio, std::fabs(double(x.values[i]) - double(y.values[i])) / qp.scale);
    idempotent = idempotent && fake_quant(y, qp).values == y.values;
    if (asym) zero_exact = zero_exact && fake_quant(Tensor({1}, {0.0f}), qp).values[0] == 0.0f;
  }
  return {count == 100000 && worst_ratio <= 0.5 && idempotent && zero_exact,
          fmt::format("{} values, max |x - fq(x)| / scale = {:.6f}, idempotent: {}, zero exact: {}", count, worst_ratio,
                      idempotent, zero_exact)};
}

// 8 ------------------------------------------------------------------------
Outcome compression_arithmetic() {
  // 20 | n for every prunable tensor so 85% and 90% are exact per tensor
  ModelConfig mc;
  mc.num_layers = 2;
  mc.hidden = 20;
  mc.heads = 4;
  mc.ffn_dim = 40;
  auto sparse = [&](double s) {
    auto m = EncoderModel::build(mc, 8);
    prune_step(m, all_ones_masks(m), s);
    return m;
  };
  auto int8 = [&](double s) {
    auto m = sparse(s);
    FakeQuantHook hook;
    Graph g;
    m.forward_classify(g, task_batch_range({{{5, 6, 7, 8}, 0}}, 0, 1, 8), &hook);
    hook.set_mode(FakeQuantHook::Mode::frozen);
    return export_int8(m, lock_pattern(m), hook, "qat");
  };
  const auto r90q = compression_report(deserialize(serialize(int8(0.9))));
  const auto r85q = compression_report(int8(0.85));
  const auto r90f = compression_report(checkpoint_from_model(sparse(0.9), "student-prune"));
  const double ratio = payload_ratio(r85q, r90f);
  return {r90q.parameter_only_ratio == 40.0 && ratio == 0.375,
          fmt::format("parameter_only_ratio {} (on-disk {:.3f}), 85%/8-bit vs 90%/f32 payload {}",
                      r90q.parameter_only_ratio, r90q.on_disk_ratio, ratio)};
}

// 9 / 10 / 11 ---------------------------------------------------------------
struct Pipeline {
  StageResult teacher, student, task_teacher, transfer, qat;
  double seconds = 0;
};

StageConfig seeded(StageKind k, std::uint64_t seed) {
  StageConfig c = default_stage_config(k);
  c.seed = seed;
  return c;
}

StageConfig task_teacher_config() {
  StageConfig c = default_stage_config(StageKind::transfer);
  c.distill = {2.0, 1.0, 0.0};
  return c;
}

Pipeline run_pipeline() {
  Pipeline p;
  const auto t0 = Clock::now();
  p.teacher = run_teacher_prep(default_stage_config(StageKind::teacher_prep));
  p.student = run_student_prune(default_stage_config(StageKind::student_prune), p.teacher.checkpoint);
  p.task_teacher = run_transfer(task_teacher_config(), p.teacher.checkpoint, nullptr);
  p.transfer = run_transfer(default_stage_config(StageKind::transfer), p.student.checkpoint, &p.task_teacher.checkpoint);
  p.qat = run_qat(default_stage_config(StageKind::qat), p.transfer.checkpoint, &p.task_teacher.checkpoint);
  p.seconds = seconds_since(t0);
  return p;
}

Outcome end_to_end(const Pipeline& p) {
  // float checkpoints: count zeros; the int8 export: count bitmap zeros,
  // since a kept weight below scale / 2 may still quantize to 0
  bool exact = true;
  std::size_t kept_at_zero = 0;
  for (const Checkpoint* c : {&p.student.checkpoint, &p.transfer.checkpoint, &p.qat.checkpoint}) {
    for (const auto& name : prunable_parameter_names(c->model)) {
      const TensorRecord& rec = c->at(name);
      const auto k = static_cast<std::size_t>(std::floor(0.9 * static_cast<double>(rec.size())));
      std::size_t zeros = 0;
      if (rec.quantized) {
        zeros = static_cast<std::size_t>(std::count(rec.bitmap.begin(), rec.bitmap.end(), std::uint8_t{0}));
        for (std::size_t i = 0; i < rec.size(); ++i) kept_at_zero += rec.bitmap[i] && rec.q[i] == rec.zero_point;
      } else {
        zeros = static_cast<std::size_t>(std::count(rec.values.begin(), rec.values.end(), 0.0f));
      }
      exact = exact && zeros == k;
    }
  }
  const bool rt = round_trips(p.teacher.checkpoint) && round_trips(p.student.checkpoint) &&
                  round_trips(p.task_teacher.checkpoint) && round_trips(p.transfer.checkpoint) &&
                  round_trips(p.qat.checkpoint);
  const auto cr = compression_report(p.qat.checkpoint);
  return {exact && rt && p.seconds < 600.0,
          fmt::format("4 stages (+ dense task teacher) in {:.1f} s; per-tensor sparsity floor(0.9 n)/n: {} "
                      "({} kept int8 weights sit at 0); "
                      "round trips bit-exact: {}; teacher mlm loss {:.3f}, student {:.3f}, transfer acc {:.4f}, "
                      "qat acc {:.4f} (float {:.4f}), compression {:.2f}x param-only / {:.2f}x on disk",
                      p.seconds, exact, kept_at_zero, rt, p.teacher.metrics.get("eval_mlm_loss"),
                      p.student.metrics.get("eval_mlm_loss"), p.transfer.metrics.get("eval_accuracy"),
                      p.qat.metrics.get("eval_accuracy"), p.qat.metrics.get("float_eval_accuracy"),
                      cr.parameter_only_ratio, cr.on_disk_ratio)};
}

Outcome ablation(const Pipeline& p) {
  const auto t0 = Clock::now();
  StageConfig no_kd = default_stage_config(StageKind::transfer);
  no_kd.distill = {2.0, 1.0, 0.0};
  double kd_sum = 0, nokd_sum = 0, lrr_sum = 0, nolrr_sum = 0;
  std::string per_seed;
  for (std::uint64_t seed : {1, 2}) {
    auto sp = seeded(StageKind::student_prune, seed);
    const auto with_lrr = run_student_prune(sp, p.teacher.checkpoint);
    sp.rewind = false;
    const auto without_lrr = run_student_prune(sp, p.teacher.checkpoint);
    auto tr = seeded(StageKind::transfer, seed);
    no_kd.seed = seed;
    const double kd = run_transfer(tr, with_lrr.checkpoint, &p.task_teacher.checkpoint).metrics.get("eval_accuracy");
    const double nokd = run_transfer(no_kd, with_lrr.checkpoint, nullptr).metrics.get("eval_accuracy");
    const double nolrr = run_transfer(tr, without_lrr.checkpoint, &p.task_teacher.checkpoint).metrics.get("eval_accuracy");
    kd_sum += kd;
    nokd_sum += nokd;
    lrr_sum += kd;
    nolrr_sum += nolrr;
    per_seed += fmt::format(" [seed {}: lrr+kd {:.4f}, lrr+no-kd {:.4f}, no-lrr+kd {:.4f}]", seed, kd, nokd, nolrr);
  }
  const double kd = kd_sum / 2, nokd = nokd_sum / 2, lrr = lrr_sum / 2, nolrr = nolrr_sum / 2;
  constexpr double kTie = 0.005;  // 0.5 accuracy points
  auto verdict = [&](double a, double b) {
    if (std::fabs(a - b) < kTie) return std::string("tie within 0.5 points (flagged)");
    return a > b ? std::string("holds") : std::string("reversed");
  };
  const bool a_ok = kd >= nokd - kTie, b_ok = lrr >= nolrr - kTie;
  return {a_ok && b_ok,
          fmt::format("(a) KD {:.4f} vs no-KD {:.4f}: {}; (b) LRR {:.4f} vs no-LRR {:.4f}: {};{} {:.1f} s", kd, nokd,
                      verdict(kd, nokd), lrr, nolrr, verdict(lrr, nolrr), per_seed, seconds_since(t0))};
}

Outcome determinism(const Pipeline& p) {
  const auto t0 = Clock::now();
  const Pipeline q = run_pipeline();
  auto same = [](const StageResult& a, const StageResult& b) {
    return serialize(a.checkpoint) == serialize(b.checkpoint) && a.metrics.csv() == b.metrics.csv();
  };
  const auto base_cfg = default_stage_config(StageKind::finetune_prune_baseline);
  const auto b1 = run_finetune_prune_baseline(base_cfg, p.teacher.checkpoint, &p.task_teacher.checkpoint);
  const auto b2 = run_finetune_prune_baseline(base_cfg, p.teacher.checkpoint, &p.task_teacher.checkpoint);
  const bool ok = same(p.teacher, q.teacher) && same(p.student, q.student) && same(p.task_teacher, q.task_teacher) &&
                  same(p.transfer, q.transfer) && same(p.qat, q.qat) && same(b1, b2);
  return {ok, fmt::format("teacher-prep, student-prune, transfer (both), qat and baseline re-runs bit-identical: {} "
                          "(baseline acc {:.4f}, {:.1f} s)",
                          ok, b1.metrics.get("eval_accuracy"), seconds_since(t0))};
}

}  // namespace

int main() {
  run(1, "schedule fidelity", schedule_fidelity);
  run(2, "LRR semantics", lrr_semantics);
  run(3, "pattern-lock", pattern_lock);
  run(4, "magnitude-pruning exactness", pruning_exactness);
  run(5, "gradient correctness", gradient_correctness);
  run(6, "KD identities", kd_identities);
  run(7, "quantization bounds", quant_bounds);
  run(8, "compression arithmetic", compression_arithmetic);

  Pipeline p;
  bool have_pipeline = false;
  run(9, "end-to-end pipeline", [&] {
    p = run_pipeline();
    have_pipeline = true;
    return end_to_end(p);
  });
  if (have_pipeline) {
    run(10, "ablation direction", [&] { return ablation(p); });
    run(11, "determinism", [&] { return determinism(p); });
  } else {
    report(10, "ablation direction", {false, "pipeline did not run"});
    report(11, "determinism", {false, "pipeline did not run"});
  }
  fmt::print("{} of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
