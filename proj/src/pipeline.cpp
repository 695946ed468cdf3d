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

#include "pofa/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>

#include "pofa/distill.hpp"
#include "pofa/errors.hpp"
#include "pofa/graph.hpp"
#include "pofa/optimizer.hpp"
#include "pofa/pruning.hpp"
#include "pofa/quant.hpp"
#include "pofa/rng.hpp"

namespace pofa {

double RunMetrics::get(std::string_view key) const {
  for (const auto& [k, v] : summary)
    if (k == key) return v;
  throw LookupError("no metric '" + std::string(key) + "'");
}

std::string RunMetrics::csv() const {
  std::string out = "step,lr,target_sparsity,actual_sparsity,loss_pt,loss_kd,loss_total\n";
  char line[256];
  for (const auto& r : steps) {
    std::snprintf(line, sizeof line, "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", static_cast<long long>(r.step), r.lr,
                  r.target_sparsity, r.actual_sparsity, r.loss_pt, r.loss_kd, r.loss_total);
    out += line;
  }
  return out;
}

void RunMetrics::write_csv(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f << csv();
  if (!f) throw IoError("write to '" + path.string() + "' failed");
}

Corpus stage_corpus(const StageConfig& cfg) {
  return build_synthetic_corpus(cfg.data.seed, cfg.data.corpus_sequences, static_cast<std::size_t>(cfg.model.vocab),
                                cfg.data.mlm_seq_len - 2);
}

TaskDataset stage_task(const StageConfig& cfg) {
  return make_task_dataset(cfg.data.seed, cfg.data.task_examples, static_cast<std::size_t>(cfg.model.num_labels),
                           static_cast<std::size_t>(cfg.model.vocab), cfg.data.task_seq_len - 2);
}

namespace {

constexpr std::size_t kEvalChunk = 64;
constexpr std::uint64_t kMlmEvalSeed = 0x5eed;

EvalResult evaluate_range(EncoderModel& model, const std::vector<TaskExample>& ex, std::size_t seq_len,
                          LinearHook<float>* hook) {
  EvalResult r;
  if (ex.empty()) throw DataError("evaluate: no examples");
  std::size_t correct = 0;
  double loss_sum = 0;
  const std::size_t k = static_cast<std::size_t>(model.config().num_labels);
  for (std::size_t first = 0; first < ex.size(); first += kEvalChunk) {
    const std::size_t n = std::min(kEvalChunk, ex.size() - first);
    const TaskBatch b = task_batch_range(ex, first, n, seq_len);
    Graph g;
    const auto out = model.forward_classify(g, b, hook);
    const auto& logits = g.value(out.logits).values;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < k; ++j)
        if (logits[i * k + j] > logits[i * k + best]) best = j;
      correct += static_cast<std::int32_t>(best) == b.labels[i];
    }
    loss_sum += static_cast<double>(g.scalar(out.loss)) * static_cast<double>(n);
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(ex.size());
  r.loss = loss_sum / static_cast<double>(ex.size());
  return r;
}

}  // namespace

EvalResult evaluate_task(EncoderModel& model, const std::vector<TaskExample>& examples, std::size_t seq_len,
                         LinearHook<float>* hook) {
  return evaluate_range(model, examples, seq_len, hook);
}

double evaluate_mlm(EncoderModel& model, const Corpus& corpus, std::size_t seq_len) {
  double sum = 0;
  std::size_t rows = 0;
  for (std::size_t first = 0; first < corpus.validation.size(); first += kEvalChunk) {
    const std::size_t n = std::min(kEvalChunk, corpus.validation.size() - first);
    std::vector<Sequence> seqs(corpus.validation.begin() + static_cast<std::ptrdiff_t>(first),
                               corpus.validation.begin() + static_cast<std::ptrdiff_t>(first + n));
    const MlmBatch b = make_mlm_batch_from(seqs, corpus.vocab_size, mix_seed(kMlmEvalSeed, first), seq_len);
    Graph g;
    const auto out = model.forward_mlm(g, b);
    if (out.degenerate) continue;
    sum += static_cast<double>(g.scalar(out.loss)) * static_cast<double>(out.rows.size());
    rows += out.rows.size();
  }
  if (rows == 0) throw DataError("evaluate_mlm: validation split produced no masked positions");
  return sum / static_cast<double>(rows);
}

namespace {

struct StepLosses {
  NodeId total = 0;
  double pt = 0;
  double kd = 0;
};

using ForwardFn = std::function<StepLosses(Graph&, std::int64_t)>;

enum class MaskPolicy { none, locked, prune };

struct LoopState {
  MaskSet masks;
  double locked_sparsity = 0;
};

bool is_head(const std::string& name, std::string_view prefix) { return name.rfind(prefix, 0) == 0; }

AdamW::Filter mlm_trainable() {
  return [](const std::string& n) { return !is_head(n, "pooler.") && !is_head(n, "classifier."); };
}

AdamW::Filter task_trainable() {
  return [](const std::string& n) { return !is_head(n, "mlm_head."); };
}

RunMetrics train_loop(const StageConfig& cfg, EncoderModel& model, MaskPolicy policy, LoopState& state,
                      const ForwardFn& forward, const AdamW::Filter& trainable) {
  RunMetrics metrics;
  AdamW opt(cfg.adam);
  const LrSchedule sched = cfg.lr_schedule();
  if (policy == MaskPolicy::prune && state.masks.empty()) state.masks = all_ones_masks(model);
  for (std::int64_t t = 0; t < cfg.steps; ++t) {
    double target = state.locked_sparsity;
    if (policy == MaskPolicy::prune) {
      target = target_sparsity(*cfg.pruning, t);
      if (is_pruning_step(*cfg.pruning, t)) state.masks = prune_step(model, state.masks, target);
    }
    const double actual = sparsity_report(model).aggregate;
    const double lr = lr_at(sched, t);

    model.parameters().zero_grad();
    Graph g;
    const StepLosses losses = forward(g, t);
    g.backward(losses.total);

    const bool masked = policy == MaskPolicy::locked || (policy == MaskPolicy::prune && t >= cfg.pruning->end);
    if (masked)
      for (const auto& [name, m] : state.masks) mask_gradient_in_place(model.parameters().at(name), m);
    opt.step(model.parameters(), lr, masked ? &state.masks : nullptr, trainable);

    if (t % cfg.log_every == 0 || t + 1 == cfg.steps)
      metrics.steps.push_back({t, lr, target, actual, losses.pt, losses.kd, static_cast<double>(g.scalar(losses.total))});
  }
  if (policy == MaskPolicy::prune && !state.masks.empty()) apply_masks(model, state.masks);
  return metrics;
}

void check_same_config(const ModelConfig& a, const ModelConfig& b, const std::string& what) {
  if (!(a == b)) throw ConfigError(what + ": model config does not match the stage config");
}

void check_float(const Checkpoint& c, const std::string& what) {
  for (const auto& t : c.tensors)
    if (t.quantized) throw ConfigError(what + ": expected a float checkpoint, '" + t.name + "' is quantized");
}

void add_common_summary(RunMetrics& m, const StageConfig& cfg, const EncoderModel& model) {
  m.summary.emplace_back("lambda_pt", cfg.distill.lambda_pt);
  m.summary.emplace_back("lambda_kd", cfg.distill.lambda_kd);
  m.summary.emplace_back("temperature", cfg.distill.temperature);
  const auto rep = sparsity_report(model);
  m.summary.emplace_back("sparsity", rep.aggregate);
  m.summary.emplace_back("nonzero_prunable", static_cast<double>(rep.nonzero_count));
  if (!m.steps.empty()) {
    m.summary.emplace_back("loss_first", m.steps.front().loss_total);
    m.summary.emplace_back("loss_last", m.steps.back().loss_total);
  }
}

StageResult finish(const StageConfig& cfg, const EncoderModel& model, RunMetrics metrics) {
  StageResult r;
  r.checkpoint = checkpoint_from_model(model, std::string(stage_name(cfg.stage)));
  r.checkpoint.config_hash = cfg.hash();
  r.checkpoint.metrics = metrics.summary;
  r.metrics = std::move(metrics);
  return r;
}

// Teacher logits at the student's masked positions for this batch.
Tensor teacher_mlm_logits(EncoderModel& teacher, const MlmBatch& b) {
  Graph g;
  const auto out = teacher.forward_mlm(g, b);
  return g.value(out.logits);
}

Tensor teacher_task_logits(EncoderModel& teacher, const TaskBatch& b) {
  Graph g;
  const auto out = teacher.forward_classify(g, b);
  return g.value(out.logits);
}

StepLosses mlm_step(Graph& g, EncoderModel& student, EncoderModel* teacher, const MlmBatch& b,
                    const DistillConfig& dc) {
  StepLosses s;
  const auto out = student.forward_mlm(g, b);
  s.pt = static_cast<double>(g.scalar(out.loss));
  if (out.degenerate) {
    s.total = out.loss;
    return s;
  }
  NodeId kd = out.loss;
  if (teacher && dc.lambda_kd != 0.0) {
    kd = kd_loss(g, out.logits, teacher_mlm_logits(*teacher, b), dc.temperature);
    s.kd = static_cast<double>(g.scalar(kd));
  }
  s.total = combined_loss(g, out.loss, kd, dc);
  return s;
}

StepLosses task_step(Graph& g, EncoderModel& student, EncoderModel* teacher, const TaskBatch& b,
                     const DistillConfig& dc, LinearHook<float>* hook = nullptr) {
  StepLosses s;
  const auto out = student.forward_classify(g, b, hook);
  s.pt = static_cast<double>(g.scalar(out.loss));
  NodeId kd = out.loss;
  if (teacher && dc.lambda_kd != 0.0) {
    kd = kd_loss(g, out.logits, teacher_task_logits(*teacher, b), dc.temperature);
    s.kd = static_cast<double>(g.scalar(kd));
  }
  s.total = combined_loss(g, out.loss, kd, dc);
  return s;
}

std::optional<EncoderModel> task_teacher_model(const StageConfig& cfg, const Checkpoint* teacher,
                                               const std::string& what) {
  if (cfg.distill.lambda_kd == 0.0) return std::nullopt;
  if (!teacher) throw ConfigError(what + ": lambda_kd > 0 needs a task teacher checkpoint");
  check_float(*teacher, what + " teacher");
  auto m = model_from_checkpoint(*teacher);
  if (m.config().vocab != cfg.model.vocab || m.config().num_labels != cfg.model.num_labels || !m.config().has_classifier())
    throw ConfigError(what + ": task teacher is incompatible with the stage model");
  return m;
}

void require_stage(const StageConfig& cfg, StageKind want) {
  cfg.validate();
  if (cfg.stage != want)
    throw ConfigError("config is for stage '" + std::string(stage_name(cfg.stage)) + "', expected '" +
                      std::string(stage_name(want)) + "'");
}

}  // namespace

StageResult run_teacher_prep(const StageConfig& cfg) {
  require_stage(cfg, StageKind::teacher_prep);
  const Corpus corpus = stage_corpus(cfg);
  EncoderModel model = EncoderModel::build(cfg.model, cfg.seed);
  LoopState state;
  auto fwd = [&](Graph& g, std::int64_t t) {
    const MlmBatch b = make_mlm_batch(corpus, cfg.seed, static_cast<std::size_t>(t), cfg.batch_size, cfg.data.mlm_seq_len);
    return mlm_step(g, model, nullptr, b, cfg.distill);
  };
  RunMetrics m = train_loop(cfg, model, MaskPolicy::none, state, fwd, mlm_trainable());
  m.summary.emplace_back("eval_mlm_loss", evaluate_mlm(model, corpus, cfg.data.mlm_seq_len));
  add_common_summary(m, cfg, model);
  return finish(cfg, model, std::move(m));
}

StageResult run_student_prune(const StageConfig& cfg, const Checkpoint& teacher_ckpt) {
  require_stage(cfg, StageKind::student_prune);
  check_float(teacher_ckpt, "student-prune");
  check_same_config(teacher_ckpt.model, cfg.model, "student-prune teacher");
  EncoderModel teacher = model_from_checkpoint(teacher_ckpt);
  if (sparsity_report(teacher).aggregate > 0.5) throw ConfigError("student-prune: teacher checkpoint is not dense");
  EncoderModel student = model_from_checkpoint(teacher_ckpt);
  const Corpus corpus = stage_corpus(cfg);
  LoopState state;
  auto fwd = [&](Graph& g, std::int64_t t) {
    const MlmBatch b = make_mlm_batch(corpus, cfg.seed, static_cast<std::size_t>(t), cfg.batch_size, cfg.data.mlm_seq_len);
    return mlm_step(g, student, &teacher, b, cfg.distill);
  };
  RunMetrics m = train_loop(cfg, student, MaskPolicy::prune, state, fwd, mlm_trainable());
  m.summary.emplace_back("eval_mlm_loss", evaluate_mlm(student, corpus, cfg.data.mlm_seq_len));
  m.summary.emplace_back("rewind", cfg.rewind ? 1.0 : 0.0);
  add_common_summary(m, cfg, student);
  return finish(cfg, student, std::move(m));
}

StageResult run_transfer(const StageConfig& cfg, const Checkpoint& start, const Checkpoint* task_teacher) {
  require_stage(cfg, StageKind::transfer);
  check_float(start, "transfer");
  check_same_config(start.model, cfg.model, "transfer input");
  auto teacher = task_teacher_model(cfg, task_teacher, "transfer");
  EncoderModel model = model_from_checkpoint(start);
  const TaskDataset task = stage_task(cfg);
  LoopState state;
  state.masks = lock_pattern(model);
  state.locked_sparsity = sparsity_report(model).aggregate;
  auto fwd = [&](Graph& g, std::int64_t t) {
    const TaskBatch b = make_task_batch(task.train, cfg.seed, static_cast<std::size_t>(t), cfg.batch_size, cfg.data.task_seq_len);
    return task_step(g, model, teacher ? &*teacher : nullptr, b, cfg.distill);
  };
  RunMetrics m = train_loop(cfg, model, MaskPolicy::locked, state, fwd, task_trainable());
  const EvalResult ev = evaluate_task(model, task.validation, cfg.data.task_seq_len);
  m.summary.emplace_back("eval_accuracy", ev.accuracy);
  m.summary.emplace_back("eval_loss", ev.loss);
  add_common_summary(m, cfg, model);
  return finish(cfg, model, std::move(m));
}

StageResult run_qat(const StageConfig& cfg, const Checkpoint& finetuned, const Checkpoint* task_teacher) {
  require_stage(cfg, StageKind::qat);
  check_float(finetuned, "qat");
  check_same_config(finetuned.model, cfg.model, "qat input");
  auto teacher = task_teacher_model(cfg, task_teacher, "qat");
  EncoderModel model = model_from_checkpoint(finetuned);
  const TaskDataset task = stage_task(cfg);
  const EvalResult before = evaluate_task(model, task.validation, cfg.data.task_seq_len);

  LoopState state;
  state.masks = lock_pattern(model);
  state.locked_sparsity = sparsity_report(model).aggregate;
  FakeQuantHook hook(FakeQuantHook::Mode::observe);
  auto fwd = [&](Graph& g, std::int64_t t) {
    const TaskBatch b = make_task_batch(task.train, cfg.seed, static_cast<std::size_t>(t), cfg.batch_size, cfg.data.task_seq_len);
    return task_step(g, model, teacher ? &*teacher : nullptr, b, cfg.distill, &hook);
  };
  RunMetrics m = train_loop(cfg, model, MaskPolicy::locked, state, fwd, task_trainable());

  hook.set_mode(FakeQuantHook::Mode::frozen);
  const EvalResult after = evaluate_task(model, task.validation, cfg.data.task_seq_len, &hook);
  m.summary.emplace_back("float_eval_accuracy", before.accuracy);
  m.summary.emplace_back("float_eval_loss", before.loss);
  m.summary.emplace_back("eval_accuracy", after.accuracy);
  m.summary.emplace_back("eval_loss", after.loss);
  add_common_summary(m, cfg, model);

  StageResult r;
  r.checkpoint = export_int8(model, state.masks, hook, std::string(stage_name(cfg.stage)));
  r.checkpoint.config_hash = cfg.hash();
  r.checkpoint.metrics = m.summary;
  r.metrics = std::move(m);
  return r;
}

StageResult run_finetune_prune_baseline(const StageConfig& cfg, const Checkpoint& dense,
                                        const Checkpoint* task_teacher) {
  require_stage(cfg, StageKind::finetune_prune_baseline);
  check_float(dense, "finetune-prune-baseline");
  check_same_config(dense.model, cfg.model, "finetune-prune-baseline input");
  auto teacher = task_teacher_model(cfg, task_teacher, "finetune-prune-baseline");
  EncoderModel model = model_from_checkpoint(dense);
  if (sparsity_report(model).aggregate > 0.5) throw ConfigError("finetune-prune-baseline: input checkpoint is not dense");
  const TaskDataset task = stage_task(cfg);
  LoopState state;
  auto fwd = [&](Graph& g, std::int64_t t) {
    const TaskBatch b = make_task_batch(task.train, cfg.seed, static_cast<std::size_t>(t), cfg.batch_size, cfg.data.task_seq_len);
    return task_step(g, model, teacher ? &*teacher : nullptr, b, cfg.distill);
  };
  RunMetrics m = train_loop(cfg, model, MaskPolicy::prune, state, fwd, task_trainable());
  const EvalResult ev = evaluate_task(model, task.validation, cfg.data.task_seq_len);
  m.summary.emplace_back("eval_accuracy", ev.accuracy);
  m.summary.emplace_back("eval_loss", ev.loss);
  add_common_summary(m, cfg, model);
  return finish(cfg, model, std::move(m));
}

StageResult run_stage(const StageConfig& cfg, const Checkpoint* input, const Checkpoint* teacher) {
  auto need_input = [&]() -> const Checkpoint& {
    if (!input) throw ConfigError(std::string(stage_name(cfg.stage)) + " needs an input checkpoint");
    return *input;
  };
  switch (cfg.stage) {
    case StageKind::teacher_prep: return run_teacher_prep(cfg);
    case StageKind::student_prune:
      if (!teacher) throw ConfigError("student-prune needs a teacher checkpoint");
      return run_student_prune(cfg, *teacher);
    case StageKind::transfer: return run_transfer(cfg, need_input(), teacher);
    case StageKind::qat: return run_qat(cfg, need_input(), teacher);
    case StageKind::finetune_prune_baseline: return run_finetune_prune_baseline(cfg, need_input(), teacher);
  }
  throw ConfigError("unknown stage");
}

}  // namespace pofa
