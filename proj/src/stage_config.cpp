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

#include "pofa/stage_config.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "pofa/errors.hpp"
#include "pofa/rng.hpp"

namespace pofa {

namespace {

constexpr std::array<std::pair<StageKind, std::string_view>, 5> kStages{{
    {StageKind::teacher_prep, "teacher-prep"},
    {StageKind::student_prune, "student-prune"},
    {StageKind::transfer, "transfer"},
    {StageKind::qat, "qat"},
    {StageKind::finetune_prune_baseline, "finetune-prune-baseline"},
}};

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string where(const std::string& section, const std::string& key) { return "[" + section + "] " + key; }

template <class T>
T parse_integer(const std::string& section, const std::string& key, const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end) throw ConfigError(where(section, key) + ": expected an integer, got '" + text + "'");
  return v;
}

double parse_real(const std::string& section, const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw ConfigError(where(section, key) + ": expected a number, got '" + text + "'");
  return v;
}

bool parse_bool(const std::string& section, const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(where(section, key) + ": expected true/false, got '" + text + "'");
}

}  // namespace

std::string_view stage_name(StageKind s) {
  for (const auto& [k, n] : kStages)
    if (k == s) return n;
  return "?";
}

StageKind stage_from_name(std::string_view name) {
  for (const auto& [k, n] : kStages)
    if (n == name) return k;
  throw ConfigError("unknown stage '" + std::string(name) + "'");
}

LrSchedule StageConfig::lr_schedule() const {
  LrSchedule s;
  s.base_lr = lr;
  s.warmup_steps = warmup_steps;
  s.total_steps = steps;
  if (rewind && pruning) s.rewind = RewindWindow{pruning->start, pruning->interval, rewind_end < 0 ? pruning->end : rewind_end};
  return s;
}

void StageConfig::validate() const {
  model.validate();
  if (steps < 1) throw ConfigError("[stage] steps must be >= 1");
  if (batch_size < 1) throw ConfigError("[stage] batch_size must be >= 1");
  if (log_every < 1) throw ConfigError("[stage] log_every must be >= 1");
  if (!(adam.weight_decay >= 0)) throw ConfigError("[optimizer] weight_decay must be >= 0");
  distill.validate();
  if (pruning) {
    pruning->validate();
    if (pruning->end >= steps) throw ConfigError("[pruning] end must be < [stage] steps");
  }
  if (rewind && !pruning) throw ConfigError("[schedule] rewind needs [pruning] enabled");
  lr_schedule().validate();
  if (quant_bits != 8) throw ConfigError("[quant] bits: only 8 is supported");
  if (data.mlm_seq_len > static_cast<std::size_t>(model.max_seq) || data.mlm_seq_len < 5)
    throw ConfigError("[data] mlm_seq_len must be in [5, model.max_seq]");
  if (data.task_seq_len > static_cast<std::size_t>(model.max_seq) || data.task_seq_len < 3)
    throw ConfigError("[data] task_seq_len must be in [3, model.max_seq]");
  if (data.corpus_sequences < 1 || data.task_examples < 10) throw ConfigError("[data] dataset sizes too small");

  const bool has_prune = pruning.has_value();
  switch (stage) {
    case StageKind::teacher_prep:
      if (has_prune) throw ConfigError("teacher-prep takes no pruning config");
      if (distill.lambda_kd != 0.0) throw ConfigError("teacher-prep trains on the pre-training loss only (lambda_kd = 0)");
      if (!model.has_mlm_head()) throw ConfigError("teacher-prep needs an MLM head");
      break;
    case StageKind::student_prune:
      if (!has_prune) throw ConfigError("student-prune requires [pruning] enabled = true");
      if (!model.has_mlm_head()) throw ConfigError("student-prune needs an MLM head");
      break;
    case StageKind::transfer:
    case StageKind::qat:
      if (has_prune) throw ConfigError(std::string(stage_name(stage)) + " keeps the sparsity pattern; disable [pruning]");
      if (distill.lambda_kd > 0 && distill.lambda_pt != 0.0)
        throw ConfigError(std::string(stage_name(stage)) +
                          " with distillation ignores ground-truth labels: set lambda_pt = 0");
      if (!model.has_classifier()) throw ConfigError(std::string(stage_name(stage)) + " needs a classifier head");
      break;
    case StageKind::finetune_prune_baseline:
      if (!has_prune) throw ConfigError("finetune-prune-baseline requires [pruning] enabled = true");
      if (!model.has_classifier()) throw ConfigError("finetune-prune-baseline needs a classifier head");
      break;
  }
}

std::string StageConfig::to_text() const {
  std::ostringstream o;
  o << "[stage]\nname = " << stage_name(stage) << "\nsteps = " << steps << "\nbatch_size = " << batch_size
    << "\nseed = " << seed << "\nlog_every = " << log_every << "\n\n";
  o << "[model]\nnum_layers = " << model.num_layers << "\nhidden = " << model.hidden << "\nheads = " << model.heads
    << "\nffn_dim = " << model.ffn_dim << "\nvocab = " << model.vocab << "\nmax_seq = " << model.max_seq
    << "\npooler = " << (model.has_pooler ? "true" : "false") << "\nhead = " << head_kind_name(model.head)
    << "\nnum_labels = " << model.num_labels << "\n\n";
  o << "[optimizer]\ntype = adam\nlr = " << fmt_double(lr) << "\nweight_decay = " << fmt_double(adam.weight_decay)
    << "\n\n";
  o << "[schedule]\nwarmup_steps = " << warmup_steps << "\nrewind = " << (rewind ? "true" : "false")
    << "\nrewind_end = " << rewind_end << "\n\n";
  o << "[distill]\ntemperature = " << fmt_double(distill.temperature) << "\nlambda_pt = " << fmt_double(distill.lambda_pt)
    << "\nlambda_kd = " << fmt_double(distill.lambda_kd) << "\n\n";
  o << "[pruning]\nenabled = " << (pruning ? "true" : "false") << "\n";
  if (pruning) {
    o << "initial_sparsity = " << fmt_double(pruning->initial) << "\nfinal_sparsity = " << fmt_double(pruning->final)
      << "\nstart = " << pruning->start << "\npolicy_end = " << pruning->policy_end << "\nend = " << pruning->end
      << "\ninterval = " << pruning->interval << "\n";
  }
  o << "\n[data]\nseed = " << data.seed << "\ncorpus_sequences = " << data.corpus_sequences
    << "\ntask_examples = " << data.task_examples << "\nmlm_seq_len = " << data.mlm_seq_len
    << "\ntask_seq_len = " << data.task_seq_len << "\n\n";
  o << "[quant]\nbits = " << quant_bits << "\n";
  return o.str();
}

std::uint64_t StageConfig::hash() const { return fnv1a(to_text()); }

StageConfig parse_stage_config(std::string_view text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config syntax: " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }

  // omitted keys take the named stage's defaults
  const auto name = tree.get_optional<std::string>("stage.name");
  if (!name) throw ConfigError("[stage] name is required");
  StageConfig c = default_stage_config(stage_from_name(*name));
  // pruning keys are collected first so `enabled` may appear anywhere
  SparsitySchedule prune = c.pruning.value_or(SparsitySchedule{});
  std::optional<bool> prune_enabled;
  bool prune_keys = false;

  for (const auto& [section, body] : tree) {
    if (body.data().size() && body.empty())
      throw ConfigError("key '" + section + "' outside of any [section]");
    std::set<std::string> seen;
    for (const auto& [key, node] : body) {
      if (!seen.insert(key).second) throw ConfigError(where(section, key) + ": duplicate key");
      const std::string v = node.get_value<std::string>();
      auto i64 = [&] { return parse_integer<std::int64_t>(section, key, v); };
      auto u64 = [&] { return parse_integer<std::uint64_t>(section, key, v); };
      auto i32 = [&] { return parse_integer<int>(section, key, v); };
      auto real = [&] { return parse_real(section, key, v); };
      auto flag = [&] { return parse_bool(section, key, v); };
      auto unknown = [&]() -> void { throw ConfigError("unknown key " + where(section, key)); };

      if (section == "stage") {
        if (key == "name") continue;
        else if (key == "steps") c.steps = i64();
        else if (key == "batch_size") c.batch_size = u64();
        else if (key == "seed") c.seed = u64();
        else if (key == "log_every") c.log_every = i64();
        else unknown();
      } else if (section == "model") {
        if (key == "num_layers") c.model.num_layers = i32();
        else if (key == "hidden") c.model.hidden = i32();
        else if (key == "heads") c.model.heads = i32();
        else if (key == "ffn_dim") c.model.ffn_dim = i32();
        else if (key == "vocab") c.model.vocab = i32();
        else if (key == "max_seq") c.model.max_seq = i32();
        else if (key == "pooler") c.model.has_pooler = flag();
        else if (key == "head") {
          try {
            c.model.head = head_kind_from_name(v);
          } catch (const Error& e) {
            throw ConfigError(where(section, key) + ": " + e.what());
          }
        } else if (key == "num_labels") c.model.num_labels = i32();
        else unknown();
      } else if (section == "optimizer") {
        if (key == "type") {
          if (v != "adam") throw ConfigError(where(section, key) + ": only 'adam' is supported");
        } else if (key == "lr") c.lr = real();
        else if (key == "weight_decay") c.adam.weight_decay = real();
        else unknown();
      } else if (section == "schedule") {
        if (key == "warmup_steps") c.warmup_steps = i64();
        else if (key == "rewind") c.rewind = flag();
        else if (key == "rewind_end") c.rewind_end = i64();
        else unknown();
      } else if (section == "distill") {
        if (key == "temperature") c.distill.temperature = real();
        else if (key == "lambda_pt") c.distill.lambda_pt = real();
        else if (key == "lambda_kd") c.distill.lambda_kd = real();
        else unknown();
      } else if (section == "pruning") {
        if (key == "enabled") prune_enabled = flag();
        else {
          prune_keys = true;
          if (key == "initial_sparsity") prune.initial = real();
          else if (key == "final_sparsity") prune.final = real();
          else if (key == "start") prune.start = i64();
          else if (key == "policy_end") prune.policy_end = i64();
          else if (key == "end") prune.end = i64();
          else if (key == "interval") prune.interval = i64();
          else unknown();
        }
      } else if (section == "data") {
        if (key == "seed") c.data.seed = u64();
        else if (key == "corpus_sequences") c.data.corpus_sequences = u64();
        else if (key == "task_examples") c.data.task_examples = u64();
        else if (key == "mlm_seq_len") c.data.mlm_seq_len = u64();
        else if (key == "task_seq_len") c.data.task_seq_len = u64();
        else unknown();
      } else if (section == "quant") {
        if (key == "bits") c.quant_bits = i32();
        else unknown();
      } else {
        throw ConfigError("unknown section [" + section + "]");
      }
    }
  }
  if (prune_enabled.value_or(prune_keys || c.pruning.has_value()))
    c.pruning = prune;
  else
    c.pruning.reset();
  c.validate();
  return c;
}

StageConfig load_stage_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_stage_config(ss.str());
}

StageConfig default_stage_config(StageKind stage) {
  StageConfig c;
  c.stage = stage;
  switch (stage) {
    case StageKind::teacher_prep:
      c.steps = 2000;
      c.lr = 5e-3;
      c.warmup_steps = 20;
      c.distill = {2.0, 1.0, 0.0};
      break;
    case StageKind::student_prune:
      // published step counts divided by 1000
      c.steps = 100;
      c.lr = 1e-3;
      c.warmup_steps = 0;
      c.rewind = true;
      c.distill = {2.0, 0.5, 0.5};
      c.pruning = SparsitySchedule{0.0, 0.9, 0, 50, 80, 1};
      break;
    case StageKind::transfer:
      c.steps = 600;
      c.lr = 5e-3;
      c.warmup_steps = 6;
      c.distill = {2.0, 0.0, 1.0};
      break;
    case StageKind::qat:
      c.steps = 100;
      c.lr = 2e-4;
      c.warmup_steps = 1;
      c.distill = {2.0, 0.0, 1.0};
      break;
    case StageKind::finetune_prune_baseline:
      // same step ratios as student-prune over the transfer length
      c.steps = 600;
      c.lr = 5e-3;
      c.warmup_steps = 0;
      c.rewind = true;
      c.distill = {2.0, 0.0, 1.0};
      c.pruning = SparsitySchedule{0.0, 0.9, 0, 300, 480, 6};
      break;
  }
  return c;
}

}  // namespace pofa
