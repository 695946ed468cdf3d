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

#include "pofa/cli.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "pofa/checkpoint.hpp"
#include "pofa/errors.hpp"
#include "pofa/pipeline.hpp"
#include "pofa/report.hpp"
#include "pofa/stage_config.hpp"

namespace pofa {

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
};

void add_common(CLI::App* sub, Common& c, bool out_required) {
  sub->add_option("--seed", c.seed, "Override the stage seed");
  sub->add_option("--config", c.config, "Stage config file (defaults are used when omitted)");
  auto* o = sub->add_option("--out", c.out, "Output path");
  if (out_required) o->required();
}

StageConfig stage_config(const Common& c, StageKind kind) {
  StageConfig cfg = c.config.empty() ? default_stage_config(kind) : load_stage_config(c.config);
  if (cfg.stage != kind)
    throw ConfigError("config '" + c.config + "' is for stage '" + std::string(stage_name(cfg.stage)) + "', expected '" +
                      std::string(stage_name(kind)) + "'");
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

void write_outputs(const StageResult& r, const std::string& out, const std::string& metrics, std::ostream& os) {
  save_checkpoint(r.checkpoint, out);
  const std::string mpath = metrics.empty() ? out + ".metrics.csv" : metrics;
  r.metrics.write_csv(mpath);
  os << fmt::format("wrote {} ({} stage, {} logged steps)\n", out, r.checkpoint.stage, r.metrics.steps.size());
  for (const auto& [k, v] : r.metrics.summary) os << fmt::format("  {:<20} {:.6g}\n", k, v);
  os << fmt::format("metrics: {}\n", mpath);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"pofa: sparse pre-trained encoder pipeline (prune, transfer, quantize)", "pofa"};
  app.require_subcommand(1);

  Common c;
  std::string teacher, input, metrics;
  std::vector<std::string> compare;
  std::string report_path;

  auto* tp = app.add_subcommand("teacher-prep", "Dense MLM teacher preparation");
  add_common(tp, c, true);
  tp->add_option("--metrics", metrics, "Metrics CSV (default <out>.metrics.csv)");

  auto* pr = app.add_subcommand("prune", "Student pruning with GMP, LRR and distillation");
  add_common(pr, c, true);
  pr->add_option("--teacher", teacher, "Dense teacher checkpoint")->required();
  pr->add_option("--metrics", metrics, "Metrics CSV");

  auto* ft = app.add_subcommand("finetune", "Pattern-locked transfer to the classification task");
  add_common(ft, c, true);
  ft->add_option("--in", input, "Sparse (or dense) pre-trained checkpoint")->required();
  ft->add_option("--teacher", teacher, "Dense task teacher checkpoint (needed when lambda_kd > 0)");
  ft->add_option("--metrics", metrics, "Metrics CSV");

  auto* qa = app.add_subcommand("qat", "Quantization-aware training and int8 export");
  add_common(qa, c, true);
  qa->add_option("--in", input, "Fine-tuned checkpoint")->required();
  qa->add_option("--teacher", teacher, "Task teacher checkpoint (needed when lambda_kd > 0)");
  qa->add_option("--metrics", metrics, "Metrics CSV");

  auto* bl = app.add_subcommand("baseline", "Fine-tune pruning baseline");
  add_common(bl, c, true);
  bl->add_option("--in", input, "Dense pre-trained checkpoint")->required();
  bl->add_option("--teacher", teacher, "Task teacher checkpoint (needed when lambda_kd > 0)");
  bl->add_option("--metrics", metrics, "Metrics CSV");

  auto* rp = app.add_subcommand("report", "Compression report of a checkpoint");
  add_common(rp, c, false);
  rp->add_option("checkpoint", report_path, "Checkpoint to report on");
  rp->add_option("--compare", compare, "Payload ratio of checkpoint A to checkpoint B")->expected(2);

  auto* se = app.add_subcommand("schedule-export", "Learning-rate and sparsity schedule as CSV");
  add_common(se, c, true);

  auto* gr = app.add_subcommand("grid", "Small transfer grid (3 learning rates x 2 seeds)");
  add_common(gr, c, false);
  gr->add_option("--in", input, "Pre-trained checkpoint")->required();
  gr->add_option("--teacher", teacher, "Task teacher checkpoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    std::optional<Checkpoint> teacher_ckpt;
    if (!teacher.empty()) teacher_ckpt = load_checkpoint(teacher);
    const Checkpoint* tptr = teacher_ckpt ? &*teacher_ckpt : nullptr;

    if (tp->parsed()) {
      write_outputs(run_teacher_prep(stage_config(c, StageKind::teacher_prep)), c.out, metrics, out);
    } else if (pr->parsed()) {
      write_outputs(run_student_prune(stage_config(c, StageKind::student_prune), *teacher_ckpt), c.out, metrics, out);
    } else if (ft->parsed()) {
      write_outputs(run_transfer(stage_config(c, StageKind::transfer), load_checkpoint(input), tptr), c.out, metrics, out);
    } else if (qa->parsed()) {
      write_outputs(run_qat(stage_config(c, StageKind::qat), load_checkpoint(input), tptr), c.out, metrics, out);
    } else if (bl->parsed()) {
      write_outputs(run_finetune_prune_baseline(stage_config(c, StageKind::finetune_prune_baseline),
                                                load_checkpoint(input), tptr),
                    c.out, metrics, out);
    } else if (rp->parsed()) {
      std::string text;
      if (!compare.empty()) {
        const auto a = compression_report(load_checkpoint(compare[0]));
        const auto b = compression_report(load_checkpoint(compare[1]));
        text = fmt::format("payload A: {} bytes\npayload B: {} bytes\nA / B payload ratio: {:.6g}\n", a.payload_bytes,
                           b.payload_bytes, payload_ratio(a, b));
      } else if (!report_path.empty()) {
        text = compression_report(load_checkpoint(report_path)).table();
      } else {
        err << "error: report needs a checkpoint or --compare A B\n\n" << rp->help();
        return kExitUsage;
      }
      out << text;
      if (!c.out.empty()) {
        std::ofstream f(c.out, std::ios::trunc);
        if (!(f << text)) throw IoError("cannot write '" + c.out + "'");
      }
    } else if (se->parsed()) {
      StageConfig cfg = c.config.empty() ? default_stage_config(StageKind::student_prune) : load_stage_config(c.config);
      if (!cfg.pruning) throw ConfigError("schedule-export needs a config with [pruning] enabled");
      schedule_export(cfg.lr_schedule(), *cfg.pruning, c.out);
      out << fmt::format("wrote {} ({} rows)\n", c.out, cfg.steps + 1);
    } else if (gr->parsed()) {
      const StageConfig base = stage_config(c, StageKind::transfer);
      const Checkpoint start = load_checkpoint(input);
      std::string csv = "lr,seed,eval_accuracy,eval_loss\n";
      double best_lr = 0, best_acc = -1;
      for (double f : {0.5, 1.0, 2.0}) {
        double sum = 0;
        for (std::uint64_t s : {base.seed, base.seed + 1}) {
          StageConfig cfg = base;
          cfg.lr = base.lr * f;
          cfg.seed = s;
          const auto r = run_transfer(cfg, start, tptr);
          const double acc = r.metrics.get("eval_accuracy");
          sum += acc;
          csv += fmt::format("{:.17g},{},{:.17g},{:.17g}\n", cfg.lr, s, acc, r.metrics.get("eval_loss"));
        }
        const double mean = sum / 2;
        out << fmt::format("lr {:.3g}: mean accuracy over 2 seeds {:.4f}\n", base.lr * f, mean);
        if (mean > best_acc) best_acc = mean, best_lr = base.lr * f;
      }
      out << fmt::format("best lr {:.3g} (mean accuracy {:.4f})\n", best_lr, best_acc);
      if (!c.out.empty()) {
        std::ofstream f(c.out, std::ios::trunc);
        if (!(f << csv)) throw IoError("cannot write '" + c.out + "'");
      }
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace pofa
