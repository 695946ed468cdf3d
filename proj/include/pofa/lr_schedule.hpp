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

#include <cstdint>
#include <optional>

namespace pofa {

// Learning-rate rewinding window: every `interval` steps inside
// [start, end] the scheduler is reset to its state at `start`.
struct RewindWindow {
  std::int64_t start = 0;
  std::int64_t interval = 1;
  std::int64_t end = 0;
};

// Linear warmup to base_lr over warmup_steps, then linear decay to 0 at
// total_steps. Evaluated at integer steps; lr(t) drives the update at step t.
struct LrSchedule {
  double base_lr = 1e-3;
  std::int64_t warmup_steps = 0;
  std::int64_t total_steps = 100;
  std::optional<RewindWindow> rewind;

  void validate() const;  // throws ConfigError
};

double lr_base(const LrSchedule& sched, std::int64_t t);

// Sawtooth inside the rewind window: lr_base(t_s + (t - t_s) mod f) for
// t_s <= t <= t_e, lr_base(t) elsewhere. Requires a rewind window.
double lr_rewound(const LrSchedule& sched, std::int64_t t);

// lr_rewound when a window is configured, lr_base otherwise.
double lr_at(const LrSchedule& sched, std::int64_t t);

}  // namespace pofa
