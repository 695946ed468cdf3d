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

#include "pofa/lr_schedule.hpp"

#include <string>

#include "pofa/errors.hpp"

namespace pofa {

void LrSchedule::validate() const {
  if (!(base_lr > 0)) throw ConfigError("schedule: base_lr must be > 0");
  if (warmup_steps < 0 || warmup_steps > total_steps)
    throw ConfigError("schedule: need 0 <= warmup_steps <= total_steps");
  if (rewind) {
    if (rewind->start > rewind->end || rewind->end > total_steps || rewind->start < 0)
      throw ConfigError("schedule: need 0 <= rewind start <= rewind end <= total_steps");
    if (rewind->interval < 1) throw ConfigError("schedule: rewind interval must be >= 1");
  }
}

double lr_base(const LrSchedule& s, std::int64_t t) {
  if (t < 0 || t > s.total_steps)
    throw ContractError("lr_base: step " + std::to_string(t) + " outside [0, " + std::to_string(s.total_steps) + "]");
  if (t < s.warmup_steps) return s.base_lr * static_cast<double>(t) / static_cast<double>(s.warmup_steps);
  if (s.total_steps == s.warmup_steps) return s.base_lr;
  return s.base_lr * static_cast<double>(s.total_steps - t) / static_cast<double>(s.total_steps - s.warmup_steps);
}

double lr_rewound(const LrSchedule& s, std::int64_t t) {
  if (!s.rewind) throw ContractError("lr_rewound: no rewind window configured");
  const auto& w = *s.rewind;
  if (t < w.start || t > w.end) return lr_base(s, t);
  return lr_base(s, w.start + (t - w.start) % w.interval);
}

double lr_at(const LrSchedule& s, std::int64_t t) { return s.rewind ? lr_rewound(s, t) : lr_base(s, t); }

}  // namespace pofa
