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

#include "pofa/report.hpp"

#include <bit>
#include <fstream>

#include <fmt/format.h>

#include "pofa/errors.hpp"

namespace pofa {

CompressionReport compression_report(const Checkpoint& ckpt) {
  CompressionReport rep;
  for (const auto& name : prunable_parameter_names(ckpt.model)) {
    const TensorRecord& r = ckpt.at(name);
    CompressionRow row;
    row.name = name;
    row.elements = r.size();
    row.dense_bytes = 4 * row.elements;
    if (r.quantized) {
      row.bits = 8;
      row.scale_bytes = 8;
      for (std::size_t i = 0; i < row.elements; ++i) row.nonzero += r.q[i] != r.zero_point;
      if (r.bitmap.empty()) {
        row.payload_bytes = row.elements;
      } else {
        for (auto b : r.bitmap) row.payload_bytes += b;
        row.bitmap_bytes = (row.elements + 7) / 8;
      }
      row.stored_bytes = row.payload_bytes;
    } else {
      for (float v : r.values) row.nonzero += std::bit_cast<std::uint32_t>(v) != 0;
      row.payload_bytes = 4 * row.nonzero;
      if (encoded_storage(r) == Storage::sparse) {
        row.stored_bytes = row.payload_bytes;
        row.bitmap_bytes = (row.elements + 7) / 8;
      } else {
        // at or below half zeros the record is written dense
        row.stored_bytes = row.dense_bytes;
      }
    }
    row.sparsity = row.elements ? 1.0 - static_cast<double>(row.nonzero) / static_cast<double>(row.elements) : 0.0;
    rep.dense_bytes += row.dense_bytes;
    rep.payload_bytes += row.payload_bytes;
    rep.on_disk_bytes += row.stored_bytes + row.bitmap_bytes + row.scale_bytes;
    rep.nonzero_count += row.nonzero;
    rep.rows.push_back(std::move(row));
  }
  if (rep.payload_bytes == 0) throw ContractError("compression_report: encoder weights store no payload");
  rep.parameter_only_ratio = static_cast<double>(rep.dense_bytes) / static_cast<double>(rep.payload_bytes);
  rep.on_disk_ratio = static_cast<double>(rep.dense_bytes) / static_cast<double>(rep.on_disk_bytes);
  return rep;
}

double payload_ratio(const CompressionReport& a, const CompressionReport& b) {
  return static_cast<double>(a.payload_bytes) / static_cast<double>(b.payload_bytes);
}

std::string CompressionReport::table() const {
  std::string out = fmt::format("{:<24} {:>9} {:>11} {:>11} {:>9} {:>8} {:>5}\n", "tensor", "elements", "dense_B",
                                "payload_B", "bitmap_B", "sparsity", "bits");
  for (const auto& r : rows)
    out += fmt::format("{:<24} {:>9} {:>11} {:>11} {:>9} {:>8.4f} {:>5}\n", r.name, r.elements, r.dense_bytes,
                       r.payload_bytes, r.bitmap_bytes, r.sparsity, r.bits);
  out += fmt::format("encoder dense bytes      {}\n", dense_bytes);
  out += fmt::format("payload bytes            {}\n", payload_bytes);
  out += fmt::format("on-disk bytes            {} (values + bitmaps + scales)\n", on_disk_bytes);
  out += fmt::format("non-zero parameters      {}\n", nonzero_count);
  out += fmt::format("parameter-only ratio     {:.4f}x\n", parameter_only_ratio);
  out += fmt::format("on-disk ratio            {:.4f}x\n", on_disk_ratio);
  return out;
}

std::string schedule_csv(const LrSchedule& lr, const SparsitySchedule& sp) {
  lr.validate();
  sp.validate();
  std::string out = "t,lr_base,lr_rewound,target_sparsity\n";
  for (std::int64_t t = 0; t <= lr.total_steps; ++t) {
    const double base = lr_base(lr, t);
    out += fmt::format("{},{:.17g},{:.17g},{:.17g}\n", t, base, lr.rewind ? lr_rewound(lr, t) : base,
                       target_sparsity(sp, t));
  }
  return out;
}

void schedule_export(const LrSchedule& lr, const SparsitySchedule& sp, const std::filesystem::path& path) {
  const std::string csv = schedule_csv(lr, sp);
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f << csv;
  if (!f) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace pofa
