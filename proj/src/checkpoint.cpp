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

#include "pofa/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "pofa/errors.hpp"
#include "pofa/quant_grid.hpp"

namespace pofa {

std::string_view storage_name(Storage s) {
  switch (s) {
    case Storage::dense_f32: return "dense-f32";
    case Storage::sparse: return "sparse";
    case Storage::q8: return "q8";
  }
  return "?";
}

namespace {

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
}

bool nonzero_bits(float v) { return std::bit_cast<std::uint32_t>(v) != 0; }

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void bitmap(const Bitmap& m) {
    std::vector<std::uint8_t> packed((m.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i]) packed[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    out_.insert(out_.end(), packed.begin(), packed.end());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == b_.size(); }

  [[noreturn]] void fail(const std::string& what) const { throw FormatError(what, pos_); }

  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) fail("truncated checkpoint (need " + std::to_string(n) + " more bytes)");
  }
  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[pos_++]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  Bitmap bitmap(std::size_t n) {
    need((n + 7) / 8);
    Bitmap m(n);
    for (std::size_t i = 0; i < n; ++i) m[i] = (b_[pos_ + i / 8] >> (i % 8)) & 1u;
    pos_ += (n + 7) / 8;
    return m;
  }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

constexpr char kMagic[4] = {'P', 'O', 'F', 'A'};
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

void write_config(Writer& w, const ModelConfig& c) {
  for (int v : {c.num_layers, c.hidden, c.heads, c.ffn_dim, c.vocab, c.max_seq, c.has_pooler ? 1 : 0,
                static_cast<int>(c.head), c.num_labels})
    w.i32(v);
}

ModelConfig read_config(Reader& r) {
  ModelConfig c;
  c.num_layers = r.i32();
  c.hidden = r.i32();
  c.heads = r.i32();
  c.ffn_dim = r.i32();
  c.vocab = r.i32();
  c.max_seq = r.i32();
  c.has_pooler = r.i32() != 0;
  const auto head = r.i32();
  if (head < 0 || head > 2) r.fail("bad head kind " + std::to_string(head));
  c.head = static_cast<HeadKind>(head);
  c.num_labels = r.i32();
  return c;
}

void write_record(Writer& w, const TensorRecord& t) {
  const std::size_t n = t.size();
  w.str(t.name);
  w.u32(static_cast<std::uint32_t>(t.shape.size()));
  for (auto d : t.shape) w.u64(d);
  const Storage kind = encoded_storage(t);
  w.u8(static_cast<std::uint8_t>(kind));
  switch (kind) {
    case Storage::dense_f32:
      if (t.values.size() != n) throw ContractError("record '" + t.name + "': value count does not match shape");
      for (float v : t.values) w.f32(v);
      return;
    case Storage::sparse: {
      Bitmap m(n);
      std::uint64_t nnz = 0;
      for (std::size_t i = 0; i < n; ++i) nnz += (m[i] = nonzero_bits(t.values[i]) ? 1 : 0);
      w.bitmap(m);
      w.u64(nnz);
      for (std::size_t i = 0; i < n; ++i)
        if (m[i]) w.f32(t.values[i]);
      return;
    }
    case Storage::q8: {
      if (t.q.size() != n) throw ContractError("record '" + t.name + "': grid size does not match shape");
      w.f32(t.scale);
      w.i32(t.zero_point);
      w.u8(t.bits);
      w.u8(static_cast<std::uint8_t>(t.scheme));
      w.u8(t.bitmap.empty() ? 0 : 1);
      if (t.bitmap.empty()) {
        for (auto q : t.q) w.u8(static_cast<std::uint8_t>(q));
        return;
      }
      if (t.bitmap.size() != n) throw ContractError("record '" + t.name + "': bitmap size does not match shape");
      std::uint64_t count = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (t.bitmap[i]) {
          ++count;
        } else if (t.q[i] != t.zero_point) {
          throw ContractError("record '" + t.name + "': masked entry off the zero point");
        }
      }
      w.bitmap(t.bitmap);
      w.u64(count);
      for (std::size_t i = 0; i < n; ++i)
        if (t.bitmap[i]) w.u8(static_cast<std::uint8_t>(t.q[i]));
      return;
    }
  }
}

TensorRecord read_record(Reader& r) {
  TensorRecord t;
  t.name = r.str();
  const std::uint32_t rank = r.u32();
  if (rank > 8) r.fail("tensor '" + t.name + "': implausible rank " + std::to_string(rank));
  std::uint64_t n = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const std::uint64_t d = r.u64();
    n *= d;
    if (d > kMaxElements || n > kMaxElements) r.fail("tensor '" + t.name + "': implausible shape");
    t.shape.push_back(static_cast<std::size_t>(d));
  }
  const std::size_t kind_at = r.offset();
  const std::uint8_t kind = r.u8();
  switch (kind) {
    case 0:
      r.need(4 * n);
      t.values.resize(n);
      for (auto& v : t.values) v = r.f32();
      break;
    case 1: {
      const Bitmap m = r.bitmap(n);
      const std::uint64_t nnz = r.u64();
      std::uint64_t pop = 0;
      for (auto b : m) pop += b;
      if (pop != nnz) r.fail("tensor '" + t.name + "': bitmap popcount " + std::to_string(pop) +
                             " does not match payload length " + std::to_string(nnz));
      r.need(4 * nnz);
      t.values.assign(n, 0.0f);
      for (std::size_t i = 0; i < n; ++i)
        if (m[i]) t.values[i] = r.f32();
      break;
    }
    case 2: {
      t.quantized = true;
      t.scale = r.f32();
      t.zero_point = r.i32();
      t.bits = r.u8();
      const std::uint8_t scheme = r.u8();
      if (scheme > 1) r.fail("tensor '" + t.name + "': unknown quantization scheme");
      t.scheme = static_cast<QuantScheme>(scheme);
      const std::uint8_t has_bitmap = r.u8();
      if (has_bitmap > 1) r.fail("tensor '" + t.name + "': bad bitmap flag");
      t.q.assign(n, static_cast<std::int8_t>(t.zero_point));
      if (!has_bitmap) {
        r.need(n);
        for (auto& q : t.q) q = static_cast<std::int8_t>(r.u8());
      } else {
        t.bitmap = r.bitmap(n);
        const std::uint64_t count = r.u64();
        std::uint64_t pop = 0;
        for (auto b : t.bitmap) pop += b;
        if (pop != count) r.fail("tensor '" + t.name + "': bitmap popcount does not match payload length");
        r.need(count);
        for (std::size_t i = 0; i < n; ++i)
          if (t.bitmap[i]) t.q[i] = static_cast<std::int8_t>(r.u8());
      }
      break;
    }
    default:
      throw FormatError("tensor '" + t.name + "': unknown storage kind " + std::to_string(kind), kind_at);
  }
  return t;
}

}  // namespace

bool operator==(const TensorRecord& a, const TensorRecord& b) {
  return a.name == b.name && a.shape == b.shape && a.quantized == b.quantized && same_bits(a.values, b.values) &&
         std::bit_cast<std::uint32_t>(a.scale) == std::bit_cast<std::uint32_t>(b.scale) &&
         a.zero_point == b.zero_point && a.bits == b.bits && a.scheme == b.scheme && a.q == b.q &&
         a.bitmap == b.bitmap;
}

TensorRecord float_record(const std::string& name, const Tensor& t) {
  TensorRecord r;
  r.name = name;
  r.shape = t.shape;
  r.values = t.values;
  return r;
}

Storage encoded_storage(const TensorRecord& r) {
  if (r.quantized) return Storage::q8;
  std::size_t zeros = 0;
  for (float v : r.values) zeros += !nonzero_bits(v);
  return 2 * zeros > r.values.size() ? Storage::sparse : Storage::dense_f32;
}

Tensor decode(const TensorRecord& r) {
  if (!r.quantized) return Tensor(r.shape, r.values);
  Tensor out(r.shape);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.values[i] = static_cast<float>(dequantize_from_grid(r.q[i], r.scale, r.zero_point));
  return out;
}

const TensorRecord* Checkpoint::find(std::string_view name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

const TensorRecord& Checkpoint::at(std::string_view name) const {
  if (const auto* t = find(name)) return *t;
  throw LookupError("checkpoint has no tensor '" + std::string(name) + "'");
}

double Checkpoint::metric(std::string_view name) const {
  for (const auto& [k, v] : metrics)
    if (k == name) return v;
  throw LookupError("checkpoint has no metric '" + std::string(name) + "'");
}

void Checkpoint::set_metric(const std::string& name, double value) {
  for (auto& [k, v] : metrics) {
    if (k == name) {
      v = value;
      return;
    }
  }
  metrics.emplace_back(name, value);
}

std::vector<std::uint8_t> serialize(const Checkpoint& c) {
  Writer w;
  for (char ch : kMagic) w.u8(static_cast<std::uint8_t>(ch));
  w.u32(c.version);
  w.str(c.stage);
  write_config(w, c.model);
  w.u64(c.config_hash);
  w.u32(static_cast<std::uint32_t>(c.metrics.size()));
  for (const auto& [k, v] : c.metrics) {
    w.str(k);
    w.f64(v);
  }
  w.u32(static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& t : c.tensors) write_record(w, t);
  return w.take();
}

Checkpoint deserialize(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  Checkpoint c;
  for (char ch : kMagic) {
    if (r.u8() != static_cast<std::uint8_t>(ch)) throw FormatError("bad magic (not a POFA checkpoint)", r.offset() - 1);
  }
  c.version = r.u32();
  if (c.version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(c.version), r.offset() - 4);
  c.stage = r.str();
  c.model = read_config(r);
  c.config_hash = r.u64();
  const std::uint32_t n_metrics = r.u32();
  for (std::uint32_t i = 0; i < n_metrics; ++i) {
    auto k = r.str();
    c.metrics.emplace_back(std::move(k), r.f64());
  }
  const std::uint32_t n_tensors = r.u32();
  for (std::uint32_t i = 0; i < n_tensors; ++i) c.tensors.push_back(read_record(r));
  if (!r.done()) r.fail("trailing bytes after last tensor record");
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  const auto bytes = serialize(c);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write to '" + path.string() + "' failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

Checkpoint checkpoint_from_model(const EncoderModel& model, std::string stage) {
  Checkpoint c;
  c.stage = std::move(stage);
  c.model = model.config();
  for (const auto& [name, t] : model.parameters()) c.tensors.push_back(float_record(name, t));
  return c;
}

EncoderModel model_from_checkpoint(const Checkpoint& c) {
  c.model.validate();
  ParameterStore<float> params;
  for (const auto& [name, shape] : parameter_layout(c.model)) {
    const auto* r = c.find(name);
    if (!r) throw FormatError("checkpoint lacks parameter '" + name + "'", 0);
    if (r->shape != shape)
      throw FormatError("parameter '" + name + "' has shape " + shape_str(r->shape) + ", expected " + shape_str(shape), 0);
    params.add(name, decode(*r));
  }
  return EncoderModel(c.model, std::move(params));
}

}  // namespace pofa
