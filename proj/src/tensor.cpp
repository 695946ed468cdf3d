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

#include "pofa/tensor.hpp"

#include "pofa/rng.hpp"

namespace pofa {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <class T>
BasicTensor<T> seeded_init(const Shape& shape, InitScheme scheme, std::uint64_t seed) {
  BasicTensor<T> t(shape);
  switch (scheme) {
    case InitScheme::zeros:
      break;
    case InitScheme::ones:
      for (auto& v : t.values) v = T{1};
      break;
    case InitScheme::normal_002: {
      Rng rng(seed);
      for (auto& v : t.values) v = static_cast<T>(0.02 * rng.normal());
      break;
    }
  }
  return t;
}

template BasicTensor<float> seeded_init<float>(const Shape&, InitScheme, std::uint64_t);
template BasicTensor<double> seeded_init<double>(const Shape&, InitScheme, std::uint64_t);

}  // namespace pofa
