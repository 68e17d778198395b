// Copyright 2026 The FPETS Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FPETS_NNMODEL_LAYERS_H_
#define FPETS_NNMODEL_LAYERS_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fpets/numcore/tensor.h"

namespace fpets::nn {

// Owns named parameters in creation order and initializes them from one
// seeded stream.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed) : rng_(seed) {}

  // uniform(-a, a) with a = sqrt(1 / fan_in).
  Tensor uniform(const std::string& name, Shape shape, std::size_t fan_in);
  Tensor zeros(const std::string& name, Shape shape);
  // Registers an existing tensor under a name.
  void add(const std::string& name, Tensor t);

  bool has(const std::string& name) const;
  Tensor& get(const std::string& name);
  const std::vector<std::pair<std::string, Tensor>>& entries() const {
    return entries_;
  }
  std::vector<std::pair<std::string, Tensor>>& entries() { return entries_; }

 private:
  Tensor& insert(const std::string& name, Tensor t);

  std::mt19937_64 rng_;
  std::vector<std::pair<std::string, Tensor>> entries_;
};

struct Dense {
  Dense() = default;
  Dense(ParamStore& store, const std::string& prefix, std::size_t in,
        std::size_t out);
  Tensor forward(const Tensor& x) const;

  Tensor w;
  Tensor b;
};

// Convolution to `filter` channels whose halves feed tanh and sigmoid. The
// gated output has filter/2 channels; a dense projection maps it to `out`
// when the widths differ.
struct GatedConv {
  GatedConv() = default;
  GatedConv(ParamStore& store, const std::string& prefix, std::size_t in,
            std::size_t out, std::size_t kernel, std::size_t filter);
  Tensor forward(const Tensor& x) const;

  Tensor kernel;
  Tensor bias;
  Dense projection;
  bool has_projection = false;
  // Test hook: return the first half of the convolution unchanged.
  bool linear = false;
};

// U-shaped stack: `depth` levels of (gated conv, average pool) going down, a
// bottom gated conv, then `depth` levels of (upsample, gated conv, add the
// matching down-level output). Inputs shorter than 2^depth are zero-padded
// inside the block and cropped afterwards.
class Ufans {
 public:
  Ufans() = default;
  Ufans(ParamStore& store, const std::string& prefix, std::size_t channels,
        std::size_t depth, std::size_t kernel, std::size_t filter);

  Tensor forward(const Tensor& x) const;

  std::size_t depth() const { return down_.size(); }
  std::vector<GatedConv>& down() { return down_; }
  std::vector<GatedConv>& up() { return up_; }
  GatedConv& bottom() { return bottom_; }
  void set_linear(bool on);

 private:
  std::vector<GatedConv> down_;
  GatedConv bottom_;
  std::vector<GatedConv> up_;
};

}  // namespace fpets::nn

#endif  // FPETS_NNMODEL_LAYERS_H_
