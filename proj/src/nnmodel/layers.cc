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

#include "fpets/nnmodel/layers.h"

#include <cmath>

#include "fpets/numcore/errors.h"
#include "fpets/numcore/ops.h"

namespace fpets::nn {

Tensor& ParamStore::insert(const std::string& name, Tensor t) {
  if (has(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  t.set_requires_grad(true);
  t.set_tag(name);
  entries_.emplace_back(name, t);
  return entries_.back().second;
}

Tensor ParamStore::uniform(const std::string& name, Shape shape,
                           std::size_t fan_in) {
  Tensor t(std::move(shape));
  const double a = std::sqrt(1.0 / static_cast<double>(fan_in));
  for (Real& v : t.values()) {
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    v = static_cast<Real>((2 * u - 1) * a);
  }
  return insert(name, t);
}

Tensor ParamStore::zeros(const std::string& name, Shape shape) {
  return insert(name, Tensor(std::move(shape)));
}

void ParamStore::add(const std::string& name, Tensor t) {
  if (has(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  entries_.emplace_back(name, t);
}

bool ParamStore::has(const std::string& name) const {
  for (const auto& [k, v] : entries_) {
    if (k == name) return true;
  }
  return false;
}

Tensor& ParamStore::get(const std::string& name) {
  for (auto& [k, v] : entries_) {
    if (k == name) return v;
  }
  throw ConfigError("no parameter named '" + name + "'");
}

Dense::Dense(ParamStore& store, const std::string& prefix, std::size_t in,
             std::size_t out)
    : w(store.uniform(prefix + ".w", {in, out}, in)),
      b(store.zeros(prefix + ".b", {out})) {}

Tensor Dense::forward(const Tensor& x) const { return ops::dense(x, w, b); }

GatedConv::GatedConv(ParamStore& store, const std::string& prefix,
                     std::size_t in, std::size_t out, std::size_t k,
                     std::size_t filter)
    : kernel(store.uniform(prefix + ".kernel", {k, in, filter}, k * in)),
      bias(store.zeros(prefix + ".bias", {filter})) {
  if (filter / 2 != out) {
    projection = Dense(store, prefix + ".proj", filter / 2, out);
    has_projection = true;
  }
}

Tensor GatedConv::forward(const Tensor& x) const {
  const Tensor c = ops::conv1d(x, kernel, bias);
  const std::size_t half = c.cols() / 2;
  Tensor y = linear ? ops::slice_cols(c, 0, half)
                    : ops::gated_activation(ops::slice_cols(c, 0, half),
                                            ops::slice_cols(c, half, c.cols()));
  return has_projection ? projection.forward(y) : y;
}

Ufans::Ufans(ParamStore& store, const std::string& prefix,
             std::size_t channels, std::size_t depth, std::size_t kernel,
             std::size_t filter) {
  for (std::size_t d = 0; d < depth; ++d) {
    down_.emplace_back(store, prefix + ".down" + std::to_string(d), channels,
                       channels, kernel, filter);
  }
  bottom_ = GatedConv(store, prefix + ".bottom", channels, channels, kernel, filter);
  for (std::size_t d = 0; d < depth; ++d) {
    up_.emplace_back(store, prefix + ".up" + std::to_string(d), channels,
                     channels, kernel, filter);
  }
}

void Ufans::set_linear(bool on) {
  for (auto& g : down_) g.linear = on;
  for (auto& g : up_) g.linear = on;
  bottom_.linear = on;
}

Tensor Ufans::forward(const Tensor& x) const {
  const std::size_t t = x.rows();
  const std::size_t min_len = std::size_t{1} << down_.size();
  Tensor h = t < min_len ? ops::pad_rows(x, min_len) : x;
  std::vector<Tensor> skips;
  std::vector<std::size_t> lengths;
  for (const GatedConv& g : down_) {
    h = g.forward(h);
    skips.push_back(h);
    lengths.push_back(h.rows());
    h = ops::avg_pool1d(h);
  }
  h = bottom_.forward(h);
  for (std::size_t i = down_.size(); i-- > 0;) {
    h = ops::upsample_nearest(h, lengths[i]);
    h = up_[i].forward(h);
    h = ops::add(h, skips[i]);
  }
  return h.rows() == t ? h : ops::slice_rows(h, 0, t);
}

}  // namespace fpets::nn
