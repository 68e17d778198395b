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

#include "fpets/numcore/optim.h"

#include <cmath>
#include <string>
#include <utility>

#include "fpets/numcore/errors.h"

namespace fpets {

Adam::Adam(std::vector<AdamParam> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const AdamParam& p : params_) {
    m_.emplace_back(p.param.numel(), 0.0);
    v_.emplace_back(p.param.numel(), 0.0);
  }
}

void Adam::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].param.has_grad()) {
      throw UsageError("Adam::step: parameter " + std::to_string(i) + " " +
                       shape_to_string(params_[i].param.shape()) +
                       " has no gradient");
    }
  }
  ++step_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].param;
    const double lr = config_.learning_rate * params_[i].lr_scale;
    auto g = p.grad();
    auto w = p.values();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = static_cast<double>(g[k]);
      m[k] = b1 * m[k] + (1.0 - b1) * gk;
      v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
      const double mh = m[k] / c1;
      const double vh = v[k] / c2;
      w[k] = static_cast<Real>(static_cast<double>(w[k]) -
                               lr * mh / (std::sqrt(vh) + config_.epsilon));
    }
  }
}

void Adam::zero_grad() {
  for (AdamParam& p : params_) p.param.zero_grad();
}

void zero_grads(std::span<Tensor> params) {
  for (Tensor& p : params) p.zero_grad();
}

}  // namespace fpets
