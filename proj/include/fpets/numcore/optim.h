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

#ifndef FPETS_NUMCORE_OPTIM_H_
#define FPETS_NUMCORE_OPTIM_H_

#include <cstdint>
#include <span>
#include <vector>

#include "fpets/numcore/tensor.h"

namespace fpets {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-4;
};

struct AdamParam {
  Tensor param;
  // Multiplies the global learning rate for this parameter.
  double lr_scale = 1.0;
};

// Adam with bias correction. Moment buffers are kept in double regardless of
// Real so that resumed runs stay bit-identical.
class Adam {
 public:
  Adam(std::vector<AdamParam> params, AdamConfig config);

  // Throws UsageError when a parameter has never received a gradient.
  void step();
  void zero_grad();

  std::int64_t step_count() const { return step_; }
  void set_step_count(std::int64_t t) { step_ = t; }
  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }

  std::size_t size() const { return params_.size(); }
  const Tensor& param(std::size_t i) const { return params_[i].param; }
  std::vector<double>& first_moment(std::size_t i) { return m_[i]; }
  std::vector<double>& second_moment(std::size_t i) { return v_[i]; }
  const std::vector<double>& first_moment(std::size_t i) const { return m_[i]; }
  const std::vector<double>& second_moment(std::size_t i) const { return v_[i]; }

 private:
  std::vector<AdamParam> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  AdamConfig config_;
  std::int64_t step_ = 0;
};

void zero_grads(std::span<Tensor> params);

}  // namespace fpets

#endif  // FPETS_NUMCORE_OPTIM_H_
