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

#ifndef FPETS_NUMCORE_GRAD_CHECK_H_
#define FPETS_NUMCORE_GRAD_CHECK_H_

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "fpets/numcore/tensor.h"

namespace fpets {

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  // Upper bound on probed elements per tensor; 0 probes all of them.
  std::size_t max_probes_per_tensor = 0;
  std::uint64_t seed = 0;
  // Lower bound on the denominator, for gradients near finite-difference
  // round-off (about eps * |loss| / step).
  double absolute_floor = 0.0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t probes = 0;
  std::string worst;  // "<tensor>[<index>] tape=<g> fd=<g>"
  bool passed = true;
};

// Compares tape gradients against central differences.
//
// The relative error of one entry is |tape - fd| / max(|tape|, |fd|, floor)
// where floor is 1e-3 of the largest finite-difference magnitude seen for
// that tensor (and at least 1e-10 and absolute_floor), so entries that are numerically zero do
// not dominate the report.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f,
                           const Tensor& x,
                           const GradCheckOptions& options = {});

// Same check over tensors captured by `loss`, perturbed in place.
GradCheckReport grad_check_params(const std::function<Tensor()>& loss,
                                  std::vector<Tensor> params,
                                  std::vector<std::string> names,
                                  const GradCheckOptions& options = {});

}  // namespace fpets

#endif  // FPETS_NUMCORE_GRAD_CHECK_H_
