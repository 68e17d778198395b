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

#include "fpets/numcore/grad_check.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "fpets/numcore/errors.h"
#include "fpets/numcore/tape.h"

namespace fpets {

namespace {

double eval_loss(const std::function<Tensor()>& loss) {
  NoGradScope no_grad;
  return static_cast<double>(loss().item());
}

std::vector<std::size_t> probe_indices(std::size_t n, std::size_t limit,
                                       std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (limit > 0 && limit < n) {
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(limit);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

}  // namespace

GradCheckReport grad_check_params(const std::function<Tensor()>& loss,
                                  std::vector<Tensor> params,
                                  std::vector<std::string> names,
                                  const GradCheckOptions& options) {
  if (names.size() != params.size()) names.resize(params.size(), "param");
  for (Tensor& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor l = loss();
    tape.backward(l);
  }
  std::vector<std::vector<Real>> analytic;
  for (Tensor& p : params) {
    analytic.emplace_back(p.grad().begin(), p.grad().end());
  }

  GradCheckReport report;
  std::mt19937_64 rng(options.seed);
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = params[t];
    const auto idx = probe_indices(p.numel(), options.max_probes_per_tensor, rng);
    std::vector<double> fd(idx.size());
    double fd_max = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      Real& x = p.values()[idx[k]];
      const Real saved = x;
      x = static_cast<Real>(saved + options.step);
      const double up = eval_loss(loss);
      x = static_cast<Real>(saved - options.step);
      const double down = eval_loss(loss);
      x = saved;
      fd[k] = (up - down) / (2 * options.step);
      fd_max = std::max(fd_max, std::abs(fd[k]));
    }
    const double floor = std::max({1e-10, 1e-3 * fd_max, options.absolute_floor});
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const double a = analytic[t][idx[k]];
      const double denom = std::max({std::abs(a), std::abs(fd[k]), floor});
      const double rel = std::abs(a - fd[k]) / denom;
      ++report.probes;
      if (rel > report.max_relative_error || report.worst.empty()) {
        if (rel >= report.max_relative_error) {
          report.max_relative_error = rel;
          std::ostringstream w;
          w << names[t] << '[' << idx[k] << "] tape=" << a << " fd=" << fd[k];
          report.worst = w.str();
        }
      }
    }
  }
  report.passed = report.max_relative_error <= options.tolerance;
  return report;
}

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f,
                           const Tensor& x, const GradCheckOptions& options) {
  Tensor probe = x.detach();
  return grad_check_params([&] { return f(probe); }, {probe}, {"x"}, options);
}

}  // namespace fpets
