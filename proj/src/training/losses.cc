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

#include "fpets/training/losses.h"

#include <cmath>
#include <string>

#include "fpets/numcore/errors.h"
#include "fpets/numcore/ops.h"

namespace fpets::train {

namespace {

void require_same(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw DimensionError("acoustic_loss: prediction " + shape_to_string(pred.shape()) +
                         " vs target " + shape_to_string(target.shape()));
  }
}

}  // namespace

Tensor acoustic_loss(const Tensor& pred, const Tensor& target) {
  require_same(pred, target);
  return ops::mean(ops::square(ops::sub(pred, target)));
}

Tensor acoustic_loss(const Tensor& pred, const Tensor& target, const Tensor& frame_mask) {
  require_same(pred, target);
  const std::size_t rows = pred.rows(), cols = pred.cols();
  if (frame_mask.numel() != rows) {
    throw DimensionError("acoustic_loss: mask of " + std::to_string(frame_mask.numel()) +
                         " entries for " + std::to_string(rows) + " frames");
  }
  Tensor m(pred.shape());
  std::size_t kept = 0;
  for (std::size_t t = 0; t < rows; ++t) {
    const Real v = frame_mask[t];
    if (v != 0 && v != 1) throw DomainError("acoustic_loss: mask entries must be 0 or 1");
    if (v == 1) ++kept;
    for (std::size_t k = 0; k < cols; ++k) m.at(t, k) = v;
  }
  if (kept == 0) throw DomainError("acoustic_loss: every frame is masked");
  const Tensor sq = ops::mul(ops::square(ops::sub(pred, target)), m);
  return ops::scale(ops::sum(sq), Real(1) / static_cast<Real>(kept * cols));
}

Tensor alignment_loss(const Tensor& r, double t_a, double gamma) {
  if (!(gamma > 0)) throw DomainError("alignment_loss: gamma must be positive");
  const Tensor diff = ops::add_scalar(ops::sum(r), static_cast<Real>(-t_a));
  if (std::abs(diff.item()) < gamma) return Tensor::scalar(static_cast<Real>(gamma));
  return ops::abs(diff);
}

Tensor total_loss(const Tensor& acoustic, const Tensor& alignment, double weight) {
  if (weight == 0) return acoustic;
  return ops::add(acoustic, ops::scale(alignment, static_cast<Real>(weight)));
}

}  // namespace fpets::train
