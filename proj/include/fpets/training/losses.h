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

#ifndef FPETS_TRAINING_LOSSES_H_
#define FPETS_TRAINING_LOSSES_H_

#include "fpets/numcore/tensor.h"

namespace fpets::train {

// Mean squared difference over every element.
Tensor acoustic_loss(const Tensor& pred, const Tensor& target);
// Mean over the elements of frames whose mask entry is 1. The mask holds one
// 0/1 entry per row.
Tensor acoustic_loss(const Tensor& pred, const Tensor& target, const Tensor& frame_mask);

// gamma when |sum r - t_a| < gamma, else |sum r - t_a|. The in-band branch is
// a constant and carries no gradient.
Tensor alignment_loss(const Tensor& r, double t_a, double gamma);

Tensor total_loss(const Tensor& acoustic, const Tensor& alignment, double weight = 0.02);

}  // namespace fpets::train

#endif  // FPETS_TRAINING_LOSSES_H_
