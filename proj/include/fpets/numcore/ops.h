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

// Differentiable primitives. Sequences are laid out time-major: a feature map
// is a [T x C] matrix with one row per frame.
//
// Every op records a backward rule on the current tape when any input
// requires a gradient. Inner products accumulate in index order starting from
// zero with the bias added last, so naive loops written the same way
// reproduce results bit for bit.

#ifndef FPETS_NUMCORE_OPS_H_
#define FPETS_NUMCORE_OPS_H_

#include <cstdint>
#include <span>

#include "fpets/numcore/tensor.h"

namespace fpets::ops {

// --- linear algebra -------------------------------------------------------

// [N x K] . [K x M]
Tensor matmul(const Tensor& a, const Tensor& b);
// [N x K] . [M x K]^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// y = xW + b for x [N x Din], W [Din x Dout], b [Dout].
Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b);
// Same-length 1-D convolution. x [T x Cin], kernel [k x Cin x Cout],
// b [Cout], k odd, zero padding (k-1)/2 on each side.
Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor& b);

// --- elementwise ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& x, Real c);
Tensor scale(const Tensor& x, Real c);
Tensor sin(const Tensor& x);
Tensor cos(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor square(const Tensor& x);
// Subgradient 0 at the origin.
Tensor abs(const Tensor& x);
// tanh(a) * sigmoid(g); a and g are the two halves of a doubled-width
// convolution.
Tensor gated_activation(const Tensor& a, const Tensor& g);

// --- reductions and reshaping ----------------------------------------------

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);
// Exclusive prefix sum of a vector: y_i = sum_{k<i} x_k.
Tensor cumsum_exclusive(const Tensor& x);
// a [n], b [m] -> [n x m] with entries a_i / b_j.
Tensor outer_div(const Tensor& a, const Tensor& b);
// a [n], b [m] -> [n x m] with entries a_i - b_j.
Tensor outer_sub(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
// Appends zero rows up to `rows` total.
Tensor pad_rows(const Tensor& x, std::size_t rows);

// --- sequence ops -----------------------------------------------------------

// Stride-2 average pooling along time; an odd tail frame is averaged with
// itself. [T x C] -> [ceil(T/2) x C].
Tensor avg_pool1d(const Tensor& x);
// Repeats every frame twice and truncates to target_len, which must be
// 2T-1 or 2T.
Tensor upsample_nearest(const Tensor& x, std::size_t target_len);
// Row gather from E [V x D].
Tensor embedding(std::span<const int> ids, const Tensor& table);

// --- attention helpers ------------------------------------------------------

// Divides every row by its sum. Throws DegenerateAttentionError when a row
// sum has magnitude <= eps.
Tensor row_normalize(const Tensor& a, Real eps = Real(1e-6));
Tensor softmax_rows(const Tensor& a);

// Inverted dropout. In training mode each element is zeroed with
// probability p and survivors are scaled by 1/(1-p); otherwise identity.
Tensor dropout(const Tensor& x, Real p, bool training, std::uint64_t seed);

}  // namespace fpets::ops

#endif  // FPETS_NUMCORE_OPS_H_
