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

#ifndef FPETS_SRC_AUDIOFEAT_FFT_H_
#define FPETS_SRC_AUDIOFEAT_FFT_H_

#include <complex>
#include <cstddef>
#include <vector>

namespace fpets::audio::detail {

// Real-to-complex transform of n real samples into n/2+1 bins.
void rfft(const double* in, std::size_t n, std::complex<double>* out);
// Inverse of rfft, including the 1/n factor.
void irfft(const std::complex<double>* in, std::size_t n, double* out);

}  // namespace fpets::audio::detail

#endif  // FPETS_SRC_AUDIOFEAT_FFT_H_
