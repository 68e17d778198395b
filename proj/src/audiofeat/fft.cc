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

#include "fft.h"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <mutex>

namespace fpets::audio::detail {

namespace {

// FFTW planning is not thread-safe, execution with new arrays is.
struct Plans {
  fftw_plan forward;
  fftw_plan inverse;
};

std::mutex g_mu;

const Plans& plans_for(std::size_t n) {
  static std::map<std::size_t, Plans> cache;
  std::lock_guard<std::mutex> lock(g_mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  double* r = fftw_alloc_real(n);
  fftw_complex* c = fftw_alloc_complex(n / 2 + 1);
  const int ni = static_cast<int>(n);
  Plans p;
  p.forward = fftw_plan_dft_r2c_1d(ni, r, c, FFTW_ESTIMATE | FFTW_UNALIGNED);
  p.inverse = fftw_plan_dft_c2r_1d(ni, c, r, FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(r);
  fftw_free(c);
  return cache.emplace(n, p).first->second;
}

}  // namespace

void rfft(const double* in, std::size_t n, std::complex<double>* out) {
  const Plans& p = plans_for(n);
  std::vector<double> buf(in, in + n);
  fftw_execute_dft_r2c(p.forward, buf.data(),
                       reinterpret_cast<fftw_complex*>(out));
}

void irfft(const std::complex<double>* in, std::size_t n, double* out) {
  const Plans& p = plans_for(n);
  // c2r destroys its input.
  std::vector<std::complex<double>> buf(in, in + n / 2 + 1);
  fftw_execute_dft_c2r(p.inverse, reinterpret_cast<fftw_complex*>(buf.data()), out);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) out[i] *= scale;
}

}  // namespace fpets::audio::detail
