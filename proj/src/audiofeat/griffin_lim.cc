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

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <string>

#include "fft.h"
#include "fpets/audiofeat/audio.h"
#include "fpets/numcore/errors.h"

namespace fpets::audio {

double spectral_convergence(const Tensor& estimate, const Tensor& target) {
  if (estimate.shape() != target.shape()) {
    throw DimensionError("spectral_convergence: " +
                         shape_to_string(estimate.shape()) + " vs " +
                         shape_to_string(target.shape()));
  }
  double num = 0, den = 0;
  for (std::size_t i = 0; i < target.numel(); ++i) {
    const double d = static_cast<double>(estimate[i]) - target[i];
    num += d * d;
    den += static_cast<double>(target[i]) * target[i];
  }
  if (den == 0) return num == 0 ? 0.0 : std::sqrt(num);
  return std::sqrt(num / den);
}

namespace {

// The iteration runs on the padded signal the analysis frames tile exactly,
// so the synthesis step is a true least-squares projection and the error
// cannot grow. The centered output is cropped at the end.
class FrameGrid {
 public:
  FrameGrid(std::size_t frames, const StftConfig& c)
      : frames_(frames), n_(c.fft_size), hop_(c.hop),
        window_(hann_window(c.fft_size)),
        padded_((frames - 1) * c.hop + c.fft_size, 0.0) {
    for (std::size_t t = 0; t < frames_; ++t) {
      for (std::size_t i = 0; i < n_; ++i) {
        padded_[t * hop_ + i] += window_[i] * window_[i];
      }
    }
  }

  std::size_t length() const { return padded_.size(); }

  void analyze(const std::vector<double>& x,
               std::vector<std::complex<double>>* spec) const {
    const std::size_t bins = n_ / 2 + 1;
    std::vector<double> frame(n_);
    for (std::size_t t = 0; t < frames_; ++t) {
      for (std::size_t i = 0; i < n_; ++i) frame[i] = window_[i] * x[t * hop_ + i];
      detail::rfft(frame.data(), n_, spec->data() + t * bins);
    }
  }

  void synthesize(const std::vector<std::complex<double>>& spec,
                  std::vector<double>* x) const {
    const std::size_t bins = n_ / 2 + 1;
    std::fill(x->begin(), x->end(), 0.0);
    std::vector<double> frame(n_);
    for (std::size_t t = 0; t < frames_; ++t) {
      detail::irfft(spec.data() + t * bins, n_, frame.data());
      for (std::size_t i = 0; i < n_; ++i) (*x)[t * hop_ + i] += window_[i] * frame[i];
    }
    for (std::size_t i = 0; i < x->size(); ++i) {
      (*x)[i] = padded_[i] > 1e-12 ? (*x)[i] / padded_[i] : 0.0;
    }
  }

 private:
  std::size_t frames_, n_, hop_;
  std::vector<double> window_;
  std::vector<double> padded_;  // sum of squared windows per sample
};

}  // namespace

GriffinLimResult griffin_lim(const Tensor& mag, const GriffinLimConfig& config) {
  if (config.stft.fft_size < 4 ||
      (config.stft.fft_size & (config.stft.fft_size - 1)) != 0 ||
      config.stft.hop < 1 || config.stft.hop > config.stft.fft_size / 2) {
    throw ConfigError("griffin_lim: need power-of-two fft_size and 1 <= hop <= fft_size/2");
  }
  if (config.iterations < 0) throw ConfigError("griffin_lim: negative iteration count");
  const std::size_t bins = config.stft.fft_size / 2 + 1;
  if (mag.rank() != 2 || mag.cols() != bins) {
    throw DimensionError("griffin_lim: magnitudes " + shape_to_string(mag.shape()) +
                         " need " + std::to_string(bins) + " columns");
  }
  for (std::size_t i = 0; i < mag.numel(); ++i) {
    if (!(mag[i] >= 0)) {
      throw DomainError("griffin_lim: negative magnitude " +
                        std::to_string(mag[i]) + " at index " + std::to_string(i));
    }
  }
  const std::size_t frames = mag.rows();
  const FrameGrid grid(frames, config.stft);

  std::mt19937_64 rng(config.seed);
  std::vector<std::complex<double>> spec(frames * bins);
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    spec[i] = std::polar(static_cast<double>(mag[i]), 2 * std::numbers::pi * u);
  }

  GriffinLimResult result;
  std::vector<double> x(grid.length());
  std::vector<std::complex<double>> est(spec.size());
  Tensor est_mag(mag.shape());
  // Accelerated iteration with a monotone safeguard: a momentum step that
  // raises the error is discarded and replaced by a plain projection from
  // the last accepted estimate, which can never raise it.
  std::vector<std::complex<double>> accepted(spec.size());
  std::vector<std::complex<double>> target(spec.size());
  auto project_magnitude = [&](const std::vector<std::complex<double>>& from) {
    for (std::size_t i = 0; i < from.size(); ++i) {
      const double a = std::abs(from[i]);
      target[i] = a > 0 ? from[i] * (static_cast<double>(mag[i]) / a)
                        : std::complex<double>(mag[i], 0.0);
    }
  };
  auto evaluate = [&]() {
    grid.synthesize(target, &x);
    grid.analyze(x, &est);
    for (std::size_t i = 0; i < est.size(); ++i) {
      est_mag[i] = static_cast<Real>(std::abs(est[i]));
    }
    return spectral_convergence(est_mag, mag);
  };

  target = spec;
  result.convergence = evaluate();
  accepted = est;
  std::vector<std::complex<double>> momentum_point = est;
  const double alpha = config.momentum;
  for (int it = 0; it < config.iterations; ++it) {
    project_magnitude(momentum_point);
    double sc = evaluate();
    if (sc > result.convergence) {
      project_magnitude(accepted);
      sc = evaluate();
      momentum_point = est;
    } else {
      for (std::size_t i = 0; i < est.size(); ++i) {
        momentum_point[i] = est[i] + alpha * (est[i] - accepted[i]);
      }
    }
    accepted = est;
    result.convergence = sc;
    result.history.push_back(sc);
  }
  // x holds the signal of the last evaluation, which is always accepted.

  const std::size_t length = config.length ? config.length : frames * config.stft.hop;
  const std::size_t offset = config.stft.fft_size / 2;
  result.clip.samples.assign(length, 0.0);
  for (std::size_t i = 0; i < length && offset + i < x.size(); ++i) {
    result.clip.samples[i] = x[offset + i];
  }
  return result;
}

}  // namespace fpets::audio
