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

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <string>
#include <tuple>
#include <utility>

#include "fft.h"
#include "fpets/audiofeat/audio.h"
#include "fpets/numcore/checkpoint.h"
#include "fpets/numcore/errors.h"

namespace fpets::audio {

namespace {

void check_stft_config(const StftConfig& c) {
  if (c.fft_size < 2 || (c.fft_size & (c.fft_size - 1)) != 0) {
    throw ConfigError("fft_size must be a power of two, got " +
                      std::to_string(c.fft_size));
  }
  if (c.hop < 1) throw ConfigError("hop must be at least 1");
}

// Mirror index into [0, n) without repeating the edge sample.
std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<std::ptrdiff_t>(n)) m = period - m;
  return static_cast<std::size_t>(m);
}

}  // namespace

std::size_t stft_frame_count(std::size_t length, std::size_t hop) {
  return (length + hop - 1) / hop;
}

std::vector<double> hann_window(std::size_t size) {
  std::vector<double> w(size);
  for (std::size_t i = 0; i < size; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(size));
  }
  return w;
}

ComplexSpectrogram stft(const AudioClip& clip, const StftConfig& config) {
  check_stft_config(config);
  const std::size_t len = clip.samples.size();
  if (len < 2) {
    throw DomainError("stft needs at least 2 samples, got " + std::to_string(len));
  }
  const std::size_t n = config.fft_size;
  const auto half = static_cast<std::ptrdiff_t>(n / 2);
  const std::vector<double> w = hann_window(n);
  ComplexSpectrogram spec;
  spec.frames = stft_frame_count(len, config.hop);
  spec.bins = n / 2 + 1;
  spec.data.resize(spec.frames * spec.bins);
  std::vector<double> frame(n);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    const auto start = static_cast<std::ptrdiff_t>(t * config.hop) - half;
    for (std::size_t i = 0; i < n; ++i) {
      const std::ptrdiff_t src = start + static_cast<std::ptrdiff_t>(i);
      frame[i] = w[i] * clip.samples[reflect(src, len)];
    }
    detail::rfft(frame.data(), n, spec.data.data() + t * spec.bins);
  }
  return spec;
}

Tensor magnitude(const ComplexSpectrogram& spec) {
  Tensor out(Shape{spec.frames, spec.bins});
  for (std::size_t i = 0; i < spec.data.size(); ++i) {
    out[i] = static_cast<Real>(std::abs(spec.data[i]));
  }
  return out;
}

Tensor linear_log_spectrogram(const AudioClip& clip, const StftConfig& config) {
  Tensor mag = magnitude(stft(clip, config));
  for (Real& v : mag.values()) {
    v = static_cast<Real>(std::log(std::max(static_cast<double>(v), kLogFloor)));
  }
  return mag;
}

double hz_to_mel(double hz) {
  const double f_sp = 200.0 / 3;
  const double min_log_hz = 1000.0;
  const double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (hz < min_log_hz) return hz / f_sp;
  return min_log_mel + std::log(hz / min_log_hz) / logstep;
}

double mel_to_hz(double mel) {
  const double f_sp = 200.0 / 3;
  const double min_log_hz = 1000.0;
  const double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (mel < min_log_mel) return mel * f_sp;
  return min_log_hz * std::exp(logstep * (mel - min_log_mel));
}

Tensor mel_filterbank(std::size_t n_mels, std::size_t fft_size, int sample_rate) {
  if (n_mels < 1) throw ConfigError("n_mels must be positive");
  check_stft_config({fft_size, 1});
  if (sample_rate <= 0) throw ConfigError("sample rate must be positive");
  const std::size_t bins = fft_size / 2 + 1;
  const double nyquist = sample_rate / 2.0;
  const double mel_max = hz_to_mel(nyquist);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_max * static_cast<double>(i) /
                         static_cast<double>(n_mels + 1));
  }
  Tensor fb(Shape{n_mels, bins});
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    const double norm = 2.0 / (hi - lo);
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate /
                       static_cast<double>(fft_size);
      const double up = (f - lo) / (center - lo);
      const double down = (hi - f) / (hi - center);
      const double v = std::max(0.0, std::min(up, down));
      fb.at(m, k) = static_cast<Real>(v * norm);
    }
  }
  return fb;
}

Tensor mel_spectrogram(const AudioClip& clip, const StftConfig& config,
                       std::size_t n_mels) {
  const ComplexSpectrogram spec = stft(clip, config);
  const Tensor fb = mel_filterbank(n_mels, config.fft_size, clip.sample_rate);
  Tensor out(Shape{spec.frames, n_mels});
  for (std::size_t t = 0; t < spec.frames; ++t) {
    for (std::size_t m = 0; m < n_mels; ++m) {
      double acc = 0;
      for (std::size_t k = 0; k < spec.bins; ++k) {
        acc += static_cast<double>(fb.at(m, k)) * std::norm(spec.at(t, k));
      }
      out.at(t, m) = static_cast<Real>(std::log(std::max(acc, kLogFloor)));
    }
  }
  return out;
}

FeatureStats compute_stats(const std::vector<Tensor>& features) {
  if (features.empty()) throw DomainError("compute_stats: empty corpus");
  const std::size_t d = features.front().cols();
  FeatureStats s;
  s.min.assign(d, std::numeric_limits<double>::infinity());
  s.max.assign(d, -std::numeric_limits<double>::infinity());
  for (const Tensor& f : features) {
    if (f.cols() != d) {
      throw DimensionError("compute_stats: feature width " +
                           std::to_string(f.cols()) + " differs from " +
                           std::to_string(d));
    }
    for (std::size_t t = 0; t < f.rows(); ++t) {
      for (std::size_t j = 0; j < d; ++j) {
        const double v = f.at(t, j);
        s.min[j] = std::min(s.min[j], v);
        s.max[j] = std::max(s.max[j], v);
      }
    }
  }
  return s;
}

namespace {

void check_stats(const Tensor& x, const FeatureStats& stats) {
  if (x.cols() != stats.dim() || stats.max.size() != stats.dim()) {
    throw DimensionError("features " + shape_to_string(x.shape()) +
                         " do not match statistics of width " +
                         std::to_string(stats.dim()));
  }
}

double range_of(const FeatureStats& s, std::size_t j) {
  const double r = s.max[j] - s.min[j];
  return r > 0 ? r : 0.0;
}

}  // namespace

Tensor normalize_features(const Tensor& raw, const FeatureStats& stats) {
  check_stats(raw, stats);
  Tensor out(raw.shape());
  for (std::size_t t = 0; t < raw.rows(); ++t) {
    for (std::size_t j = 0; j < raw.cols(); ++j) {
      const double r = range_of(stats, j);
      out.at(t, j) = r > 0 ? static_cast<Real>((raw.at(t, j) - stats.min[j]) / r)
                           : Real(0);
    }
  }
  return out;
}

Tensor denormalize_features(const Tensor& normalized, const FeatureStats& stats) {
  check_stats(normalized, stats);
  Tensor out(normalized.shape());
  for (std::size_t t = 0; t < normalized.rows(); ++t) {
    for (std::size_t j = 0; j < normalized.cols(); ++j) {
      out.at(t, j) = static_cast<Real>(
          stats.min[j] + normalized.at(t, j) * range_of(stats, j));
    }
  }
  return out;
}

Tensor log_linear_to_magnitude(const Tensor& log_linear) {
  Tensor out(log_linear.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out[i] = static_cast<Real>(std::exp(static_cast<double>(log_linear[i])));
  }
  return out;
}

Tensor log_mel_to_magnitude(const Tensor& log_mel, std::size_t fft_size,
                            int sample_rate) {
  const std::size_t n_mels = log_mel.cols();
  using Key = std::tuple<std::size_t, std::size_t, int>;
  static std::mutex mu;
  static std::map<Key, Eigen::MatrixXd> cache;
  Eigen::MatrixXd pinv;
  {
    std::lock_guard<std::mutex> lock(mu);
    const Key key{n_mels, fft_size, sample_rate};
    auto it = cache.find(key);
    if (it == cache.end()) {
      const Tensor fb = mel_filterbank(n_mels, fft_size, sample_rate);
      Eigen::MatrixXd m(fb.rows(), fb.cols());
      for (std::size_t i = 0; i < fb.rows(); ++i) {
        for (std::size_t k = 0; k < fb.cols(); ++k) m(i, k) = fb.at(i, k);
      }
      it = cache.emplace(key, m.completeOrthogonalDecomposition().pseudoInverse())
               .first;
    }
    pinv = it->second;
  }
  const std::size_t frames = log_mel.rows(), bins = fft_size / 2 + 1;
  Tensor out(Shape{frames, bins});
  Eigen::VectorXd power(n_mels);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t m = 0; m < n_mels; ++m) power(m) = std::exp(log_mel.at(t, m));
    const Eigen::VectorXd lin = pinv * power;
    for (std::size_t k = 0; k < bins; ++k) {
      out.at(t, k) = static_cast<Real>(std::sqrt(std::max(lin(k), 0.0)));
    }
  }
  return out;
}

void save_feature_cache(const std::string& path, const Tensor& features,
                        const FeatureStats& stats) {
  Checkpoint ck;
  ck.put("features", features);
  ck.put("stats_min", Tensor::vector(std::vector<Real>(stats.min.begin(), stats.min.end())));
  ck.put("stats_max", Tensor::vector(std::vector<Real>(stats.max.begin(), stats.max.end())));
  ck.save(path);
}

void load_feature_cache(const std::string& path, Tensor* features,
                        FeatureStats* stats) {
  const Checkpoint ck = Checkpoint::load(path);
  if (features) *features = ck.get("features").clone();
  if (stats) {
    auto lo = ck.get("stats_min").values();
    auto hi = ck.get("stats_max").values();
    stats->min.assign(lo.begin(), lo.end());
    stats->max.assign(hi.begin(), hi.end());
  }
}

}  // namespace fpets::audio
