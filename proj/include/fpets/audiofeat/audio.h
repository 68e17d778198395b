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

#ifndef FPETS_AUDIOFEAT_AUDIO_H_
#define FPETS_AUDIOFEAT_AUDIO_H_

#include <complex>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fpets/numcore/tensor.h"

namespace fpets::audio {

inline constexpr int kSampleRate = 22050;
inline constexpr std::size_t kFftSize = 2048;
inline constexpr std::size_t kHop = 275;
inline constexpr std::size_t kMelBands = 80;
inline constexpr std::size_t kLinearBins = kFftSize / 2 + 1;
inline constexpr double kLogFloor = 1e-5;

struct AudioClip {
  std::vector<double> samples;
  int sample_rate = kSampleRate;
};

// 16-bit PCM mono only. A zero-length data chunk yields an empty clip.
AudioClip load_wav(const std::string& path);

// Samples outside [-1, 1] are clipped; returns how many were. The running
// total is also added to clipped_sample_count().
std::size_t save_wav(const AudioClip& clip, const std::string& path);
std::size_t clipped_sample_count();

struct StftConfig {
  std::size_t fft_size = kFftSize;
  std::size_t hop = kHop;
};

struct ComplexSpectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<std::complex<double>> data;  // row-major frames x bins

  std::complex<double>& at(std::size_t t, std::size_t k) {
    return data[t * bins + k];
  }
  const std::complex<double>& at(std::size_t t, std::size_t k) const {
    return data[t * bins + k];
  }
};

// ceil(length / hop).
std::size_t stft_frame_count(std::size_t length, std::size_t hop);

// Periodic Hann window of the given size.
std::vector<double> hann_window(std::size_t size);

// Centered STFT: the clip is mirror-padded by fft_size/2 on both sides and
// frame t covers padded samples [t*hop, t*hop + fft_size).
ComplexSpectrogram stft(const AudioClip& clip, const StftConfig& config = {});

// |STFT| as a frames x bins tensor.
Tensor magnitude(const ComplexSpectrogram& spec);

// Unnormalized log features. Linear: log(max(|S|, floor)). Mel: the mel
// filterbank applied to |S|^2, then log(max(., floor)).
Tensor linear_log_spectrogram(const AudioClip& clip,
                              const StftConfig& config = {});
Tensor mel_spectrogram(const AudioClip& clip, const StftConfig& config = {},
                       std::size_t n_mels = kMelBands);

// Slaney mel scale and area normalization, 0 Hz to Nyquist.
// Shape n_mels x (fft_size/2 + 1).
Tensor mel_filterbank(std::size_t n_mels = kMelBands,
                      std::size_t fft_size = kFftSize,
                      int sample_rate = kSampleRate);
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Per-dimension min-max statistics over a corpus of T x D feature matrices.
struct FeatureStats {
  std::vector<double> min;
  std::vector<double> max;

  std::size_t dim() const { return min.size(); }
};

FeatureStats compute_stats(const std::vector<Tensor>& features);
// Maps each dimension to [0, 1] over the corpus range. Dimensions with zero
// range map to 0.
Tensor normalize_features(const Tensor& raw, const FeatureStats& stats);
Tensor denormalize_features(const Tensor& normalized, const FeatureStats& stats);

struct GriffinLimConfig {
  int iterations = 60;
  std::uint64_t seed = 0;
  // Momentum of the accelerated update; 0 gives the classic iteration.
  double momentum = 0.99;
  StftConfig stft;
  // Output length in samples; 0 means frames * hop.
  std::size_t length = 0;
};

struct GriffinLimResult {
  AudioClip clip;
  // Spectral convergence after each iteration.
  std::vector<double> history;
  double convergence = 0.0;
};

// Iterative phase recovery from a frames x bins magnitude matrix.
GriffinLimResult griffin_lim(const Tensor& magnitude,
                             const GriffinLimConfig& config = {});

// || |S_est| - target ||_F / ||target||_F, defined as 0 when target is zero.
double spectral_convergence(const Tensor& estimate, const Tensor& target);

// Linear magnitudes from unnormalized log features of either kind. Mel
// features go through the filterbank pseudo-inverse, clamped at zero.
Tensor log_linear_to_magnitude(const Tensor& log_linear);
Tensor log_mel_to_magnitude(const Tensor& log_mel,
                            std::size_t fft_size = kFftSize,
                            int sample_rate = kSampleRate);

// Feature cache in the checkpoint container: "features", "stats_min",
// "stats_max".
void save_feature_cache(const std::string& path, const Tensor& features,
                        const FeatureStats& stats);
void load_feature_cache(const std::string& path, Tensor* features,
                        FeatureStats* stats);

}  // namespace fpets::audio

#endif  // FPETS_AUDIOFEAT_AUDIO_H_
