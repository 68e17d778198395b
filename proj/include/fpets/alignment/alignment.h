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

#ifndef FPETS_ALIGNMENT_ALIGNMENT_H_
#define FPETS_ALIGNMENT_ALIGNMENT_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fpets/numcore/tensor.h"

namespace fpets::align {

enum class Kernel { kSineCosine, kGaussian };
enum class Normalization { kSum, kSoftmax };

struct CodecConfig {
  std::size_t num_frequencies = 64;
  double min_frequency = 1.0;
  double max_frequency = 10000.0;
  // Seeded log-uniform draws instead of geometric spacing.
  bool random_init = false;
  std::uint64_t seed = 0;
  Kernel kernel = Kernel::kSineCosine;
  double gaussian_sigma = 10.0;
  // Frequencies receive gradients (through a log parametrization).
  bool trainable = true;
};

// Frequency bank f_0..f_{L-1} of the sine-cosine position encoding. The
// stored parameter is log f, so updates keep every frequency positive.
class PositionCodec {
 public:
  explicit PositionCodec(const CodecConfig& config = {});

  const CodecConfig& config() const { return config_; }
  std::size_t size() const { return config_.num_frequencies; }
  std::size_t encoding_dim() const { return 2 * config_.num_frequencies; }

  Tensor& log_frequencies() { return log_f_; }
  const Tensor& log_frequencies() const { return log_f_; }
  // exp(log f); differentiable when trainable.
  Tensor frequencies() const;
  std::vector<double> frequency_values() const;

 private:
  CodecConfig config_;
  Tensor log_f_;
};

// s_i = sum_{k<i} r_k + r_i / 2. Throws DomainError unless every r_i > 0.
Tensor compute_positions(const Tensor& r);
std::vector<double> compute_positions(std::span<const double> r);

// Evenly spread positions s_i = (i + 1/2) T_a / T_p, independent of r.
Tensor fixed_positions(std::size_t t_p, std::size_t t_a);

// Rows [sin(x/f) || cos(x/f)] for each position x.
Tensor encode_phoneme_positions(const Tensor& s, const PositionCodec& codec);
Tensor encode_frame_positions(std::size_t t_a, const PositionCodec& codec);

// A = F P^T.
Tensor attention_matrix(const Tensor& f, const Tensor& p);

// A_ji = exp(-(j - s_i)^2 / (2 sigma^2)).
Tensor gaussian_attention_matrix(const Tensor& s, std::size_t t_a, double sigma);

Tensor normalize_attention(const Tensor& a,
                           Normalization mode = Normalization::kSum,
                           Real eps = Real(1e-6));

// Row-wise argmax; ties go to the smallest phoneme index.
std::vector<std::size_t> hard_attention_indices(const Tensor& a);
// One-hot matrix of the argmax, no gradient.
Tensor hard_attention(const Tensor& a);

// w_i = (r_{i-1} + 2 r_i + r_{i+1}) / 4 with r_{-1} = r_0, r_{T_p} = r_{T_p-1}.
std::vector<double> attention_width_from_alignment(std::span<const double> r);

// Frames per phoneme in a one-hot attention matrix.
std::vector<std::size_t> brute_force_width(const Tensor& one_hot);
std::vector<std::size_t> brute_force_width(std::span<const std::size_t> argmax,
                                           std::size_t t_p);

// g(d) = sum_k cos(d / f_k) for each offset d = x - s.
std::vector<double> heavy_tail_profile(const PositionCodec& codec,
                                       std::span<const double> offsets);

struct AttentionOptions {
  Normalization normalization = Normalization::kSum;
  // Ignore r for placement and use fixed_positions instead.
  bool fixed_positions = false;
};

// Attention scores for widths r over t_a frames, with the kernel chosen by
// the codec. Differentiable in r (unless fixed) and in trainable frequencies.
Tensor attention_scores(const Tensor& r, std::size_t t_a,
                        const PositionCodec& codec,
                        const AttentionOptions& options = {});

struct AlignmentState {
  std::vector<double> r;
  std::vector<double> s;
  Tensor a;
  Tensor a_hat;
  Tensor a_tilde;
  std::vector<double> w;
  std::vector<std::size_t> argmax;
};

// Evaluates every alignment quantity for widths r without recording.
AlignmentState compute_alignment_state(std::span<const double> r,
                                       std::size_t t_a,
                                       const PositionCodec& codec,
                                       const AttentionOptions& options = {});

// Matrix export for inspection.
void write_matrix_csv(const std::string& path, const Tensor& m);
Tensor read_matrix_csv(const std::string& path);
// 8-bit binary PGM, min-max scaled, one pixel per entry.
void write_matrix_pgm(const std::string& path, const Tensor& m);

}  // namespace fpets::align

#endif  // FPETS_ALIGNMENT_ALIGNMENT_H_
