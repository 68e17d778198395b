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

#ifndef FPETS_NNMODEL_MODEL_H_
#define FPETS_NNMODEL_MODEL_H_

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fpets/alignment/alignment.h"
#include "fpets/nnmodel/config.h"
#include "fpets/nnmodel/layers.h"
#include "fpets/numcore/checkpoint.h"
#include "fpets/numcore/optim.h"
#include "fpets/numcore/tensor.h"

namespace fpets::nn {

// Tag carried by every decoder output; the non-autoregression audit checks
// that no decoder output feeds another.
inline constexpr char kDecoderOutputTag[] = "decoder_output";

struct ForwardOptions {
  bool training = false;
  // Base seed for dropout masks; each dropout site derives its own stream.
  std::uint64_t seed = 0;
};

struct Stage1Output {
  Tensor features;  // T_a x D
  Tensor r;         // T_p
  Tensor a_hat;     // T_a x T_p
  Tensor context;   // T_a x hidden
};

struct Stage2Output {
  Tensor features;  // T_a x D
  Tensor r;         // T_p, detached
  std::vector<std::size_t> argmax;
  std::size_t t_a = 0;
  Tensor decoder_input;  // T_a x (hidden + 1)
};

// Copyable atomic counter, so models stay copyable.
class CallCounter {
 public:
  CallCounter() = default;
  CallCounter(const CallCounter& o) : n_(o.n_.load()) {}
  CallCounter& operator=(const CallCounter& o) {
    n_ = o.n_.load();
    return *this;
  }
  void increment() const { ++n_; }
  std::size_t value() const { return n_.load(); }
  void reset() { n_ = 0; }

 private:
  mutable std::atomic<std::size_t> n_{0};
};

class FpetsModel {
 public:
  explicit FpetsModel(const ModelConfig& config);
  // Parameters are shared handles, so copies would alias; moves are fine.
  FpetsModel(const FpetsModel&) = delete;
  FpetsModel& operator=(const FpetsModel&) = delete;
  FpetsModel(FpetsModel&&) = default;
  FpetsModel& operator=(FpetsModel&&) = default;

  const ModelConfig& config() const { return config_; }

  int stage() const { return stage_; }
  // Stage 2 freezes the alignment predictor and the codec.
  void set_stage(int stage);
  bool alignment_frozen() const { return stage_ == 2; }

  Tensor encoder_forward(std::span<const int> ids,
                         const ForwardOptions& options = {}) const;
  // softplus(head) + width_floor, one width per phoneme.
  Tensor predict_alignment_widths(std::span<const int> ids) const;

  Stage1Output stage1_forward(std::span<const int> ids, std::size_t t_a,
                              const ForwardOptions& options = {}) const;
  // T_a is t_a_override if given, else max(1, round(sum r)).
  Stage2Output stage2_forward(std::span<const int> ids,
                              std::optional<std::size_t> t_a_override = {},
                              const ForwardOptions& options = {}) const;

  // Everything stage2_forward does except the decoder: r, T_a, the hard
  // alignment and the decoder input. features is left empty.
  Stage2Output stage2_prepare(std::span<const int> ids,
                              std::optional<std::size_t> t_a_override = {},
                              const ForwardOptions& options = {}) const;

  // Number of decoder evaluations since construction or reset.
  std::size_t decoder_evaluations() const { return decoder_calls_.value(); }
  void reset_decoder_evaluations() { decoder_calls_.reset(); }

  std::vector<std::pair<std::string, Tensor>> parameters() const;
  // Parameters whose name starts with any of the prefixes.
  std::vector<std::pair<std::string, Tensor>> parameters(
      std::initializer_list<std::string_view> prefixes) const;
  // Adam groups for the current stage. Codec frequencies get codec_lr_scale.
  std::vector<AdamParam> trainable_parameters(double codec_lr_scale) const;
  void zero_grad();

  // Sets the width head bias so an untrained predictor starts near the given
  // number of frames per phoneme.
  void set_width_bias(double frames_per_phoneme);

  // Copies values of every parameter under one of the prefixes.
  void copy_parameters_from(const FpetsModel& other,
                            std::initializer_list<std::string_view> prefixes);

  // Parameters under their names plus "meta.config" and "meta.stage".
  void save(Checkpoint& ck) const;
  // Shapes and names must match exactly.
  void load(const Checkpoint& ck);
  static FpetsModel from_checkpoint(const Checkpoint& ck);

  align::PositionCodec& codec() { return codec_; }
  const align::PositionCodec& codec() const { return codec_; }
  Ufans& alignment_ufans() { return align_ufans_; }
  Ufans& decoder_ufans() { return dec2_ufans_; }
  align::AttentionOptions attention_options() const;

  // The decoders alone; each call counts as one decoder evaluation.
  Tensor cnn_decoder(const Tensor& context, const ForwardOptions& options = {}) const;
  Tensor ufans_decoder(const Tensor& input) const;

 private:

  ModelConfig config_;
  int stage_ = 1;
  ParamStore store_;

  Tensor enc_embedding_;
  Dense enc_in_;
  std::vector<GatedConv> enc_convs_;
  Dense enc_out_;

  Tensor align_embedding_;
  Ufans align_ufans_;
  Dense align_head_;
  align::PositionCodec codec_;

  std::vector<GatedConv> dec1_convs_;
  Dense dec1_out_;

  Dense dec2_in_;
  Ufans dec2_ufans_;
  Dense dec2_out_;

  CallCounter decoder_calls_;
};

// d_i = s_i - s_{i-1} (d_0 = s_0) spread over frames by the one-hot matrix.
// Returns T_a x 1.
Tensor relative_position_feature(std::span<const double> r, const Tensor& a_tilde);

}  // namespace fpets::nn

#endif  // FPETS_NNMODEL_MODEL_H_
