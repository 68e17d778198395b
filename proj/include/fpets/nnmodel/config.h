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

#ifndef FPETS_NNMODEL_CONFIG_H_
#define FPETS_NNMODEL_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <string>

#include "fpets/alignment/alignment.h"

namespace fpets::nn {

// Desk-scale defaults; full_scale() gives the full-size layer settings.
struct ModelConfig {
  std::size_t vocab_size = 48;
  std::size_t embedding_dim = 64;
  std::size_t feature_dim = 80;

  std::size_t encoder_hidden = 64;
  std::size_t encoder_layers = 3;
  std::size_t encoder_kernel = 3;
  std::size_t encoder_filter = 128;

  std::size_t align_layers = 4;
  std::size_t align_hidden = 64;
  std::size_t align_kernel = 3;
  std::size_t align_filter = 128;

  std::size_t cnn_decoder_layers = 3;
  std::size_t cnn_decoder_kernel = 3;
  std::size_t cnn_decoder_filter = 128;

  std::size_t ufans_decoder_layers = 6;
  std::size_t ufans_decoder_hidden = 64;
  std::size_t ufans_decoder_kernel = 3;
  std::size_t ufans_decoder_filter = 128;

  double dropout = 0.15;
  double align_loss_weight = 0.02;
  double align_loss_threshold = 3.0;
  double width_floor = 0.1;

  std::size_t num_frequencies = 16;
  bool frequencies_trainable = true;
  align::Kernel kernel = align::Kernel::kSineCosine;
  double gaussian_sigma = 10.0;
  align::Normalization normalization = align::Normalization::kSum;
  bool fixed_positions = false;

  std::uint64_t seed = 1;

  static ModelConfig full_scale();

  // Throws ConfigError naming the first offending field.
  void validate() const;

  // One "key=value" per line, keys sorted; parse() accepts the same form,
  // with '#' comments and blank lines. Unknown keys are errors.
  std::string to_string() const;
  static ModelConfig parse(const std::string& text);
  static ModelConfig parse(const std::string& text, ModelConfig base);
  void set(const std::string& key, const std::string& value);

  // FNV-1a of to_string().
  std::uint64_t hash() const;

  align::CodecConfig codec_config() const;
};

}  // namespace fpets::nn

#endif  // FPETS_NNMODEL_CONFIG_H_
