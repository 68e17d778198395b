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

#include "fpets/nnmodel/model.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "fpets/numcore/errors.h"
#include "fpets/numcore/ops.h"
#include "fpets/numcore/tape.h"

namespace fpets::nn {

namespace {

std::uint64_t site_seed(std::uint64_t base, std::uint64_t site) {
  // splitmix64 of the pair keeps dropout streams independent per site.
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (site + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

bool has_prefix(const std::string& name,
                std::initializer_list<std::string_view> prefixes) {
  for (std::string_view p : prefixes) {
    if (name.compare(0, p.size(), p) == 0) return true;
  }
  return false;
}

}  // namespace

FpetsModel::FpetsModel(const ModelConfig& config)
    : config_(config), store_(config.seed), codec_(config.codec_config()) {
  config_.validate();
  const ModelConfig& c = config_;
  // An embedding row is a dense layer over a one-hot input, so fan_in is 1.
  enc_embedding_ = store_.uniform("encoder.embedding", {c.vocab_size, c.embedding_dim}, 1);
  enc_in_ = Dense(store_, "encoder.in", c.embedding_dim, c.encoder_hidden);
  for (std::size_t i = 0; i < c.encoder_layers; ++i) {
    enc_convs_.emplace_back(store_, "encoder.conv" + std::to_string(i), c.encoder_hidden,
                            c.encoder_hidden, c.encoder_kernel, c.encoder_filter);
  }
  enc_out_ = Dense(store_, "encoder.out", c.encoder_hidden, c.encoder_hidden);

  align_embedding_ = store_.uniform("align.embedding", {c.vocab_size, c.align_hidden}, 1);
  align_ufans_ = Ufans(store_, "align.ufans", c.align_hidden, c.align_layers,
                       c.align_kernel, c.align_filter);
  align_head_ = Dense(store_, "align.head", c.align_hidden, 1);
  store_.add("codec.log_freqs", codec_.log_frequencies());

  for (std::size_t i = 0; i < c.cnn_decoder_layers; ++i) {
    dec1_convs_.emplace_back(store_, "dec1.conv" + std::to_string(i), c.encoder_hidden,
                             c.encoder_hidden, c.cnn_decoder_kernel, c.cnn_decoder_filter);
  }
  dec1_out_ = Dense(store_, "dec1.out", c.encoder_hidden, c.feature_dim);

  dec2_in_ = Dense(store_, "dec2.in", c.encoder_hidden + 1, c.ufans_decoder_hidden);
  dec2_ufans_ = Ufans(store_, "dec2.ufans", c.ufans_decoder_hidden, c.ufans_decoder_layers,
                      c.ufans_decoder_kernel, c.ufans_decoder_filter);
  dec2_out_ = Dense(store_, "dec2.out", c.ufans_decoder_hidden, c.feature_dim);
}

void FpetsModel::set_stage(int stage) {
  if (stage != 1 && stage != 2) {
    throw ConfigError("stage must be 1 or 2, got " + std::to_string(stage));
  }
  stage_ = stage;
  const bool trainable_alignment = stage == 1;
  for (auto& [name, t] : store_.entries()) {
    if (has_prefix(name, {"align."})) {
      t.set_requires_grad(trainable_alignment);
    }
  }
  codec_.log_frequencies().set_requires_grad(trainable_alignment &&
                                             config_.frequencies_trainable);
}

align::AttentionOptions FpetsModel::attention_options() const {
  align::AttentionOptions o;
  o.normalization = config_.normalization;
  o.fixed_positions = config_.fixed_positions;
  return o;
}

Tensor FpetsModel::encoder_forward(std::span<const int> ids,
                                   const ForwardOptions& options) const {
  Tensor h = enc_in_.forward(ops::embedding(ids, enc_embedding_));
  for (std::size_t i = 0; i < enc_convs_.size(); ++i) {
    h = enc_convs_[i].forward(h);
    h = ops::dropout(h, static_cast<Real>(config_.dropout), options.training,
                     site_seed(options.seed, i));
  }
  return enc_out_.forward(h);
}

Tensor FpetsModel::predict_alignment_widths(std::span<const int> ids) const {
  const Tensor e = ops::embedding(ids, align_embedding_);
  const Tensor head = align_head_.forward(align_ufans_.forward(e));
  const Tensor r = ops::add_scalar(ops::softplus(head), static_cast<Real>(config_.width_floor));
  return ops::reshape(r, Shape{ids.size()});
}

Tensor FpetsModel::cnn_decoder(const Tensor& context,
                               const ForwardOptions& options) const {
  decoder_calls_.increment();
  Tensor h = context;
  for (std::size_t i = 0; i < dec1_convs_.size(); ++i) {
    h = dec1_convs_[i].forward(h);
    h = ops::dropout(h, static_cast<Real>(config_.dropout), options.training,
                     site_seed(options.seed, 100 + i));
  }
  Tensor out = dec1_out_.forward(h);
  out.set_tag(kDecoderOutputTag);
  return out;
}

Tensor FpetsModel::ufans_decoder(const Tensor& input) const {
  decoder_calls_.increment();
  Tensor out = dec2_out_.forward(dec2_ufans_.forward(dec2_in_.forward(input)));
  out.set_tag(kDecoderOutputTag);
  return out;
}

Stage1Output FpetsModel::stage1_forward(std::span<const int> ids, std::size_t t_a,
                                        const ForwardOptions& options) const {
  if (stage_ != 1) throw UsageError("stage1_forward on a stage-2 model");
  if (t_a < 1) throw DimensionError("stage1_forward: T_a must be at least 1");
  Stage1Output out;
  const Tensor h = encoder_forward(ids, options);
  out.r = predict_alignment_widths(ids);
  const Tensor a = align::attention_scores(out.r, t_a, codec_, attention_options());
  try {
    out.a_hat = align::normalize_attention(a, config_.normalization);
  } catch (const DegenerateAttentionError& e) {
    std::string widths;
    for (std::size_t i = 0; i < out.r.numel(); ++i) {
      widths += (i ? " " : "") + std::to_string(out.r[i]);
    }
    throw DegenerateAttentionError(std::string(e.what()) + "; T_a=" +
                                   std::to_string(t_a) + " r=[" + widths + "]");
  }
  out.context = ops::matmul(out.a_hat, h);
  out.features = cnn_decoder(out.context, options);
  return out;
}

Stage2Output FpetsModel::stage2_forward(std::span<const int> ids,
                                        std::optional<std::size_t> t_a_override,
                                        const ForwardOptions& options) const {
  Stage2Output out = stage2_prepare(ids, t_a_override, options);
  out.features = ufans_decoder(out.decoder_input);
  return out;
}

Stage2Output FpetsModel::stage2_prepare(std::span<const int> ids,
                                        std::optional<std::size_t> t_a_override,
                                        const ForwardOptions& options) const {
  if (stage_ != 2) throw UsageError("stage-2 synthesis needs a stage-2 model");
  Stage2Output out;
  Tensor a;
  {
    NoGradScope frozen;
    out.r = predict_alignment_widths(ids).detach();
    double total = 0;
    for (Real v : out.r.values()) total += v;
    out.t_a = t_a_override ? *t_a_override
                           : static_cast<std::size_t>(std::max(1.0, std::round(total)));
    if (out.t_a < 1) throw DimensionError("stage2_forward: T_a must be at least 1");
    a = align::attention_scores(out.r, out.t_a, codec_, attention_options());
  }
  out.argmax = align::hard_attention_indices(a);
  const Tensor a_tilde = align::hard_attention(a);
  const Tensor h = encoder_forward(ids, options);
  std::vector<double> r(out.r.values().begin(), out.r.values().end());
  out.decoder_input = ops::concat_cols(ops::matmul(a_tilde, h),
                                       relative_position_feature(r, a_tilde));
  return out;
}

std::vector<std::pair<std::string, Tensor>> FpetsModel::parameters() const {
  return store_.entries();
}

std::vector<std::pair<std::string, Tensor>> FpetsModel::parameters(
    std::initializer_list<std::string_view> prefixes) const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (const auto& [name, t] : store_.entries()) {
    if (has_prefix(name, prefixes)) out.emplace_back(name, t);
  }
  return out;
}

std::vector<AdamParam> FpetsModel::trainable_parameters(double codec_lr_scale) const {
  std::vector<AdamParam> out;
  const auto groups = stage_ == 1
                          ? parameters({"encoder.", "align.", "codec.", "dec1."})
                          : parameters({"encoder.", "dec2."});
  for (const auto& [name, t] : groups) {
    if (!t.requires_grad()) continue;
    // The Gaussian kernel never reads the frequencies.
    if (name.starts_with("codec.") && config_.kernel == align::Kernel::kGaussian) continue;
    out.push_back({t, has_prefix(name, {"codec."}) ? codec_lr_scale : 1.0});
  }
  return out;
}

void FpetsModel::zero_grad() {
  for (auto& [name, t] : store_.entries()) t.zero_grad();
}

void FpetsModel::set_width_bias(double frames_per_phoneme) {
  const double target = frames_per_phoneme - config_.width_floor;
  if (!(target > 0)) {
    throw DomainError("width bias target " + std::to_string(frames_per_phoneme) +
                      " is not above the width floor");
  }
  // softplus^-1(y) = log(exp(y) - 1), written to stay finite for large y.
  const double inv = target > 30 ? target : std::log(std::expm1(target));
  align_head_.b[0] = static_cast<Real>(inv);
}

void FpetsModel::copy_parameters_from(const FpetsModel& other,
                                      std::initializer_list<std::string_view> prefixes) {
  for (const auto& [name, src] : other.parameters(prefixes)) {
    Tensor& dst = store_.get(name);
    if (dst.shape() != src.shape()) {
      throw DimensionError("parameter '" + name + "' has shape " +
                           shape_to_string(dst.shape()) + ", source has " +
                           shape_to_string(src.shape()));
    }
    std::copy(src.values().begin(), src.values().end(), dst.values().begin());
  }
}

void FpetsModel::save(Checkpoint& ck) const {
  for (const auto& [name, t] : store_.entries()) ck.put(name, t);
  ck.put_string("meta.config", config_.to_string());
  ck.put("meta.stage", Tensor::scalar(stage_));
}

void FpetsModel::load(const Checkpoint& ck) {
  for (auto& [name, t] : store_.entries()) {
    if (!ck.has(name)) throw FormatError("checkpoint lacks parameter '" + name + "'");
    const Tensor& src = ck.get(name);
    if (src.shape() != t.shape()) {
      throw FormatError("checkpoint parameter '" + name + "' has shape " +
                        shape_to_string(src.shape()) + ", model expects " +
                        shape_to_string(t.shape()));
    }
    std::copy(src.values().begin(), src.values().end(), t.values().begin());
  }
  if (ck.has("meta.stage")) set_stage(static_cast<int>(ck.get("meta.stage").item()));
}

FpetsModel FpetsModel::from_checkpoint(const Checkpoint& ck) {
  FpetsModel model(ModelConfig::parse(ck.get_string("meta.config")));
  model.load(ck);
  return model;
}

Tensor relative_position_feature(std::span<const double> r, const Tensor& a_tilde) {
  if (a_tilde.rank() != 2 || a_tilde.cols() != r.size()) {
    throw DimensionError("relative_position_feature: one-hot matrix " +
                         shape_to_string(a_tilde.shape()) + " does not match " +
                         std::to_string(r.size()) + " widths");
  }
  const std::vector<double> s = align::compute_positions(r);
  Tensor d(Shape{r.size(), 1});
  for (std::size_t i = 0; i < r.size(); ++i) {
    d[i] = static_cast<Real>(i == 0 ? s[0] : s[i] - s[i - 1]);
  }
  return ops::matmul(a_tilde, d);
}

}  // namespace fpets::nn
