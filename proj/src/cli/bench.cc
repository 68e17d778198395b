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

#include "fpets/cli/bench.h"

#include <algorithm>
#include <chrono>
#include <random>

#include "fpets/numcore/errors.h"
#include "fpets/numcore/ops.h"
#include "fpets/numcore/tape.h"

namespace fpets::cli {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Tensor sequential_decode(const nn::FpetsModel& model, const Tensor& decoder_input) {
  NoGradScope no_grad;
  const std::size_t t_a = decoder_input.rows(), width = decoder_input.cols();
  const std::size_t window = std::size_t{1} << model.config().ufans_decoder_layers;
  const std::size_t d = model.config().feature_dim;
  Tensor out(Shape{t_a, d});
  Real feedback = 0;
  for (std::size_t t = 0; t < t_a; ++t) {
    const std::size_t begin = t + 1 > window ? t + 1 - window : 0;
    Tensor x = ops::slice_rows(decoder_input, begin, t + 1).clone();
    x.at(x.rows() - 1, width - 1) += feedback;
    const Tensor y = model.ufans_decoder(x);
    Real sum = 0;
    for (std::size_t k = 0; k < d; ++k) {
      out.at(t, k) = y.at(y.rows() - 1, k);
      sum += out.at(t, k);
    }
    feedback = sum / static_cast<Real>(d);
  }
  return out;
}

std::vector<BenchRow> run_benchmark(nn::FpetsModel& model, const BenchConfig& config) {
  if (model.stage() != 2) throw UsageError("benchmarking needs a stage-2 checkpoint");
  if (config.repeat == 0 || config.sequential_repeat == 0) {
    throw ConfigError("repeat counts must be positive");
  }
  if (!config.frame_lengths.empty() &&
      config.frame_lengths.size() != config.phoneme_lengths.size()) {
    throw ConfigError("frame_lengths must pair with phoneme_lengths");
  }
  NoGradScope no_grad;
  std::mt19937_64 rng(config.seed);
  std::vector<BenchRow> rows;
  for (std::size_t k = 0; k < config.phoneme_lengths.size(); ++k) {
    const std::size_t n = config.phoneme_lengths[k];
    if (n == 0) throw ConfigError("phoneme lengths must be positive");
    std::vector<int> ids(n);
    for (int& id : ids) id = static_cast<int>(rng() % model.config().vocab_size);
    std::optional<std::size_t> frames;
    if (!config.frame_lengths.empty()) frames = config.frame_lengths[k];

    BenchRow row;
    row.phonemes = n;
    std::vector<double> times;
    nn::Stage2Output out;
    for (std::size_t rep = 0; rep < config.repeat; ++rep) {
      model.reset_decoder_evaluations();
      const auto start = Clock::now();
      out = model.stage2_forward(ids, frames);
      times.push_back(elapsed_ms(start));
      if (model.decoder_evaluations() != 1) {
        throw Error("parallel synthesis made " + std::to_string(model.decoder_evaluations()) +
                    " decoder evaluations, expected 1");
      }
    }
    row.frames = out.t_a;
    row.parallel_ms = median(times);
    row.parallel_decoder_calls = 1;

    times.clear();
    for (std::size_t rep = 0; rep < config.sequential_repeat; ++rep) {
      model.reset_decoder_evaluations();
      const auto start = Clock::now();
      const nn::Stage2Output prep = model.stage2_prepare(ids, frames);
      sequential_decode(model, prep.decoder_input);
      times.push_back(elapsed_ms(start));
      if (model.decoder_evaluations() != prep.t_a) {
        throw Error("frame-looped reference made " +
                    std::to_string(model.decoder_evaluations()) + " decoder evaluations, expected " +
                    std::to_string(prep.t_a));
      }
    }
    row.sequential_ms = median(times);
    row.sequential_decoder_calls = row.frames;

    if (config.vocoder) {
      const auto start = Clock::now();
      Tensor feats = out.features;
      if (config.stats.dim() == feats.cols()) {
        feats = audio::denormalize_features(feats, config.stats);
      }
      const Tensor mag = feats.cols() == audio::kMelBands ? audio::log_mel_to_magnitude(feats)
                                                          : audio::log_linear_to_magnitude(feats);
      audio::GriffinLimConfig gl;
      gl.seed = config.seed;
      audio::griffin_lim(mag, gl);
      row.vocoder_ms = elapsed_ms(start);
    }
    model.reset_decoder_evaluations();
    rows.push_back(row);
  }
  return rows;
}

}  // namespace fpets::cli
