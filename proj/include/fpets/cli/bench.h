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

#ifndef FPETS_CLI_BENCH_H_
#define FPETS_CLI_BENCH_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fpets/audiofeat/audio.h"
#include "fpets/nnmodel/model.h"

namespace fpets::cli {

struct BenchRow {
  std::size_t phonemes = 0;
  std::size_t frames = 0;
  // Median wall-clock milliseconds.
  double parallel_ms = 0;
  double sequential_ms = 0;
  double vocoder_ms = 0;  // 0 when not measured
  std::size_t parallel_decoder_calls = 0;
  std::size_t sequential_decoder_calls = 0;
};

struct BenchConfig {
  std::vector<std::size_t> phoneme_lengths{10, 50, 100, 200};
  // When non-empty, the output length is forced to these frame counts instead
  // of round(sum r); phoneme_lengths then only sets the input size.
  std::vector<std::size_t> frame_lengths;
  std::size_t repeat = 20;
  std::size_t sequential_repeat = 3;
  // Griffin-Lim timing, one run per length, after denormalizing with stats
  // when their dimension matches.
  bool vocoder = false;
  audio::FeatureStats stats;
  std::uint64_t seed = 0;
};

// The model's decoder counter is reset around each measurement.
// Stage-2 synthesis latency per length, one decoder evaluation each, next to
// a frame-looped reference that evaluates the same decoder once per output
// frame on the window of 2^depth frames ending at that frame and feeds the
// mean of each produced frame into the next window. Throws if either
// invocation counter differs from its structural value (1 and T_a).
std::vector<BenchRow> run_benchmark(nn::FpetsModel& model, const BenchConfig& config);

// Frame-looped reference on a ready decoder input; returns T_a x D.
Tensor sequential_decode(const nn::FpetsModel& model, const Tensor& decoder_input);

}  // namespace fpets::cli

#endif  // FPETS_CLI_BENCH_H_
