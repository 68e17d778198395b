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

#ifndef FPETS_TRAINING_TRAINER_H_
#define FPETS_TRAINING_TRAINER_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fpets/nnmodel/model.h"
#include "fpets/numcore/checkpoint.h"
#include "fpets/numcore/errors.h"
#include "fpets/numcore/optim.h"
#include "fpets/training/corpus.h"

namespace fpets::train {

// Non-finite loss or repeated degenerate attention.
class TrainingError : public Error {
 public:
  using Error::Error;
};

struct TrainConfig {
  // Total step count; a resumed run continues up to it.
  std::size_t steps = 2000;
  std::size_t batch_size = 8;
  double learning_rate = 3e-3;
  // Learning-rate multiplier for the position-codec frequencies.
  double codec_lr_scale = 10.0;
  std::uint64_t seed = 1;
  // Checkpoint every n steps (0: only at the end) when checkpoint_path is set.
  std::size_t checkpoint_every = 0;
  std::string checkpoint_path;
  // Appends one CSV row per step when set.
  std::string report_path;
  // Write 0 instead of the measured ms_per_step, for byte-comparable reports.
  bool record_timing = true;
  // Stage 1 from scratch: start the width head at the corpus mean.
  bool init_width_bias = true;
  // Stage 2: reinitialize the encoder instead of reusing the stage-1 weights.
  bool reinitialize_encoder = false;
  // Progress line to stderr every n steps (0: silent).
  std::size_t log_every = 0;
  // Consecutive aborted steps tolerated before giving up.
  std::size_t max_degenerate_steps = 20;
};

struct StepRecord {
  std::int64_t step = 0;
  int stage = 1;
  double loss_acou = 0;
  double loss_align = 0;
  double loss = 0;
  double ms_per_step = 0;
};

struct TrainReport {
  int stage = 1;
  std::vector<StepRecord> steps;
  // Steps aborted on degenerate attention.
  std::size_t aborted_steps = 0;
};

struct ItemLoss {
  Tensor acoustic;
  Tensor alignment;  // stage 1 only
  Tensor total;
};

// Losses of batch item b under the model's stage, padded prediction against
// padded target with the frame mask. Stage 2 uses the target length.
ItemLoss item_loss(const nn::FpetsModel& model, const Batch& batch, std::size_t b,
                   const nn::ForwardOptions& options = {});

inline constexpr char kReportHeader[] = "step,stage,loss_acou,loss_align,loss,ms_per_step";
std::string format_report_row(const StepRecord& r);
// Creates the file with a header, or appends to an existing one.
void append_report_rows(const std::string& path, const std::vector<StepRecord>& rows);
std::vector<StepRecord> read_report(const std::string& path);

class Trainer {
 public:
  // Trains the model in its current stage. The corpus must outlive the trainer.
  Trainer(nn::FpetsModel& model, const Corpus& corpus, const TrainConfig& config);

  // One optimizer step. Returns false if the step was aborted on degenerate
  // attention (no update; the step counter still advances).
  bool step(StepRecord* record);
  TrainReport run();

  std::int64_t steps_done() const { return step_; }
  const Adam& optimizer() const { return adam_; }

  // Model, optimizer moments and step counter.
  void save(Checkpoint& ck) const;
  void save(const std::string& path) const;
  // Restores optimizer and counter; the model must already hold ck's weights.
  void resume(const Checkpoint& ck);

  // Batch indices drawn for a given step; a pure function of seed and step.
  std::vector<std::size_t> batch_indices(std::int64_t step) const;

 private:
  nn::FpetsModel& model_;
  const Corpus& corpus_;
  TrainConfig config_;
  Adam adam_;
  std::int64_t step_ = 0;
};

// Stage-1 training from the model's current weights.
TrainReport train_stage1(const Corpus& corpus, nn::FpetsModel& model, const TrainConfig& config);
// Switches the model to stage 2 (freezing alignment) and trains the decoder.
TrainReport train_stage2(const Corpus& corpus, nn::FpetsModel& model, const TrainConfig& config);

// Mean acoustic loss without dropout: stage 1 through the CNN decoder with
// soft attention, stage 2 through the UFANS decoder with the target length.
double reconstruction_loss(const nn::FpetsModel& model, const Corpus& corpus);

// First n items and the rest, sharing vocabulary, statistics and templates.
std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, std::size_t n_first);

}  // namespace fpets::train

#endif  // FPETS_TRAINING_TRAINER_H_
