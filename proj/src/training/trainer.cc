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

#include "fpets/training/trainer.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "fpets/numcore/ops.h"
#include "fpets/numcore/tape.h"
#include "fpets/training/losses.h"

namespace fpets::train {

namespace {

std::uint64_t mix(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) { return mix(mix(a) ^ (b + 0x632BE5ABULL)); }

Tensor vector_of(const std::vector<double>& v) {
  return Tensor(Shape{v.size()}, std::vector<Real>(v.begin(), v.end()));
}

}  // namespace

ItemLoss item_loss(const nn::FpetsModel& model, const Batch& batch, std::size_t b,
                   const nn::ForwardOptions& options) {
  const std::vector<int> ids = batch.item_phonemes(b);
  const std::size_t frames = batch.frame_counts[b];
  const nn::ModelConfig& mc = model.config();
  ItemLoss out;
  Tensor pred;
  if (model.stage() == 1) {
    const auto fwd = model.stage1_forward(ids, frames, options);
    pred = fwd.features;
    out.alignment = alignment_loss(fwd.r, static_cast<double>(frames), mc.align_loss_threshold);
  } else {
    pred = model.stage2_forward(ids, frames, options).features;
  }
  out.acoustic = acoustic_loss(ops::pad_rows(pred, batch.max_frames),
                               batch.item_padded_features(b), batch.item_frame_mask(b));
  out.total = model.stage() == 1 ? total_loss(out.acoustic, out.alignment, mc.align_loss_weight)
                                 : out.acoustic;
  return out;
}

std::string format_report_row(const StepRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%lld,%d,%.17g,%.17g,%.17g,%.3f",
                static_cast<long long>(r.step), r.stage, r.loss_acou, r.loss_align, r.loss,
                r.ms_per_step);
  return buf;
}

void append_report_rows(const std::string& path, const std::vector<StepRecord>& rows) {
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot write report " + path);
  if (fresh) out << kReportHeader << '\n';
  for (const auto& r : rows) out << format_report_row(r) << '\n';
}

std::vector<StepRecord> read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open report " + path);
  std::string line;
  std::getline(in, line);
  if (line != kReportHeader) throw FormatError(path + ": unexpected report header");
  std::vector<StepRecord> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    StepRecord r;
    long long step = 0;
    if (std::sscanf(line.c_str(), "%lld,%d,%lf,%lf,%lf,%lf", &step, &r.stage, &r.loss_acou,
                    &r.loss_align, &r.loss, &r.ms_per_step) != 6) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": malformed row");
    }
    r.step = step;
    rows.push_back(r);
  }
  return rows;
}

Trainer::Trainer(nn::FpetsModel& model, const Corpus& corpus, const TrainConfig& config)
    : model_(model),
      corpus_(corpus),
      config_(config),
      adam_(model.trainable_parameters(config.codec_lr_scale),
            AdamConfig{config.learning_rate, 0.9, 0.98, 1e-4}) {
  if (corpus.empty()) throw UsageError("training needs a non-empty corpus");
  if (config.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (corpus.feature_dim() != model.config().feature_dim) {
    throw ConfigError("corpus features have " + std::to_string(corpus.feature_dim()) +
                      " dimensions, model expects " +
                      std::to_string(model.config().feature_dim));
  }
  for (const auto& u : corpus.items) {
    for (int p : u.phoneme_ids) {
      if (p < 0 || static_cast<std::size_t>(p) >= model.config().vocab_size) {
        throw ConfigError("utterance " + u.id + " uses phoneme id " + std::to_string(p) +
                          " beyond vocab_size " + std::to_string(model.config().vocab_size));
      }
    }
  }
}

std::vector<std::size_t> Trainer::batch_indices(std::int64_t step) const {
  std::mt19937_64 rng(mix(config_.seed, static_cast<std::uint64_t>(step)));
  std::vector<std::size_t> idx(config_.batch_size);
  for (auto& i : idx) i = static_cast<std::size_t>(rng() % corpus_.size());
  return idx;
}

bool Trainer::step(StepRecord* record) {
  const auto start = std::chrono::steady_clock::now();
  const std::int64_t current = step_ + 1;
  const int stage = model_.stage();
  const Batch batch = make_batch(corpus_, batch_indices(current));
  const auto n = static_cast<Real>(batch.size());

  model_.zero_grad();
  for (std::size_t i = 0; i < adam_.size(); ++i) {
    Tensor p = adam_.param(i);
    p.grad();  // allocate, so unused parameters see a zero gradient
  }
  double acou_sum = 0, align_sum = 0, loss_sum = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const nn::ForwardOptions fo{true, mix(mix(config_.seed, static_cast<std::uint64_t>(current)), b)};
    Tape tape;
    TapeScope scope(tape);
    ItemLoss loss;
    try {
      loss = item_loss(model_, batch, b, fo);
    } catch (const DegenerateAttentionError& e) {
      std::fprintf(stderr, "step %lld aborted: utterance %s: %s\n",
                   static_cast<long long>(current), batch.ids[b].c_str(), e.what());
      model_.zero_grad();
      step_ = current;
      return false;
    }
    const double value = loss.total.item();
    if (!std::isfinite(value)) {
      throw TrainingError("loss is not finite at step " + std::to_string(current) +
                          " (utterance " + batch.ids[b] + ")");
    }
    acou_sum += loss.acoustic.item();
    if (stage == 1) align_sum += loss.alignment.item();
    loss_sum += value;
    if (loss.total.requires_grad()) tape.backward(ops::scale(loss.total, Real(1) / n));
  }
  adam_.step();
  step_ = current;
  if (record) {
    record->step = current;
    record->stage = stage;
    record->loss_acou = acou_sum / n;
    record->loss_align = align_sum / n;
    record->loss = loss_sum / n;
    record->ms_per_step =
        config_.record_timing
            ? std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                  .count()
            : 0.0;
  }
  return true;
}

TrainReport Trainer::run() {
  TrainReport report;
  report.stage = model_.stage();
  std::size_t consecutive = 0;
  std::vector<StepRecord> pending;
  auto flush = [&] {
    if (!config_.report_path.empty() && !pending.empty()) {
      append_report_rows(config_.report_path, pending);
    }
    pending.clear();
  };
  if (!config_.report_path.empty() && step_ == 0) {
    // A fresh run starts a fresh report.
    std::filesystem::remove(config_.report_path);
  }
  while (step_ < static_cast<std::int64_t>(config_.steps)) {
    StepRecord rec;
    if (step(&rec)) {
      consecutive = 0;
      report.steps.push_back(rec);
      pending.push_back(rec);
      if (config_.log_every && rec.step % static_cast<std::int64_t>(config_.log_every) == 0) {
        std::fprintf(stderr, "stage %d step %lld loss %.5f (acoustic %.5f, alignment %.3f)\n",
                     rec.stage, static_cast<long long>(rec.step), rec.loss, rec.loss_acou,
                     rec.loss_align);
      }
    } else {
      ++report.aborted_steps;
      if (++consecutive > config_.max_degenerate_steps) {
        flush();
        throw TrainingError("degenerate attention in " + std::to_string(consecutive) +
                            " consecutive steps");
      }
    }
    if (!config_.checkpoint_path.empty() && config_.checkpoint_every &&
        step_ % static_cast<std::int64_t>(config_.checkpoint_every) == 0) {
      flush();
      save(config_.checkpoint_path);
    }
  }
  flush();
  if (!config_.checkpoint_path.empty()) save(config_.checkpoint_path);
  return report;
}

void Trainer::save(Checkpoint& ck) const {
  model_.save(ck);
  save_corpus_meta(corpus_, ck);
  ck.put("train.step", Tensor::scalar(static_cast<Real>(step_)));
  ck.put("train.adam_step", Tensor::scalar(static_cast<Real>(adam_.step_count())));
  for (std::size_t i = 0; i < adam_.size(); ++i) {
    ck.put("optim.m." + std::to_string(i), vector_of(adam_.first_moment(i)));
    ck.put("optim.v." + std::to_string(i), vector_of(adam_.second_moment(i)));
  }
}

void Trainer::save(const std::string& path) const {
  Checkpoint ck;
  save(ck);
  ck.save(path);
}

void Trainer::resume(const Checkpoint& ck) {
  if (!ck.has("train.step")) throw FormatError("checkpoint carries no training state");
  const auto stage = static_cast<int>(ck.get("meta.stage").item());
  if (stage != model_.stage()) {
    throw UsageError("checkpoint is from stage " + std::to_string(stage) +
                     ", trainer is in stage " + std::to_string(model_.stage()));
  }
  for (std::size_t i = 0; i < adam_.size(); ++i) {
    const std::string mi = "optim.m." + std::to_string(i), vi = "optim.v." + std::to_string(i);
    if (!ck.has(mi) || !ck.has(vi)) throw FormatError("checkpoint lacks optimizer slot " + mi);
    const auto m = ck.get(mi).values();
    const auto v = ck.get(vi).values();
    if (m.size() != adam_.param(i).numel() || v.size() != m.size()) {
      throw FormatError("optimizer slot " + mi + " has the wrong size");
    }
    adam_.first_moment(i).assign(m.begin(), m.end());
    adam_.second_moment(i).assign(v.begin(), v.end());
  }
  adam_.set_step_count(static_cast<std::int64_t>(ck.get("train.adam_step").item()));
  step_ = static_cast<std::int64_t>(ck.get("train.step").item());
}

TrainReport train_stage1(const Corpus& corpus, nn::FpetsModel& model, const TrainConfig& config) {
  if (model.stage() != 1) throw UsageError("train_stage1 needs a stage-1 model");
  if (config.init_width_bias) model.set_width_bias(corpus.mean_frames_per_phoneme());
  Trainer trainer(model, corpus, config);
  return trainer.run();
}

TrainReport train_stage2(const Corpus& corpus, nn::FpetsModel& model, const TrainConfig& config) {
  if (config.reinitialize_encoder) {
    nn::ModelConfig fresh_config = model.config();
    fresh_config.seed = mix(fresh_config.seed, 2);
    const nn::FpetsModel fresh(fresh_config);
    model.copy_parameters_from(fresh, {"encoder."});
  }
  model.set_stage(2);
  Trainer trainer(model, corpus, config);
  return trainer.run();
}

double reconstruction_loss(const nn::FpetsModel& model, const Corpus& corpus) {
  if (corpus.empty()) throw UsageError("reconstruction_loss on an empty corpus");
  NoGradScope no_grad;
  double total = 0;
  for (const auto& u : corpus.items) {
    const Tensor pred = model.stage() == 1
                            ? model.stage1_forward(u.phoneme_ids, u.frames()).features
                            : model.stage2_forward(u.phoneme_ids, u.frames()).features;
    total += acoustic_loss(pred, u.features).item();
  }
  return total / static_cast<double>(corpus.size());
}

std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, std::size_t n_first) {
  if (n_first > corpus.size()) {
    throw UsageError("split_corpus: " + std::to_string(n_first) + " of " +
                     std::to_string(corpus.size()) + " items");
  }
  Corpus a, b;
  for (Corpus* c : {&a, &b}) {
    c->vocabulary = corpus.vocabulary;
    c->stats = corpus.stats;
    c->templates = corpus.templates;
  }
  a.items.assign(corpus.items.begin(), corpus.items.begin() + static_cast<std::ptrdiff_t>(n_first));
  b.items.assign(corpus.items.begin() + static_cast<std::ptrdiff_t>(n_first), corpus.items.end());
  return {std::move(a), std::move(b)};
}

}  // namespace fpets::train
