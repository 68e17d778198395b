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

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fpets/audiofeat/audio.h"
#include "fpets/nnmodel/model.h"
#include "fpets/numcore/errors.h"
#include "fpets/numcore/ops.h"
#include "fpets/numcore/tape.h"
#include "fpets/training/corpus.h"
#include "fpets/training/evaluate.h"
#include "fpets/training/losses.h"
#include "fpets/training/trainer.h"

using namespace fpets;
using namespace fpets::train;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fpets_training_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

SyntheticConfig small_corpus_config() {
  SyntheticConfig c;
  c.n_items = 12;
  c.feature_dim = 10;
  c.alphabet_size = 6;
  c.max_phonemes = 6;
  return c;
}

nn::ModelConfig small_model_config() {
  nn::ModelConfig c;
  c.feature_dim = 10;
  c.embedding_dim = 8;
  c.encoder_hidden = 8;
  c.encoder_filter = 12;
  c.align_hidden = 8;
  c.align_filter = 12;
  c.align_layers = 2;
  c.cnn_decoder_filter = 12;
  c.ufans_decoder_hidden = 8;
  c.ufans_decoder_filter = 12;
  c.ufans_decoder_layers = 3;
  return c;
}

TrainConfig quick_train(std::size_t steps) {
  TrainConfig t;
  t.steps = steps;
  t.batch_size = 3;
  t.record_timing = false;
  return t;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::vector<Real> values_of(const nn::FpetsModel& m, std::initializer_list<std::string_view> p) {
  std::vector<Real> out;
  for (const auto& [name, t] : m.parameters(p)) {
    out.insert(out.end(), t.values().begin(), t.values().end());
  }
  return out;
}

}  // namespace

TEST_CASE("acoustic loss") {
  Tensor target = Tensor::matrix({{0.5, 1.0}, {0.25, -1.0}, {2.0, 0.0}});
  CHECK(acoustic_loss(target, target).item() == 0);
  CHECK(acoustic_loss(ops::add_scalar(target, 1), target).item() == doctest::Approx(1).epsilon(1e-15));
  Tensor mask = Tensor::vector({1, 1, 0});
  Tensor altered = target.clone();
  altered.at(2, 0) = 40;
  altered.at(2, 1) = -7;
  CHECK(acoustic_loss(altered, target, mask).item() == 0);
  Tensor shifted = ops::add_scalar(target, 2);
  CHECK(acoustic_loss(shifted, target, mask).item() == doctest::Approx(4).epsilon(1e-15));
  CHECK_THROWS_AS(acoustic_loss(target, Tensor(Shape{3, 3})), DimensionError);
  CHECK_THROWS_AS(acoustic_loss(target, target, Tensor::vector({1, 1})), DimensionError);
  CHECK_THROWS_AS(acoustic_loss(target, target, Tensor::vector({0, 0, 0})), DomainError);
}

TEST_CASE("alignment loss branches and continuity") {
  auto widths = [](double total, std::size_t n) {
    return Tensor(Shape{n}, static_cast<Real>(total / static_cast<double>(n)));
  };
  CHECK(alignment_loss(widths(100, 4), 103, 5).item() == 5);
  CHECK(alignment_loss(widths(100, 4), 112, 5).item() == 12);
  CHECK(alignment_loss(widths(100, 4), 100, 5).item() == 5);
  CHECK(alignment_loss(widths(100, 4), 105, 5).item() == 5);
  CHECK(alignment_loss(widths(100, 4), 95, 5).item() == 5);
  CHECK(alignment_loss(widths(100, 4), 105.000001, 5).item() == doctest::Approx(5.000001));
  CHECK(std::abs(alignment_loss(widths(100, 4), 104.999999, 5).item() - 5) < 1e-5);
  CHECK_THROWS_AS(alignment_loss(widths(1, 1), 1, 0), DomainError);

  // Outside the band the gradient is the sign of sum r - T_a on every width.
  Tensor r = Tensor::vector({3, 4, 5});
  r.set_requires_grad(true);
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(alignment_loss(r, 20, 3));
  }
  for (Real g : r.grad()) CHECK(g == -1);
  Tensor r2 = Tensor::vector({3, 4, 5});
  r2.set_requires_grad(true);
  Tape tape2;
  TapeScope scope2(tape2);
  CHECK(!alignment_loss(r2, 13, 3).requires_grad());
}

TEST_CASE("total loss") {
  CHECK(total_loss(Tensor::scalar(1), Tensor::scalar(5), 0.02).item() ==
        doctest::Approx(1.1).epsilon(1e-15));
  CHECK(total_loss(Tensor::scalar(0.7), Tensor::scalar(5), 0).item() == 0.7);
  CHECK(total_loss(Tensor::scalar(2), Tensor::scalar(10)).item() ==
        doctest::Approx(2.2).epsilon(1e-15));
  CHECK(nn::ModelConfig{}.align_loss_weight == 0.02);
}

TEST_CASE("synthetic corpus construction") {
  SyntheticConfig c;
  const Corpus a = generate_synthetic_corpus(c);
  const Corpus b = generate_synthetic_corpus(c);
  CHECK(a.size() == 50);
  CHECK(corpus_hash(a) == corpus_hash(b));
  c.seed = 8;
  CHECK(corpus_hash(generate_synthetic_corpus(c)) != corpus_hash(a));
  for (const auto& u : a.items) {
    CHECK(u.phoneme_ids.size() >= 4);
    CHECK(u.phoneme_ids.size() <= 10);
    double total = 0;
    for (double d : u.true_durations) {
      CHECK(d >= 4);
      CHECK(d <= 9);
      total += d;
    }
    CHECK(total == static_cast<double>(u.frames()));
    CHECK(u.features.cols() == audio::kMelBands);
    for (std::size_t i = 1; i < u.phoneme_ids.size(); ++i) {
      CHECK(u.phoneme_ids[i] != u.phoneme_ids[i - 1]);
    }
  }
  SyntheticConfig bad;
  bad.max_duration = 25;
  CHECK_THROWS_AS(generate_synthetic_corpus(bad), ConfigError);
  bad = SyntheticConfig{};
  bad.min_duration = 2;
  CHECK_THROWS_AS(generate_synthetic_corpus(bad), ConfigError);
}

TEST_CASE("synthetic templates are separable by a nearest-template classifier") {
  const Corpus corpus = generate_synthetic_corpus(SyntheticConfig{});
  std::size_t right = 0, total = 0;
  for (const auto& u : corpus.items) {
    const auto truth = expand_durations(u.phoneme_ids, u.true_durations);
    const auto guess = classify_frames(u.features, corpus.templates);
    for (std::size_t t = 0; t < truth.size(); ++t) right += truth[t] == guess[t];
    total += truth.size();
  }
  const double accuracy = static_cast<double>(right) / static_cast<double>(total);
  INFO(accuracy);
  CHECK(accuracy >= 0.99);
  CHECK(collapse_runs({1, 1, 2, 2, 2, 1, 3, 3}) == std::vector<int>{1, 2, 1, 3});
}

TEST_CASE("manifest loading") {
  const fs::path dir = scratch("manifest");
  save_vocabulary((dir / "vocab.txt").string(), default_vocabulary());

  write_text(dir / "empty.txt", "");
  const Corpus empty = load_manifest((dir / "empty.txt").string(), (dir / "vocab.txt").string());
  CHECK(empty.empty());

  audio::AudioClip clip;
  for (int i = 0; i < 4000; ++i) clip.samples.push_back(0.3 * std::sin(0.05 * i));
  audio::save_wav(clip, (dir / "a.wav").string());
  write_text(dir / "bad.txt", "u1|AA B|a.wav\nu2|AA ZZ B|a.wav\n");
  try {
    load_manifest((dir / "bad.txt").string(), (dir / "vocab.txt").string());
    FAIL("unknown symbol accepted");
  } catch (const FormatError& e) {
    const std::string what = e.what();
    CHECK(what.find("bad.txt:2") != std::string::npos);
    CHECK(what.find("ZZ") != std::string::npos);
  }
  write_text(dir / "missing.txt", "u1|AA B|nowhere.wav\n");
  CHECK_THROWS_AS(load_manifest((dir / "missing.txt").string(), (dir / "vocab.txt").string()),
                  IoError);

  write_text(dir / "wav.txt", "u1|AA B|a.wav\nu2|K AE T|a.wav\n");
  const Corpus wav = load_manifest((dir / "wav.txt").string(), (dir / "vocab.txt").string());
  REQUIRE(wav.size() == 2);
  CHECK(wav.items[0].features.cols() == audio::kMelBands);
  CHECK(wav.items[0].frames() == audio::stft_frame_count(4000, audio::kHop));
  CHECK(wav.items[1].phoneme_ids ==
        std::vector<int>{phoneme_id(wav.vocabulary, "K"), phoneme_id(wav.vocabulary, "AE"),
                         phoneme_id(wav.vocabulary, "T")});
  for (Real v : wav.items[0].features.values()) {
    CHECK(v >= 0);
    CHECK(v <= 1);
  }
}

TEST_CASE("synthetic corpus round-trips through a manifest") {
  const fs::path dir = scratch("roundtrip");
  SyntheticConfig c = small_corpus_config();
  const Corpus corpus = generate_synthetic_corpus(c);
  save_corpus(corpus, dir.string());
  const Corpus back = load_corpus(dir.string());
  REQUIRE(back.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(back.items[i].id == corpus.items[i].id);
    CHECK(back.items[i].phoneme_ids == corpus.items[i].phoneme_ids);
    CHECK(back.items[i].true_durations == corpus.items[i].true_durations);
    CHECK(std::equal(back.items[i].features.values().begin(),
                     back.items[i].features.values().end(),
                     corpus.items[i].features.values().begin()));
  }
  CHECK(back.stats.min == corpus.stats.min);
  CHECK(back.templates.shape() == corpus.templates.shape());
  CHECK(corpus_hash(back) == corpus_hash(corpus));
}

TEST_CASE("batch masks and padding neutrality") {
  const Corpus corpus = generate_synthetic_corpus(small_corpus_config());
  const std::vector<std::size_t> idx{0, 3, 5};
  const Batch tight = make_batch(corpus, idx);
  const Batch loose = make_batch(corpus, idx, tight.max_phonemes + 4, tight.max_frames + 17);
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto& u = corpus.items[idx[b]];
    CHECK(tight.item_phonemes(b) == u.phoneme_ids);
    for (std::size_t i = 0; i < loose.max_phonemes; ++i) {
      CHECK(loose.phoneme_mask.at(b, i) == (i < u.phoneme_ids.size() ? 1 : 0));
    }
    for (std::size_t t = 0; t < loose.max_frames; ++t) {
      CHECK(loose.frame_mask.at(b, t) == (t < u.frames() ? 1 : 0));
    }
  }
  nn::FpetsModel model(small_model_config());
  model.set_width_bias(corpus.mean_frames_per_phoneme());
  for (int stage : {1, 2}) {
    model.set_stage(stage);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const ItemLoss x = item_loss(model, tight, b);
      const ItemLoss y = item_loss(model, loose, b);
      CHECK(std::abs(x.total.item() - y.total.item()) <= 1e-9);
      CHECK(std::abs(x.acoustic.item() - y.acoustic.item()) <= 1e-9);
    }
  }
}

TEST_CASE("stage-1 training reports, determinism and resume") {
  const Corpus corpus = generate_synthetic_corpus(small_corpus_config());
  const fs::path dir = scratch("stage1");
  auto run = [&](std::size_t steps, const std::string& report) {
    nn::FpetsModel model(small_model_config());
    TrainConfig t = quick_train(steps);
    t.report_path = report;
    auto rep = train_stage1(corpus, model, t);
    return std::make_pair(rep, values_of(model, {""}));
  };
  const auto [a, pa] = run(8, (dir / "a.csv").string());
  const auto [b, pb] = run(8, (dir / "b.csv").string());
  REQUIRE(a.steps.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(a.steps[i].loss == b.steps[i].loss);
    CHECK(std::abs(a.steps[i].loss - (a.steps[i].loss_acou + 0.02 * a.steps[i].loss_align)) <=
          1e-9);
    CHECK(a.steps[i].loss_align >= 3);
  }
  CHECK(pa == pb);
  std::ifstream fa(dir / "a.csv"), fb(dir / "b.csv");
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  CHECK(sa.str() == sb.str());
  const auto rows = read_report((dir / "a.csv").string());
  REQUIRE(rows.size() == 8);
  CHECK(rows[7].loss == a.steps[7].loss);
  CHECK(rows[7].step == 8);

  // 4 steps, checkpoint, resume for 4 more.
  const std::string ck_path = (dir / "half.ckpt").string();
  {
    nn::FpetsModel model(small_model_config());
    TrainConfig t = quick_train(4);
    t.checkpoint_path = ck_path;
    t.report_path = (dir / "resumed.csv").string();
    train_stage1(corpus, model, t);
  }
  const Checkpoint ck = Checkpoint::load(ck_path);
  nn::FpetsModel model = nn::FpetsModel::from_checkpoint(ck);
  TrainConfig t = quick_train(8);
  t.report_path = (dir / "resumed.csv").string();
  Trainer trainer(model, corpus, t);
  trainer.resume(ck);
  CHECK(trainer.steps_done() == 4);
  const TrainReport rest = trainer.run();
  REQUIRE(rest.steps.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(rest.steps[i].loss == a.steps[4 + i].loss);
  CHECK(values_of(model, {""}) == pa);
  std::ifstream fr(dir / "resumed.csv");
  std::stringstream sr;
  sr << fr.rdbuf();
  CHECK(sr.str() == sa.str());
}

TEST_CASE("stage-2 training leaves the alignment module untouched") {
  const Corpus corpus = generate_synthetic_corpus(small_corpus_config());
  nn::FpetsModel model(small_model_config());
  train_stage1(corpus, model, quick_train(3));
  const auto before = values_of(model, {"align.", "codec."});
  const auto decoder_before = values_of(model, {"dec2."});
  const TrainReport rep = train_stage2(corpus, model, quick_train(4));
  CHECK(model.stage() == 2);
  CHECK(values_of(model, {"align.", "codec."}) == before);
  CHECK(values_of(model, {"dec2."}) != decoder_before);
  for (const auto& s : rep.steps) {
    CHECK(s.stage == 2);
    CHECK(s.loss_align == 0);
    CHECK(s.loss == s.loss_acou);
  }

  // Two different decoder learning rates give the same widths.
  Checkpoint ck;
  model.save(ck);
  std::vector<std::vector<Real>> widths;
  for (double lr : {1e-2, 1e-4}) {
    nn::FpetsModel m = nn::FpetsModel::from_checkpoint(ck);
    TrainConfig t = quick_train(2);
    t.learning_rate = lr;
    train_stage2(corpus, m, t);
    const Tensor r = m.predict_alignment_widths(corpus.items[0].phoneme_ids);
    widths.emplace_back(r.values().begin(), r.values().end());
  }
  CHECK(widths[0] == widths[1]);
}

TEST_CASE("alignment evaluation") {
  const Corpus corpus = generate_synthetic_corpus(SyntheticConfig{});
  nn::FpetsModel model{nn::ModelConfig{}};
  model.set_width_bias(corpus.mean_frames_per_phoneme());
  const auto truth = evaluate_alignment(corpus, model, DurationSource::kGroundTruth);
  CHECK(truth.average_diff <= 1.0);
  std::size_t n = 0;
  for (const auto& u : corpus.items) n += u.phoneme_ids.size();
  CHECK(truth.phonemes == n);

  const auto a = evaluate_alignment(corpus, model);
  const auto b = evaluate_alignment(corpus, model);
  CHECK(a.average_diff == b.average_diff);
  for (const auto& item : a.items) {
    double frames = 0;
    for (double w : item.predicted) frames += w;
    CHECK(frames > 0);
  }

  const fs::path dir = scratch("eval");
  write_alignment_csv(a, corpus.vocabulary, (dir / "a.csv").string());
  std::ifstream in(dir / "a.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "id,index,phoneme,real,resynth,abs_diff");
  double total = 0;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    const auto last = line.rfind(',');
    total += std::stod(line.substr(last + 1));
    ++rows;
  }
  CHECK(rows == a.phonemes);
  CHECK(std::abs(total / static_cast<double>(rows) - a.average_diff) < 1e-9);

  const std::string table = format_alignment_report(a, corpus.vocabulary, 1);
  CHECK(table.find("real") != std::string::npos);
  CHECK(table.find("resynth") != std::string::npos);
  CHECK(table.find(a.items[0].id) != std::string::npos);

  Corpus stripped = corpus;
  stripped.items[3].true_durations.clear();
  CHECK_THROWS_AS(evaluate_alignment(stripped, model), UsageError);
}

TEST_CASE("reconstruction loss and corpus split") {
  const Corpus corpus = generate_synthetic_corpus(small_corpus_config());
  const auto [head, tail] = split_corpus(corpus, 9);
  CHECK(head.size() == 9);
  CHECK(tail.size() == 3);
  CHECK(tail.items[0].id == corpus.items[9].id);
  nn::FpetsModel model(small_model_config());
  const double l1 = reconstruction_loss(model, tail);
  CHECK(std::isfinite(l1));
  CHECK(l1 == reconstruction_loss(model, tail));
  model.set_stage(2);
  CHECK(std::isfinite(reconstruction_loss(model, tail)));
}
