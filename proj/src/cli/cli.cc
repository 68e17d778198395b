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

#include "fpets/cli/cli.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "fpets/alignment/alignment.h"
#include "fpets/audiofeat/audio.h"
#include "fpets/cli/bench.h"
#include "fpets/nnmodel/model.h"
#include "fpets/numcore/checkpoint.h"
#include "fpets/numcore/errors.h"
#include "fpets/numcore/parallel.h"
#include "fpets/numcore/tape.h"
#include "fpets/training/corpus.h"
#include "fpets/training/evaluate.h"
#include "fpets/training/trainer.h"
#include "json.hpp"

namespace fpets::cli {

namespace fs = std::filesystem;

namespace {

// Bad invocation, as opposed to a failure while running: exit code 2.
class InvocationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvocationError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void require_file(const std::string& path, const std::string& what) {
  if (!fs::exists(path)) throw InvocationError(what + " " + path + " does not exist");
}

struct ModelFlags {
  std::string config_path;
  std::vector<std::string> overrides;
  bool full_scale = false;

  void add(CLI::App* app) {
    app->add_option("--config", config_path, "model config file (key=value lines)");
    app->add_option("--set", overrides, "override one config key, key=value")
        ->type_name("KEY=VALUE");
    app->add_flag("--full-scale", full_scale, "start from the full-size layer settings");
  }
  bool given() const { return !config_path.empty() || !overrides.empty() || full_scale; }

  nn::ModelConfig build(std::uint64_t seed) const {
    nn::ModelConfig c = full_scale ? nn::ModelConfig::full_scale() : nn::ModelConfig{};
    c.seed = seed;
    if (!config_path.empty()) {
      require_file(config_path, "config");
      c = nn::ModelConfig::parse(read_file(config_path), c);
    }
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw InvocationError("--set expects key=value, got " + kv);
      c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    c.validate();
    return c;
  }
};

struct TrainFlags {
  std::string data;
  std::string ckpt_out;
  std::string report;
  std::size_t steps = 2000;
  std::size_t batch_size = 8;
  double lr = 3e-3;
  double codec_lr_scale = 10.0;
  std::size_t checkpoint_every = 0;
  std::size_t log_every = 100;
  std::uint64_t seed = 1;
  bool resume = false;
  bool no_timing = false;

  void add(CLI::App* app) {
    app->add_option("--data", data, "prepared data directory")->required();
    app->add_option("--ckpt-out", ckpt_out, "checkpoint to write")->required();
    app->add_option("--report", report, "training CSV (default: <ckpt-out>.csv)");
    app->add_option("--steps", steps, "total optimizer steps")->capture_default_str();
    app->add_option("--batch-size", batch_size)->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
    app->add_option("--codec-lr-scale", codec_lr_scale,
                    "learning-rate multiplier for the position frequencies")
        ->capture_default_str();
    app->add_option("--checkpoint-every", checkpoint_every, "0 writes only at the end")
        ->capture_default_str();
    app->add_option("--log-every", log_every, "progress line interval, 0 for none")
        ->capture_default_str();
    app->add_option("--seed", seed)->capture_default_str();
    app->add_flag("--resume", resume, "continue from the checkpoint at --ckpt-out");
    app->add_flag("--no-timing", no_timing, "write 0 for ms_per_step in the report");
  }

  train::TrainConfig config() const {
    train::TrainConfig t;
    t.steps = steps;
    t.batch_size = batch_size;
    t.learning_rate = lr;
    t.codec_lr_scale = codec_lr_scale;
    t.seed = seed;
    t.checkpoint_every = checkpoint_every;
    t.checkpoint_path = ckpt_out;
    t.report_path = report.empty() ? ckpt_out + ".csv" : report;
    t.record_timing = !no_timing;
    t.log_every = log_every;
    return t;
  }
};

train::Corpus load_data(const std::string& dir) {
  if (!fs::exists(fs::path(dir) / "manifest.txt")) {
    throw InvocationError("--data " + dir + " is not a prepared data directory");
  }
  return train::load_corpus(dir);
}

void check_config_hash(const nn::FpetsModel& model, const ModelFlags& flags,
                       std::uint64_t seed) {
  if (!flags.given()) return;
  const nn::ModelConfig wanted = flags.build(seed);
  if (wanted.hash() != model.config().hash()) {
    throw ConfigError("incompatible checkpoint: config hash " + hex(model.config().hash()) +
                      " differs from the requested " + hex(wanted.hash()));
  }
}

void summarize(const train::TrainReport& rep, const std::string& ckpt, std::ostream& out) {
  out << "stage " << rep.stage << ": " << rep.steps.size() << " steps";
  if (!rep.steps.empty()) {
    char buf[96];
    std::snprintf(buf, sizeof buf, ", loss %.6f -> %.6f", rep.steps.front().loss,
                  rep.steps.back().loss);
    out << buf;
  }
  if (rep.aborted_steps) out << ", " << rep.aborted_steps << " aborted";
  out << "\ncheckpoint: " << ckpt << '\n';
}

struct LoadedModel {
  Checkpoint ck;
  nn::FpetsModel model;
  train::Corpus meta;
};

LoadedModel load_model(const std::string& path) {
  require_file(path, "checkpoint");
  Checkpoint ck = Checkpoint::load(path);
  nn::FpetsModel model = nn::FpetsModel::from_checkpoint(ck);
  train::Corpus meta = train::corpus_meta_from(ck);
  return {std::move(ck), std::move(model), std::move(meta)};
}

// --- commands ---------------------------------------------------------------

struct PrepareFlags {
  std::string out_dir, manifest, vocab;
  std::size_t synthetic = 0;
  std::uint64_t seed = 7;
  std::size_t alphabet = 12, min_duration = 4, max_duration = 9;
};

int cmd_prepare(const PrepareFlags& f, std::ostream& out) {
  if (f.manifest.empty() == (f.synthetic == 0)) {
    throw InvocationError("prepare needs exactly one of --manifest or --synthetic N");
  }
  train::Corpus corpus;
  if (f.synthetic) {
    train::SyntheticConfig sc;
    sc.n_items = f.synthetic;
    sc.seed = f.seed;
    sc.alphabet_size = f.alphabet;
    sc.min_duration = f.min_duration;
    sc.max_duration = f.max_duration;
    corpus = train::generate_synthetic_corpus(sc);
  } else {
    require_file(f.manifest, "manifest");
    std::string vocab = f.vocab;
    if (vocab.empty()) {
      fs::create_directories(f.out_dir);
      vocab = (fs::path(f.out_dir) / "vocab.txt").string();
      train::save_vocabulary(vocab, train::default_vocabulary());
    } else {
      require_file(vocab, "vocabulary");
    }
    corpus = train::load_manifest(f.manifest, vocab);
  }
  const std::string hash = hex(train::corpus_hash(corpus));
  const fs::path hash_file = fs::path(f.out_dir) / "corpus.hash";
  if (fs::exists(hash_file) && fs::exists(fs::path(f.out_dir) / "manifest.txt")) {
    std::ifstream in(hash_file);
    std::string existing;
    in >> existing;
    if (existing == hash) {
      out << "up to date: " << corpus.size() << " items, hash " << hash << '\n';
      return kExitOk;
    }
  }
  train::save_corpus(corpus, f.out_dir);
  std::ofstream(hash_file) << hash << '\n';
  out << "prepared " << corpus.size() << " items in " << f.out_dir << ", hash " << hash << '\n';
  return kExitOk;
}

int cmd_train_stage1(const TrainFlags& t, const ModelFlags& m, std::ostream& out) {
  const train::Corpus corpus = load_data(t.data);
  train::TrainConfig tc = t.config();
  train::TrainReport rep;
  if (t.resume) {
    if (!fs::exists(t.ckpt_out)) throw InvocationError("--resume: no checkpoint at " + t.ckpt_out);
    const Checkpoint ck = Checkpoint::load(t.ckpt_out);
    nn::FpetsModel model = nn::FpetsModel::from_checkpoint(ck);
    if (model.stage() != 1) throw UsageError(t.ckpt_out + " is not a stage-1 checkpoint");
    check_config_hash(model, m, t.seed);
    train::Trainer trainer(model, corpus, tc);
    trainer.resume(ck);
    rep = trainer.run();
  } else {
    nn::FpetsModel model(m.build(t.seed));
    rep = train::train_stage1(corpus, model, tc);
  }
  train::append_report_rows(tc.report_path, {});
  summarize(rep, t.ckpt_out, out);
  return kExitOk;
}

int cmd_train_stage2(const TrainFlags& t, const ModelFlags& m, const std::string& init,
                     bool reinit_encoder, std::ostream& out) {
  if (init.empty() && !t.resume) {
    throw InvocationError("train-stage2 needs --init <stage-1 checkpoint> (or --resume)");
  }
  const train::Corpus corpus = load_data(t.data);
  train::TrainConfig tc = t.config();
  tc.reinitialize_encoder = reinit_encoder;
  train::TrainReport rep;
  if (t.resume) {
    if (!fs::exists(t.ckpt_out)) throw InvocationError("--resume: no checkpoint at " + t.ckpt_out);
    const Checkpoint ck = Checkpoint::load(t.ckpt_out);
    nn::FpetsModel model = nn::FpetsModel::from_checkpoint(ck);
    if (model.stage() != 2) throw UsageError(t.ckpt_out + " is not a stage-2 checkpoint");
    check_config_hash(model, m, model.config().seed);
    train::Trainer trainer(model, corpus, tc);
    trainer.resume(ck);
    rep = trainer.run();
  } else {
    require_file(init, "--init checkpoint");
    const Checkpoint ck = Checkpoint::load(init);
    nn::FpetsModel model = nn::FpetsModel::from_checkpoint(ck);
    if (model.stage() != 1) throw UsageError(init + " is not a stage-1 checkpoint");
    check_config_hash(model, m, model.config().seed);
    rep = train::train_stage2(corpus, model, tc);
  }
  train::append_report_rows(tc.report_path, {});
  summarize(rep, t.ckpt_out, out);
  return kExitOk;
}

struct SynthFlags {
  std::string ckpt, phonemes, out_wav, features_out;
  std::uint64_t seed = 0;
  int iterations = 60;
};

int cmd_synth(const SynthFlags& f, std::ostream& out) {
  LoadedModel lm = load_model(f.ckpt);
  if (lm.model.stage() != 2) {
    throw UsageError(f.ckpt + " is a stage-1 checkpoint; synthesis needs stage 2");
  }
  const std::vector<int> ids = train::parse_phonemes(lm.meta.vocabulary, f.phonemes);
  if (ids.empty()) throw InvocationError("--phonemes is empty");
  NoGradScope no_grad;
  lm.model.reset_decoder_evaluations();
  const nn::Stage2Output s2 = lm.model.stage2_forward(ids);
  if (!f.features_out.empty()) align::write_matrix_csv(f.features_out, s2.features);
  const Tensor raw = audio::denormalize_features(s2.features, lm.meta.stats);
  Tensor magnitude;
  if (raw.cols() == audio::kMelBands) {
    magnitude = audio::log_mel_to_magnitude(raw);
  } else if (raw.cols() == audio::kLinearBins) {
    magnitude = audio::log_linear_to_magnitude(raw);
  } else {
    throw ConfigError("cannot vocode " + std::to_string(raw.cols()) + "-dimensional features");
  }
  audio::GriffinLimConfig gl;
  gl.seed = f.seed;
  gl.iterations = f.iterations;
  const audio::GriffinLimResult res = audio::griffin_lim(magnitude, gl);
  const std::size_t clipped = audio::save_wav(res.clip, f.out_wav);
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "frames %zu (sum of widths %.3f), samples %zu, decoder evaluations %zu, "
                "spectral convergence %.4f, clipped %zu\n",
                s2.t_a, [&] {
                  double s = 0;
                  for (Real v : s2.r.values()) s += v;
                  return s;
                }(),
                res.clip.samples.size(), lm.model.decoder_evaluations(), res.convergence,
                clipped);
  out << buf << "wrote " << f.out_wav << '\n';
  return kExitOk;
}

struct EvalFlags {
  std::string ckpt, data, csv, baseline = "all";
  std::size_t max_items = 3;
};

int cmd_eval_align(const EvalFlags& f, std::ostream& out) {
  LoadedModel lm = load_model(f.ckpt);
  const train::Corpus corpus = load_data(f.data);
  if (!corpus.has_durations()) {
    throw UsageError("data in " + f.data + " carries no true durations");
  }
  const train::AlignmentReport model_report = train::evaluate_alignment(corpus, lm.model);
  out << train::format_alignment_report(model_report, corpus.vocabulary, f.max_items);
  if (!f.csv.empty()) train::write_alignment_csv(model_report, corpus.vocabulary, f.csv);
  std::vector<train::DurationSource> baselines;
  if (f.baseline == "all" || f.baseline == "ground-truth") {
    baselines.push_back(train::DurationSource::kGroundTruth);
  }
  if (f.baseline == "all" || f.baseline == "uniform") {
    baselines.push_back(train::DurationSource::kUniform);
  }
  for (auto source : baselines) {
    const auto rep = train::evaluate_alignment(corpus, lm.model, source);
    out << train::format_alignment_report(rep, corpus.vocabulary, 0);
  }
  return kExitOk;
}

struct BenchFlags {
  std::string ckpt, json;
  std::vector<std::size_t> lengths{10, 50, 100, 200};
  std::vector<std::size_t> frames;
  std::size_t repeat = 20, sequential_repeat = 3;
  bool vocoder = false;
  std::uint64_t seed = 0;
};

int cmd_bench(const BenchFlags& f, std::ostream& out) {
  LoadedModel lm = load_model(f.ckpt);
  set_kernel_threads(1);
  BenchConfig bc;
  bc.phoneme_lengths = f.lengths;
  bc.frame_lengths = f.frames;
  bc.repeat = f.repeat;
  bc.sequential_repeat = f.sequential_repeat;
  bc.vocoder = f.vocoder;
  bc.stats = lm.meta.stats;
  bc.seed = f.seed;
  const auto rows = run_benchmark(lm.model, bc);
  out << "kernel threads: " << kernel_threads() << '\n';
  out << "phonemes  frames  parallel_ms  looped_ms  ratio  vocoder_ms  calls(parallel/looped)\n";
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%8zu  %6zu  %11.3f  %9.3f  %5.1f  %10.3f  %zu/%zu\n",
                  r.phonemes, r.frames, r.parallel_ms, r.sequential_ms,
                  r.sequential_ms / r.parallel_ms, r.vocoder_ms, r.parallel_decoder_calls,
                  r.sequential_decoder_calls);
    out << buf;
    j.push_back({{"phonemes", r.phonemes},
                 {"frames", r.frames},
                 {"parallel_ms", r.parallel_ms},
                 {"sequential_ms", r.sequential_ms},
                 {"vocoder_ms", r.vocoder_ms},
                 {"parallel_decoder_calls", r.parallel_decoder_calls},
                 {"sequential_decoder_calls", r.sequential_decoder_calls}});
  }
  if (!f.json.empty()) {
    std::ofstream o(f.json);
    if (!o) throw IoError("cannot write " + f.json);
    o << j.dump(2) << '\n';
  }
  return kExitOk;
}

struct ExportFlags {
  std::string ckpt, phonemes, out_dir;
  std::size_t frames = 0;
};

int cmd_export_attention(const ExportFlags& f, std::ostream& out) {
  LoadedModel lm = load_model(f.ckpt);
  const std::vector<int> ids = train::parse_phonemes(lm.meta.vocabulary, f.phonemes);
  if (ids.empty()) throw InvocationError("--phonemes is empty");
  const Tensor r = lm.model.predict_alignment_widths(ids);
  const std::vector<double> rv(r.values().begin(), r.values().end());
  double total = 0;
  for (double v : rv) total += v;
  const std::size_t t_a =
      f.frames ? f.frames : static_cast<std::size_t>(std::max(1.0, std::round(total)));
  const auto st =
      align::compute_alignment_state(rv, t_a, lm.model.codec(), lm.model.attention_options());
  fs::create_directories(f.out_dir);
  const fs::path dir(f.out_dir);
  align::write_matrix_csv((dir / "soft.csv").string(), st.a_hat);
  align::write_matrix_pgm((dir / "soft.pgm").string(), st.a_hat);
  align::write_matrix_csv((dir / "hard.csv").string(), st.a_tilde);
  align::write_matrix_pgm((dir / "hard.pgm").string(), st.a_tilde);
  out << "attention " << t_a << " frames x " << ids.size() << " phonemes written to "
      << f.out_dir << " (soft.csv, soft.pgm, hard.csv, hard.pgm)\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fully parallel text-to-speech: data preparation, two-stage training, "
               "synthesis, alignment evaluation and benchmarking."};
  app.name("fpets");
  app.require_subcommand(1, 1);

  PrepareFlags pf;
  auto* prepare = app.add_subcommand("prepare", "build a feature cache from a manifest or "
                                                "generate a synthetic corpus");
  prepare->add_option("--out", pf.out_dir, "output directory")->required();
  prepare->add_option("--manifest", pf.manifest, "id|phonemes|audio manifest");
  prepare->add_option("--vocab", pf.vocab, "phoneme vocabulary (default: ARPAbet)");
  prepare->add_option("--synthetic", pf.synthetic, "number of synthetic utterances");
  prepare->add_option("--seed", pf.seed)->capture_default_str();
  prepare->add_option("--alphabet", pf.alphabet, "synthetic phoneme count")
      ->capture_default_str();
  prepare->add_option("--min-duration", pf.min_duration)->capture_default_str();
  prepare->add_option("--max-duration", pf.max_duration)->capture_default_str();

  TrainFlags t1, t2;
  ModelFlags m1, m2;
  auto* train1 = app.add_subcommand("train-stage1", "alignment learning with the CNN decoder");
  t1.add(train1);
  m1.add(train1);
  auto* train2 = app.add_subcommand("train-stage2", "UFANS decoder on a frozen alignment");
  t2.add(train2);
  m2.add(train2);
  std::string init;
  bool reinit = false;
  train2->add_option("--init", init, "stage-1 checkpoint");
  train2->add_flag("--reinit-encoder", reinit, "start the encoder from scratch");

  SynthFlags sf;
  auto* synth = app.add_subcommand("synth", "phonemes to WAV");
  synth->add_option("--ckpt", sf.ckpt, "stage-2 checkpoint")->required();
  synth->add_option("--phonemes", sf.phonemes, "space-separated symbols")->required();
  synth->add_option("--out", sf.out_wav, "output WAV")->required();
  synth->add_option("--features-out", sf.features_out, "normalized features as CSV");
  synth->add_option("--seed", sf.seed, "Griffin-Lim phase seed")->capture_default_str();
  synth->add_option("--iterations", sf.iterations, "Griffin-Lim iterations")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  EvalFlags ef;
  auto* eval = app.add_subcommand("eval-align", "predicted vs true phoneme durations");
  eval->add_option("--ckpt", ef.ckpt)->required();
  eval->add_option("--data", ef.data, "prepared data with durations")->required();
  eval->add_option("--csv", ef.csv, "per-phoneme CSV");
  eval->add_option("--baseline", ef.baseline, "extra reports")
      ->check(CLI::IsMember({"all", "ground-truth", "uniform", "none"}))
      ->capture_default_str();
  eval->add_option("--max-items", ef.max_items, "utterance tables to print")
      ->capture_default_str();

  BenchFlags bf;
  auto* bench = app.add_subcommand("bench", "parallel vs frame-looped synthesis latency");
  bench->add_option("--ckpt", bf.ckpt, "stage-2 checkpoint")->required();
  bench->add_option("--phoneme-lengths", bf.lengths)->delimiter(',')->capture_default_str();
  bench->add_option("--frame-lengths", bf.frames, "force output frame counts")
      ->delimiter(',');
  bench->add_option("--repeat", bf.repeat)->capture_default_str()->check(CLI::PositiveNumber);
  bench->add_option("--looped-repeat", bf.sequential_repeat)
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  bench->add_flag("--vocoder", bf.vocoder, "also time Griffin-Lim");
  bench->add_option("--json", bf.json, "write results as JSON");
  bench->add_option("--seed", bf.seed)->capture_default_str();

  ExportFlags xf;
  auto* exp = app.add_subcommand("export-attention", "soft and hard attention as PGM and CSV");
  exp->add_option("--ckpt", xf.ckpt)->required();
  exp->add_option("--phonemes", xf.phonemes)->required();
  exp->add_option("--out", xf.out_dir, "output directory")->required();
  exp->add_option("--frames", xf.frames, "frame count (default: round(sum r))");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "fpets: " << e.what() << "\n";
    if (!app.get_subcommands().empty()) {
      err << app.get_subcommands().front()->help();
    } else {
      err << app.help();
    }
    return kExitUsage;
  }

  try {
    if (prepare->parsed()) return cmd_prepare(pf, out);
    if (train1->parsed()) return cmd_train_stage1(t1, m1, out);
    if (train2->parsed()) return cmd_train_stage2(t2, m2, init, reinit, out);
    if (synth->parsed()) return cmd_synth(sf, out);
    if (eval->parsed()) return cmd_eval_align(ef, out);
    if (bench->parsed()) return cmd_bench(bf, out);
    if (exp->parsed()) return cmd_export_attention(xf, out);
  } catch (const InvocationError& e) {
    err << "fpets: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "fpets: error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace fpets::cli
