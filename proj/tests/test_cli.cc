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
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fpets/alignment/alignment.h"
#include "fpets/audiofeat/audio.h"
#include "fpets/cli/bench.h"
#include "fpets/cli/cli.h"
#include "fpets/nnmodel/model.h"
#include "fpets/numcore/checkpoint.h"
#include "json.hpp"

using namespace fpets;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result fpets_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Shared fixture: prepared data and small trained checkpoints, built once.
struct Workspace {
  fs::path root = fs::temp_directory_path() / "fpets_cli_test";
  fs::path data = root / "data";
  fs::path config = root / "tiny.cfg";
  fs::path stage1 = root / "s1.ckpt";
  fs::path stage2 = root / "s2.ckpt";

  Workspace() {
    fs::remove_all(root);
    fs::create_directories(root);
    std::ofstream(config) << "embedding_dim=8\nencoder_hidden=8\nencoder_filter=16\n"
                             "align_hidden=8\nalign_filter=16\nalign_layers=2\n"
                             "cnn_decoder_filter=16\nufans_decoder_hidden=8\n"
                             "ufans_decoder_filter=16\nufans_decoder_layers=3\n";
    REQUIRE(fpets_run({"prepare", "--synthetic", "10", "--seed", "3", "--out", data.string()})
                .code == 0);
    REQUIRE(fpets_run({"train-stage1", "--data", data.string(), "--config", config.string(),
                       "--steps", "3", "--batch-size", "2", "--ckpt-out", stage1.string(),
                       "--no-timing", "--log-every", "0"})
                .code == 0);
    REQUIRE(fpets_run({"train-stage2", "--data", data.string(), "--init", stage1.string(),
                       "--steps", "2", "--batch-size", "2", "--ckpt-out", stage2.string(),
                       "--no-timing", "--log-every", "0"})
                .code == 0);
  }
};

Workspace& workspace() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(fpets_run({}).code == 2);
  CHECK(fpets_run({"frobnicate"}).code == 2);
  CHECK(fpets_run({"prepare", "--out", "x", "--bogus"}).code == 2);
  CHECK(fpets_run({"synth", "--ckpt", "a"}).code == 2);
  const Result help = fpets_run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("train-stage1") != std::string::npos);
}

TEST_CASE("prepare") {
  const fs::path root = fs::temp_directory_path() / "fpets_cli_prepare";
  fs::remove_all(root);
  const Result a = fpets_run({"prepare", "--synthetic", "50", "--seed", "7", "--out",
                              (root / "a").string()});
  REQUIRE(a.code == 0);
  CHECK(a.out.find("prepared 50 items") != std::string::npos);
  const Result again = fpets_run({"prepare", "--synthetic", "50", "--seed", "7", "--out",
                                  (root / "a").string()});
  CHECK(again.code == 0);
  CHECK(again.out.find("up to date") != std::string::npos);
  REQUIRE(fpets_run({"prepare", "--synthetic", "50", "--seed", "7", "--out",
                     (root / "b").string()})
              .code == 0);
  CHECK(slurp(root / "a" / "manifest.txt") == slurp(root / "b" / "manifest.txt"));
  CHECK(slurp(root / "a" / "corpus.hash") == slurp(root / "b" / "corpus.hash"));
  CHECK(slurp(root / "a" / "features" / "syn0049.fpc") ==
        slurp(root / "b" / "features" / "syn0049.fpc"));

  const Result missing = fpets_run({"prepare", "--manifest", (root / "none.txt").string(),
                                    "--out", (root / "c").string()});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("none.txt") != std::string::npos);
  CHECK(fpets_run({"prepare", "--out", (root / "d").string()}).code == 2);

  // A manifest of audio files prepares features; it carries no durations.
  fs::create_directories(root / "wav");
  audio::AudioClip clip;
  for (int i = 0; i < 6000; ++i) clip.samples.push_back(0.2 * std::sin(0.07 * i));
  audio::save_wav(clip, (root / "wav" / "a.wav").string());
  std::ofstream(root / "wav" / "manifest.txt") << "a|HH AH L OW|a.wav\n";
  REQUIRE(fpets_run({"prepare", "--manifest", (root / "wav" / "manifest.txt").string(), "--out",
                     (root / "wavdata").string()})
              .code == 0);
  CHECK(fs::exists(root / "wavdata" / "features" / "a.fpc"));
  const Result bad = fpets_run({"eval-align", "--ckpt", workspace().stage1.string(), "--data",
                                (root / "wavdata").string()});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("durations") != std::string::npos);
}

TEST_CASE("training commands") {
  Workspace& w = workspace();
  CHECK(fs::exists(w.stage1));
  CHECK(fs::exists(w.stage1.string() + ".csv"));

  // --steps 0 writes the initial checkpoint and a header-only report.
  const fs::path zero = w.root / "zero.ckpt";
  REQUIRE(fpets_run({"train-stage1", "--data", w.data.string(), "--config", w.config.string(),
                     "--steps", "0", "--ckpt-out", zero.string()})
              .code == 0);
  CHECK(fs::exists(zero));
  CHECK(slurp(zero.string() + ".csv") == "step,stage,loss_acou,loss_align,loss,ms_per_step\n");

  // Same seed, same bytes.
  const fs::path again = w.root / "again.ckpt";
  REQUIRE(fpets_run({"train-stage1", "--data", w.data.string(), "--config", w.config.string(),
                     "--steps", "3", "--batch-size", "2", "--ckpt-out", again.string(),
                     "--no-timing", "--log-every", "0"})
              .code == 0);
  CHECK(slurp(again) == slurp(w.stage1));
  CHECK(slurp(again.string() + ".csv") == slurp(w.stage1.string() + ".csv"));

  // Resuming 2 -> 3 reproduces the straight run.
  const fs::path part = w.root / "part.ckpt";
  REQUIRE(fpets_run({"train-stage1", "--data", w.data.string(), "--config", w.config.string(),
                     "--steps", "2", "--batch-size", "2", "--ckpt-out", part.string(),
                     "--no-timing", "--log-every", "0"})
              .code == 0);
  REQUIRE(fpets_run({"train-stage1", "--data", w.data.string(), "--config", w.config.string(),
                     "--steps", "3", "--batch-size", "2", "--ckpt-out", part.string(),
                     "--no-timing", "--log-every", "0", "--resume"})
              .code == 0);
  CHECK(slurp(part) == slurp(w.stage1));
  CHECK(slurp(part.string() + ".csv") == slurp(w.stage1.string() + ".csv"));

  const Result mismatch =
      fpets_run({"train-stage1", "--data", w.data.string(), "--config", w.config.string(),
                 "--set", "encoder_hidden=10", "--steps", "4", "--ckpt-out", part.string(),
                 "--resume"});
  CHECK(mismatch.code == 1);
  CHECK(mismatch.err.find("config hash") != std::string::npos);
  CHECK(fpets_run({"train-stage1", "--data", w.data.string(), "--set", "encoder_kernel=4",
                   "--ckpt-out", (w.root / "x.ckpt").string()})
            .code == 1);

  const Result no_init = fpets_run({"train-stage2", "--data", w.data.string(), "--ckpt-out",
                                    (w.root / "y.ckpt").string()});
  CHECK(no_init.code == 2);
  CHECK(no_init.err.find("--init") != std::string::npos);
  CHECK(fpets_run({"train-stage2", "--data", w.data.string(), "--init", w.stage2.string(),
                   "--ckpt-out", (w.root / "y.ckpt").string(), "--steps", "1"})
            .code == 1);
  CHECK(fpets_run({"train-stage1", "--data", (w.root / "nodata").string(), "--ckpt-out",
                   (w.root / "z.ckpt").string()})
            .code == 2);

  const Checkpoint s2 = Checkpoint::load(w.stage2.string());
  CHECK(s2.get("meta.stage").item() == 2);
  const Checkpoint s1 = Checkpoint::load(w.stage1.string());
  for (const auto& [name, t] : s1.entries()) {
    if (name.rfind("align.", 0) == 0 || name.rfind("codec.", 0) == 0) {
      const auto other = s2.get(name).values();
      CHECK(std::equal(t.values().begin(), t.values().end(), other.begin()));
    }
  }
}

TEST_CASE("synth") {
  Workspace& w = workspace();
  const fs::path wav = w.root / "out.wav", wav2 = w.root / "out2.wav";
  const fs::path feats = w.root / "feats.csv";
  const Result r = fpets_run({"synth", "--ckpt", w.stage2.string(), "--phonemes", "AA B AE CH",
                              "--out", wav.string(), "--features-out", feats.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("decoder evaluations 1") != std::string::npos);
  REQUIRE(fpets_run({"synth", "--ckpt", w.stage2.string(), "--phonemes", "AA B AE CH", "--out",
                     wav2.string()})
              .code == 0);
  CHECK(slurp(wav) == slurp(wav2));

  // Frame count is round(sum r).
  const nn::FpetsModel model = nn::FpetsModel::from_checkpoint(Checkpoint::load(w.stage2.string()));
  const Tensor widths = model.predict_alignment_widths(std::vector<int>{0, 6, 1, 7});
  double total = 0;
  for (Real v : widths.values()) total += v;
  const Tensor f = align::read_matrix_csv(feats.string());
  CHECK(f.rows() == static_cast<std::size_t>(std::round(total)));
  CHECK(f.cols() == audio::kMelBands);
  const audio::AudioClip clip = audio::load_wav(wav.string());
  CHECK(clip.samples.size() == f.rows() * audio::kHop);

  CHECK(fpets_run({"synth", "--ckpt", w.stage1.string(), "--phonemes", "AA B", "--out",
                   wav.string()})
            .code == 1);
  const Result unknown = fpets_run({"synth", "--ckpt", w.stage2.string(), "--phonemes", "AA ZZ",
                                    "--out", wav.string()});
  CHECK(unknown.code == 1);
  CHECK(unknown.err.find("ZZ") != std::string::npos);
}

TEST_CASE("eval-align") {
  Workspace& w = workspace();
  const fs::path csv = w.root / "align.csv";
  const Result r = fpets_run({"eval-align", "--ckpt", w.stage1.string(), "--data",
                              w.data.string(), "--csv", csv.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("average-diff") != std::string::npos);
  CHECK(r.out.find("ground-truth durations") != std::string::npos);
  CHECK(r.out.find("resynth") != std::string::npos);
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  // First utterance row appears in the printed table too.
  const auto first = line.substr(0, line.find(','));
  CHECK(r.out.find(first) != std::string::npos);
  const Result again = fpets_run({"eval-align", "--ckpt", w.stage1.string(), "--data",
                                  w.data.string(), "--csv", (w.root / "align2.csv").string()});
  CHECK(again.out == r.out);
  CHECK(slurp(csv) == slurp(w.root / "align2.csv"));
}

TEST_CASE("bench asserts its structural counters") {
  Workspace& w = workspace();
  const fs::path json = w.root / "bench.json";
  const Result r = fpets_run({"bench", "--ckpt", w.stage2.string(), "--phoneme-lengths", "3,6",
                              "--repeat", "2", "--looped-repeat", "1", "--json", json.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("kernel threads: 1") != std::string::npos);
  const auto j = nlohmann::json::parse(slurp(json));
  REQUIRE(j.size() == 2);
  for (const auto& row : j) {
    CHECK(row["parallel_decoder_calls"] == 1);
    CHECK(row["sequential_decoder_calls"] == row["frames"]);
  }
  CHECK(fpets_run({"bench", "--ckpt", w.stage1.string(), "--phoneme-lengths", "3"}).code == 1);

  nn::FpetsModel model = nn::FpetsModel::from_checkpoint(Checkpoint::load(w.stage2.string()));
  cli::BenchConfig bc;
  bc.phoneme_lengths = {4};
  bc.frame_lengths = {37};
  bc.repeat = 1;
  bc.sequential_repeat = 1;
  const auto rows = cli::run_benchmark(model, bc);
  CHECK(rows[0].frames == 37);
  CHECK(rows[0].sequential_decoder_calls == 37);
}

TEST_CASE("export-attention") {
  Workspace& w = workspace();
  const fs::path dir = w.root / "attn";
  const Result r = fpets_run({"export-attention", "--ckpt", w.stage1.string(), "--phonemes",
                              "AA B AE CH D", "--out", dir.string()});
  REQUIRE(r.code == 0);
  const Tensor hard = align::read_matrix_csv((dir / "hard.csv").string());
  const Tensor soft = align::read_matrix_csv((dir / "soft.csv").string());
  CHECK(hard.shape() == soft.shape());
  CHECK(hard.cols() == 5);
  for (std::size_t j = 0; j < hard.rows(); ++j) {
    int ones = 0;
    for (std::size_t i = 0; i < hard.cols(); ++i) ones += hard.at(j, i) == 1;
    CHECK(ones == 1);
  }
  // The PGM of the hard matrix has one white pixel per row.
  const std::string pgm = slurp(dir / "hard.pgm");
  const std::string header = "P5\n5 " + std::to_string(hard.rows()) + "\n255\n";
  REQUIRE(pgm.rfind(header, 0) == 0);
  for (std::size_t j = 0; j < hard.rows(); ++j) {
    int white = 0;
    for (std::size_t i = 0; i < 5; ++i) {
      white += static_cast<unsigned char>(pgm[header.size() + j * 5 + i]) == 255;
    }
    CHECK(white == 1);
  }
  // CSV round trip is exact.
  align::write_matrix_csv((dir / "copy.csv").string(), soft);
  const Tensor back = align::read_matrix_csv((dir / "copy.csv").string());
  CHECK(std::equal(back.values().begin(), back.values().end(), soft.values().begin()));
}
