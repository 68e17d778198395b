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

#ifndef FPETS_TRAINING_CORPUS_H_
#define FPETS_TRAINING_CORPUS_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fpets/audiofeat/audio.h"
#include "fpets/numcore/checkpoint.h"
#include "fpets/numcore/tensor.h"

namespace fpets::train {

struct Utterance {
  std::string id;
  std::vector<int> phoneme_ids;
  // Normalized features, T_a x D.
  Tensor features;
  // Frames per phoneme; empty unless known (synthetic corpus).
  std::vector<double> true_durations;

  std::size_t frames() const { return features.rows(); }
  bool has_durations() const { return !true_durations.empty(); }
};

struct Corpus {
  std::vector<Utterance> items;
  std::vector<std::string> vocabulary;
  audio::FeatureStats stats;
  // Normalized per-phoneme templates (alphabet x D); synthetic corpus only.
  Tensor templates;

  bool empty() const { return items.empty(); }
  std::size_t size() const { return items.size(); }
  std::size_t feature_dim() const;
  double mean_frames_per_phoneme() const;
  bool has_durations() const;
};

// ARPAbet phonemes plus silence and short pause.
const std::vector<std::string>& default_vocabulary();

int phoneme_id(const std::vector<std::string>& vocabulary, const std::string& symbol);
// Splits on whitespace; throws FormatError naming the unknown symbol.
std::vector<int> parse_phonemes(const std::vector<std::string>& vocabulary,
                                const std::string& text);
std::string format_phonemes(const std::vector<std::string>& vocabulary,
                            const std::vector<int>& ids);

struct SyntheticConfig {
  std::size_t n_items = 50;
  std::uint64_t seed = 7;
  std::size_t alphabet_size = 12;
  std::size_t min_duration = 4;
  std::size_t max_duration = 9;
  std::size_t min_phonemes = 4;
  std::size_t max_phonemes = 10;
  std::size_t feature_dim = audio::kMelBands;
  // Standard deviation of the per-frame noise, relative to the template range.
  double noise = 0.02;
};

// Raw log-mel template for one phoneme: a few smooth bumps over the bands.
// Depends only on the phoneme id and the dimension.
std::vector<double> phoneme_template(std::size_t phoneme, std::size_t dim);

Corpus generate_synthetic_corpus(const SyntheticConfig& config);

// Nearest template (Euclidean) for each frame.
std::vector<int> classify_frames(const Tensor& features, const Tensor& templates);
// Phoneme id of every frame implied by integer durations.
std::vector<int> expand_durations(const std::vector<int>& ids,
                                  const std::vector<double>& durations);
// Runs of equal labels collapsed to one.
std::vector<int> collapse_runs(const std::vector<int>& labels);

std::vector<std::string> load_vocabulary(const std::string& path);
void save_vocabulary(const std::string& path, const std::vector<std::string>& vocabulary);

// Manifest lines: "id|PH1 PH2 ...|path[|d1 d2 ...]". Paths are relative to
// the manifest directory. A ".fpc" path is a feature cache holding normalized
// features and corpus statistics; anything else is a WAV file whose log-mel
// features are normalized with statistics of the whole manifest. The optional
// fourth field carries true durations in frames.
Corpus load_manifest(const std::string& manifest_path, const std::string& vocabulary_path);

// Writes manifest.txt, vocab.txt, features/<id>.fpc and, when present,
// templates.fpc into dir.
void save_corpus(const Corpus& corpus, const std::string& dir);
Corpus load_corpus(const std::string& dir);

// Vocabulary, statistics and templates under "data.*" names, so a checkpoint
// can denormalize and parse phonemes without the corpus.
void save_corpus_meta(const Corpus& corpus, Checkpoint& ck);
// A corpus with no items; throws FormatError if the entries are missing.
Corpus corpus_meta_from(const Checkpoint& ck);

// FNV-1a over ids, phonemes, durations, feature bits and statistics.
std::uint64_t corpus_hash(const Corpus& corpus);

// Padded batch. Phoneme ids beyond an item's length are -1.
struct Batch {
  std::vector<std::size_t> indices;
  std::vector<std::string> ids;
  std::size_t max_phonemes = 0;
  std::size_t max_frames = 0;
  std::vector<int> phonemes;   // B x max_phonemes, row-major
  Tensor phoneme_mask;         // B x max_phonemes
  Tensor features;             // B x max_frames x D
  Tensor frame_mask;           // B x max_frames
  std::vector<std::size_t> phoneme_counts;
  std::vector<std::size_t> frame_counts;
  std::vector<std::vector<double>> true_durations;

  std::size_t size() const { return indices.size(); }
  std::size_t feature_dim() const { return features.dim(2); }
  std::vector<int> item_phonemes(std::size_t b) const;
  // max_frames x D slice of the padded features and its max_frames mask.
  Tensor item_padded_features(std::size_t b) const;
  Tensor item_frame_mask(std::size_t b) const;
};

// Pads to the longest item, or further when min_phonemes / min_frames ask.
Batch make_batch(const Corpus& corpus, const std::vector<std::size_t>& indices,
                 std::size_t min_phonemes = 0, std::size_t min_frames = 0);

}  // namespace fpets::train

#endif  // FPETS_TRAINING_CORPUS_H_
