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

#include "fpets/training/corpus.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "fpets/numcore/checkpoint.h"
#include "fpets/numcore/errors.h"

namespace fpets::train {

namespace fs = std::filesystem;

namespace {

constexpr double kTemplateBase = -11.5;
constexpr double kTemplateRange = 8.0;

std::uint64_t mix(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::size_t Corpus::feature_dim() const {
  return items.empty() ? stats.dim() : items.front().features.cols();
}

double Corpus::mean_frames_per_phoneme() const {
  if (items.empty()) return 0.0;
  double total = 0;
  for (const auto& u : items) {
    total += static_cast<double>(u.frames()) / static_cast<double>(u.phoneme_ids.size());
  }
  return total / static_cast<double>(items.size());
}

bool Corpus::has_durations() const {
  if (items.empty()) return false;
  return std::all_of(items.begin(), items.end(),
                     [](const Utterance& u) { return u.has_durations(); });
}

const std::vector<std::string>& default_vocabulary() {
  static const std::vector<std::string> v = {
      "AA", "AE", "AH", "AO", "AW", "AY", "B",  "CH", "D",  "DH", "EH",
      "ER", "EY", "F",  "G",  "HH", "IH", "IY", "JH", "K",  "L",  "M",
      "N",  "NG", "OW", "OY", "P",  "R",  "S",  "SH", "T",  "TH", "UH",
      "UW", "V",  "W",  "Y",  "Z",  "ZH", "SIL", "SP"};
  return v;
}

int phoneme_id(const std::vector<std::string>& vocabulary, const std::string& symbol) {
  const auto it = std::find(vocabulary.begin(), vocabulary.end(), symbol);
  if (it == vocabulary.end()) throw FormatError("unknown phoneme symbol \"" + symbol + "\"");
  return static_cast<int>(it - vocabulary.begin());
}

std::vector<int> parse_phonemes(const std::vector<std::string>& vocabulary,
                                const std::string& text) {
  std::vector<int> ids;
  for (const auto& w : words(text)) ids.push_back(phoneme_id(vocabulary, w));
  return ids;
}

std::string format_phonemes(const std::vector<std::string>& vocabulary,
                            const std::vector<int>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocabulary.size()) {
      throw IndexError("phoneme id " + std::to_string(ids[i]) + " outside the vocabulary");
    }
    out += vocabulary[static_cast<std::size_t>(ids[i])];
  }
  return out;
}

std::vector<double> phoneme_template(std::size_t phoneme, std::size_t dim) {
  std::mt19937_64 rng(mix(0x7E3A11ULL + phoneme));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> t(dim, 0.0);
  const double d = static_cast<double>(dim);
  for (int k = 0; k < 3; ++k) {
    const double centre = u(rng) * d;
    const double width = (0.04 + 0.08 * u(rng)) * d;
    const double amp = 0.3 + 0.7 * u(rng);
    for (std::size_t b = 0; b < dim; ++b) {
      const double z = (static_cast<double>(b) - centre) / width;
      t[b] += amp * std::exp(-0.5 * z * z);
    }
  }
  const double peak = *std::max_element(t.begin(), t.end());
  for (double& v : t) v = kTemplateBase + kTemplateRange * v / peak;
  return t;
}

Corpus generate_synthetic_corpus(const SyntheticConfig& c) {
  if (c.alphabet_size < 2 || c.alphabet_size > default_vocabulary().size()) {
    throw ConfigError("alphabet_size must be in [2, " +
                      std::to_string(default_vocabulary().size()) + "]");
  }
  if (c.min_duration < 3 || c.max_duration > 20 || c.min_duration > c.max_duration) {
    throw ConfigError("duration range must lie within [3, 20] frames");
  }
  if (c.min_phonemes < 1 || c.min_phonemes > c.max_phonemes) {
    throw ConfigError("phoneme count range is empty");
  }
  if (c.feature_dim < 1) throw ConfigError("feature_dim must be positive");
  Corpus corpus;
  corpus.vocabulary = default_vocabulary();

  std::vector<std::vector<double>> raw_templates;
  for (std::size_t p = 0; p < c.alphabet_size; ++p) {
    raw_templates.push_back(phoneme_template(p, c.feature_dim));
  }

  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> noise(0.0, c.noise * kTemplateRange);
  std::vector<Tensor> raw;
  for (std::size_t n = 0; n < c.n_items; ++n) {
    Utterance u;
    char id[32];
    std::snprintf(id, sizeof id, "syn%04zu", n);
    u.id = id;
    const std::size_t tp =
        c.min_phonemes + static_cast<std::size_t>(rng() % (c.max_phonemes - c.min_phonemes + 1));
    std::size_t frames = 0;
    for (std::size_t i = 0; i < tp; ++i) {
      // Neighbours differ so that every boundary is observable.
      int p;
      do {
        p = static_cast<int>(rng() % c.alphabet_size);
      } while (!u.phoneme_ids.empty() && p == u.phoneme_ids.back());
      u.phoneme_ids.push_back(p);
      const std::size_t d =
          c.min_duration + static_cast<std::size_t>(rng() % (c.max_duration - c.min_duration + 1));
      u.true_durations.push_back(static_cast<double>(d));
      frames += d;
    }
    Tensor f(Shape{frames, c.feature_dim});
    std::size_t row = 0;
    for (std::size_t i = 0; i < tp; ++i) {
      const auto& t = raw_templates[static_cast<std::size_t>(u.phoneme_ids[i])];
      for (std::size_t k = 0; k < static_cast<std::size_t>(u.true_durations[i]); ++k, ++row) {
        for (std::size_t b = 0; b < c.feature_dim; ++b) {
          f.at(row, b) = static_cast<Real>(t[b] + noise(rng));
        }
      }
    }
    raw.push_back(f);
    corpus.items.push_back(std::move(u));
  }

  if (!raw.empty()) {
    corpus.stats = audio::compute_stats(raw);
  } else {
    corpus.stats.min.assign(c.feature_dim, kTemplateBase);
    corpus.stats.max.assign(c.feature_dim, kTemplateBase + kTemplateRange);
  }
  for (std::size_t n = 0; n < raw.size(); ++n) {
    corpus.items[n].features = audio::normalize_features(raw[n], corpus.stats);
  }
  Tensor tmpl(Shape{c.alphabet_size, c.feature_dim});
  for (std::size_t p = 0; p < c.alphabet_size; ++p) {
    for (std::size_t b = 0; b < c.feature_dim; ++b) tmpl.at(p, b) = raw_templates[p][b];
  }
  corpus.templates = audio::normalize_features(tmpl, corpus.stats);
  return corpus;
}

std::vector<int> classify_frames(const Tensor& features, const Tensor& templates) {
  if (features.cols() != templates.cols()) {
    throw DimensionError("classify_frames: feature width " + std::to_string(features.cols()) +
                         " vs template width " + std::to_string(templates.cols()));
  }
  std::vector<int> out(features.rows());
  for (std::size_t t = 0; t < features.rows(); ++t) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < templates.rows(); ++p) {
      double d = 0;
      for (std::size_t b = 0; b < features.cols(); ++b) {
        const double e = features.at(t, b) - templates.at(p, b);
        d += e * e;
      }
      if (d < best) {
        best = d;
        out[t] = static_cast<int>(p);
      }
    }
  }
  return out;
}

std::vector<int> expand_durations(const std::vector<int>& ids,
                                  const std::vector<double>& durations) {
  if (ids.size() != durations.size()) {
    throw DimensionError("expand_durations: " + std::to_string(ids.size()) + " ids vs " +
                         std::to_string(durations.size()) + " durations");
  }
  std::vector<int> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto n = static_cast<std::size_t>(std::llround(durations[i]));
    out.insert(out.end(), n, ids[i]);
  }
  return out;
}

std::vector<int> collapse_runs(const std::vector<int>& labels) {
  std::vector<int> out;
  for (int l : labels) {
    if (out.empty() || out.back() != l) out.push_back(l);
  }
  return out;
}

std::vector<std::string> load_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary " + path);
  std::vector<std::string> v;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": empty phoneme symbol");
    }
    if (std::find(v.begin(), v.end(), line) != v.end()) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": duplicate symbol \"" + line +
                        "\"");
    }
    v.push_back(line);
  }
  return v;
}

void save_vocabulary(const std::string& path, const std::vector<std::string>& vocabulary) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& s : vocabulary) out << s << '\n';
}

Corpus load_manifest(const std::string& manifest_path, const std::string& vocabulary_path) {
  Corpus corpus;
  corpus.vocabulary = load_vocabulary(vocabulary_path);
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open manifest " + manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();

  std::vector<Tensor> raw;  // WAV items, normalized once all are read
  std::vector<std::size_t> raw_slot;
  bool have_cache_stats = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = manifest_path + ":" + std::to_string(lineno) + ": ";
    if (trim(line).empty()) continue;
    const auto fields = split(line, '|');
    if (fields.size() != 3 && fields.size() != 4) {
      throw FormatError(where + "expected id|phonemes|path[|durations]");
    }
    Utterance u;
    u.id = trim(fields[0]);
    if (u.id.empty()) throw FormatError(where + "empty id");
    for (const auto& w : words(fields[1])) {
      const auto it = std::find(corpus.vocabulary.begin(), corpus.vocabulary.end(), w);
      if (it == corpus.vocabulary.end()) {
        throw FormatError(where + "unknown phoneme symbol \"" + w + "\"");
      }
      u.phoneme_ids.push_back(static_cast<int>(it - corpus.vocabulary.begin()));
    }
    if (u.phoneme_ids.empty()) throw FormatError(where + "no phonemes");
    if (fields.size() == 4) {
      for (const auto& w : words(fields[3])) {
        try {
          u.true_durations.push_back(std::stod(w));
        } catch (const std::exception&) {
          throw FormatError(where + "bad duration \"" + w + "\"");
        }
      }
      if (u.true_durations.size() != u.phoneme_ids.size()) {
        throw FormatError(where + "duration count does not match phoneme count");
      }
    }
    const std::string rel = trim(fields[2]);
    const fs::path path = base / rel;
    if (!fs::exists(path)) throw IoError(where + "missing file " + path.string());
    std::size_t frames = 0;
    if (ends_with(rel, ".fpc")) {
      audio::FeatureStats stats;
      audio::load_feature_cache(path.string(), &u.features, &stats);
      frames = u.features.rows();
      if (!have_cache_stats) {
        corpus.stats = stats;
        have_cache_stats = true;
      } else if (stats.min != corpus.stats.min || stats.max != corpus.stats.max) {
        throw FormatError(where + "feature cache statistics differ from earlier items");
      }
    } else {
      raw.push_back(audio::mel_spectrogram(audio::load_wav(path.string())));
      raw_slot.push_back(corpus.items.size());
      frames = raw.back().rows();
    }
    if (u.has_durations()) {
      double total = 0;
      for (double d : u.true_durations) total += d;
      if (std::llround(total) != static_cast<long long>(frames)) {
        throw FormatError(where + "durations sum to " + format_double(total) + ", not " +
                          std::to_string(frames) + " frames");
      }
    }
    corpus.items.push_back(std::move(u));
  }
  if (!raw.empty()) {
    if (have_cache_stats) {
      throw FormatError(manifest_path + ": mixes feature caches and audio files");
    }
    corpus.stats = audio::compute_stats(raw);
    for (std::size_t k = 0; k < raw.size(); ++k) {
      corpus.items[raw_slot[k]].features = audio::normalize_features(raw[k], corpus.stats);
    }
  }
  if (corpus.items.empty()) {
    std::fprintf(stderr, "warning: manifest %s has no entries\n", manifest_path.c_str());
  }
  const fs::path tmpl = base / "templates.fpc";
  if (fs::exists(tmpl)) audio::load_feature_cache(tmpl.string(), &corpus.templates, nullptr);
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root / "features");
  save_vocabulary((root / "vocab.txt").string(), corpus.vocabulary);
  std::ostringstream manifest;
  for (const auto& u : corpus.items) {
    const std::string rel = "features/" + u.id + ".fpc";
    audio::save_feature_cache((root / rel).string(), u.features, corpus.stats);
    manifest << u.id << '|' << format_phonemes(corpus.vocabulary, u.phoneme_ids) << '|' << rel;
    if (u.has_durations()) {
      manifest << '|';
      for (std::size_t i = 0; i < u.true_durations.size(); ++i) {
        if (i) manifest << ' ';
        manifest << format_double(u.true_durations[i]);
      }
    }
    manifest << '\n';
  }
  if (corpus.templates.defined() && corpus.templates.numel() > 0) {
    audio::save_feature_cache((root / "templates.fpc").string(), corpus.templates,
                              corpus.stats);
  }
  const std::string path = (root / "manifest.txt").string();
  std::ofstream out(path + ".tmp", std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << manifest.str();
  out.close();
  fs::rename(path + ".tmp", path);
}

Corpus load_corpus(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::exists(root / "manifest.txt")) {
    throw IoError("no manifest.txt in " + dir);
  }
  return load_manifest((root / "manifest.txt").string(), (root / "vocab.txt").string());
}

void save_corpus_meta(const Corpus& corpus, Checkpoint& ck) {
  std::string vocab;
  for (const auto& v : corpus.vocabulary) vocab += v + '\n';
  ck.put_string("data.vocabulary", vocab);
  ck.put("data.stats_min", Tensor(Shape{corpus.stats.dim()}, std::vector<Real>(
                                                                 corpus.stats.min.begin(),
                                                                 corpus.stats.min.end())));
  ck.put("data.stats_max", Tensor(Shape{corpus.stats.dim()}, std::vector<Real>(
                                                                 corpus.stats.max.begin(),
                                                                 corpus.stats.max.end())));
  if (corpus.templates.defined() && corpus.templates.numel() > 0) ck.put("data.templates", corpus.templates);
}

Corpus corpus_meta_from(const Checkpoint& ck) {
  if (!ck.has("data.vocabulary") || !ck.has("data.stats_min") || !ck.has("data.stats_max")) {
    throw FormatError("checkpoint carries no corpus vocabulary and statistics");
  }
  Corpus c;
  for (const auto& line : split(ck.get_string("data.vocabulary"), '\n')) {
    if (!line.empty()) c.vocabulary.push_back(line);
  }
  const auto lo = ck.get("data.stats_min").values();
  const auto hi = ck.get("data.stats_max").values();
  c.stats.min.assign(lo.begin(), lo.end());
  c.stats.max.assign(hi.begin(), hi.end());
  if (ck.has("data.templates")) c.templates = ck.get("data.templates").clone();
  return c;
}

std::uint64_t corpus_hash(const Corpus& corpus) {
  std::string bytes;
  auto put_real = [&](double v) {
    const auto b = std::bit_cast<std::uint64_t>(v);
    for (int k = 0; k < 8; ++k) bytes += static_cast<char>((b >> (8 * k)) & 0xFF);
  };
  for (const auto& s : corpus.vocabulary) bytes += s + '\n';
  for (const auto& u : corpus.items) {
    bytes += u.id + '|';
    for (int p : u.phoneme_ids) bytes += std::to_string(p) + ' ';
    for (double d : u.true_durations) put_real(d);
    bytes += std::to_string(u.features.rows()) + 'x' + std::to_string(u.features.cols());
    for (Real v : u.features.values()) put_real(v);
  }
  for (double v : corpus.stats.min) put_real(v);
  for (double v : corpus.stats.max) put_real(v);
  return fnv1a64(bytes);
}

std::vector<int> Batch::item_phonemes(std::size_t b) const {
  const auto first = phonemes.begin() + static_cast<std::ptrdiff_t>(b * max_phonemes);
  return {first, first + static_cast<std::ptrdiff_t>(phoneme_counts[b])};
}

Tensor Batch::item_padded_features(std::size_t b) const {
  const std::size_t d = feature_dim();
  const auto v = features.values();
  const auto first = v.begin() + static_cast<std::ptrdiff_t>(b * max_frames * d);
  return Tensor(Shape{max_frames, d},
                std::vector<Real>(first, first + static_cast<std::ptrdiff_t>(max_frames * d)));
}

Tensor Batch::item_frame_mask(std::size_t b) const {
  const auto v = frame_mask.values();
  const auto first = v.begin() + static_cast<std::ptrdiff_t>(b * max_frames);
  return Tensor(Shape{max_frames},
                std::vector<Real>(first, first + static_cast<std::ptrdiff_t>(max_frames)));
}

Batch make_batch(const Corpus& corpus, const std::vector<std::size_t>& indices,
                 std::size_t min_phonemes, std::size_t min_frames) {
  if (indices.empty()) throw UsageError("make_batch: empty batch");
  Batch b;
  b.indices = indices;
  b.max_phonemes = std::max<std::size_t>(min_phonemes, 1);
  b.max_frames = std::max<std::size_t>(min_frames, 1);
  for (std::size_t i : indices) {
    if (i >= corpus.size()) {
      throw IndexError("make_batch: item " + std::to_string(i) + " outside a corpus of " +
                       std::to_string(corpus.size()));
    }
    b.max_phonemes = std::max(b.max_phonemes, corpus.items[i].phoneme_ids.size());
    b.max_frames = std::max(b.max_frames, corpus.items[i].frames());
  }
  const std::size_t n = indices.size(), d = corpus.feature_dim();
  b.phonemes.assign(n * b.max_phonemes, -1);
  b.phoneme_mask = Tensor(Shape{n, b.max_phonemes}, 0.0);
  b.features = Tensor(Shape{n, b.max_frames, d}, 0.0);
  b.frame_mask = Tensor(Shape{n, b.max_frames}, 0.0);
  auto fv = b.features.values();
  for (std::size_t k = 0; k < n; ++k) {
    const Utterance& u = corpus.items[indices[k]];
    b.ids.push_back(u.id);
    b.phoneme_counts.push_back(u.phoneme_ids.size());
    b.frame_counts.push_back(u.frames());
    b.true_durations.push_back(u.true_durations);
    for (std::size_t i = 0; i < u.phoneme_ids.size(); ++i) {
      b.phonemes[k * b.max_phonemes + i] = u.phoneme_ids[i];
      b.phoneme_mask.at(k, i) = 1;
    }
    const auto src = u.features.values();
    std::copy(src.begin(), src.end(), fv.begin() + static_cast<std::ptrdiff_t>(k * b.max_frames * d));
    for (std::size_t t = 0; t < u.frames(); ++t) b.frame_mask.at(k, t) = 1;
  }
  return b;
}

}  // namespace fpets::train
