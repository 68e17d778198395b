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

#include "fpets/training/evaluate.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fpets/alignment/alignment.h"
#include "fpets/numcore/errors.h"
#include "fpets/numcore/tape.h"

namespace fpets::train {

namespace {

const char* source_label(DurationSource s) {
  switch (s) {
    case DurationSource::kModel: return "model";
    case DurationSource::kGroundTruth: return "ground-truth durations";
    case DurationSource::kUniform: return "uniform durations";
  }
  return "?";
}

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

AlignmentReport evaluate_alignment(const Corpus& corpus, const nn::FpetsModel& model,
                                   DurationSource source) {
  if (!corpus.has_durations()) {
    throw UsageError("alignment evaluation needs true durations on every utterance");
  }
  NoGradScope no_grad;
  AlignmentReport report;
  report.label = source_label(source);
  align::AttentionOptions options = model.attention_options();
  if (source != DurationSource::kModel) options.fixed_positions = false;
  double total = 0;
  for (const auto& u : corpus.items) {
    std::vector<double> r;
    if (source == DurationSource::kModel) {
      const Tensor widths = model.predict_alignment_widths(u.phoneme_ids);
      r.assign(widths.values().begin(), widths.values().end());
    } else if (source == DurationSource::kGroundTruth) {
      r = u.true_durations;
    } else {
      r.assign(u.phoneme_ids.size(),
               static_cast<double>(u.frames()) / static_cast<double>(u.phoneme_ids.size()));
    }
    double sum = 0;
    for (double v : r) sum += v;
    const auto t_a = static_cast<std::size_t>(std::max(1.0, std::round(sum)));
    const auto state = align::compute_alignment_state(r, t_a, model.codec(), options);
    const auto widths = align::brute_force_width(state.argmax, r.size());

    UtteranceAlignment item;
    item.id = u.id;
    item.phonemes = u.phoneme_ids;
    item.reference = u.true_durations;
    double diff = 0;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      item.predicted.push_back(static_cast<double>(widths[i]));
      diff += std::abs(item.predicted[i] - item.reference[i]);
    }
    item.mean_abs_diff = diff / static_cast<double>(widths.size());
    total += diff;
    report.phonemes += widths.size();
    report.items.push_back(std::move(item));
  }
  report.average_diff = report.phonemes ? total / static_cast<double>(report.phonemes) : 0.0;
  return report;
}

std::string format_alignment_report(const AlignmentReport& report,
                                    const std::vector<std::string>& vocabulary,
                                    std::size_t max_items) {
  std::ostringstream out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", report.average_diff);
  out << "alignment (" << report.label << "): average-diff " << buf << " frames over "
      << report.phonemes << " phonemes in " << report.items.size() << " utterances\n";
  const std::size_t n = std::min(max_items, report.items.size());
  for (std::size_t k = 0; k < n; ++k) {
    const auto& item = report.items[k];
    std::string rows[3] = {"phoneme", "real", "resynth"};
    for (auto& r : rows) r.resize(8, ' ');
    for (std::size_t i = 0; i < item.phonemes.size(); ++i) {
      const auto p = static_cast<std::size_t>(item.phonemes[i]);
      std::string cells[3] = {p < vocabulary.size() ? vocabulary[p] : std::to_string(p),
                              number(item.reference[i]), number(item.predicted[i])};
      std::size_t width = 0;
      for (const auto& c : cells) width = std::max(width, c.size());
      for (int r = 0; r < 3; ++r) {
        cells[r].insert(0, width + 1 - cells[r].size(), ' ');
        rows[r] += cells[r];
      }
    }
    std::snprintf(buf, sizeof buf, "%.4f", item.mean_abs_diff);
    out << '\n' << item.id << " (mean diff " << buf << ")\n";
    for (const auto& r : rows) out << r << '\n';
  }
  return out.str();
}

void write_alignment_csv(const AlignmentReport& report,
                         const std::vector<std::string>& vocabulary, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "id,index,phoneme,real,resynth,abs_diff\n";
  for (const auto& item : report.items) {
    for (std::size_t i = 0; i < item.phonemes.size(); ++i) {
      const auto p = static_cast<std::size_t>(item.phonemes[i]);
      out << item.id << ',' << i << ',' << (p < vocabulary.size() ? vocabulary[p] : "?") << ','
          << number(item.reference[i]) << ',' << number(item.predicted[i]) << ','
          << number(std::abs(item.predicted[i] - item.reference[i])) << '\n';
    }
  }
}

}  // namespace fpets::train
