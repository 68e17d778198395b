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

#ifndef FPETS_TRAINING_EVALUATE_H_
#define FPETS_TRAINING_EVALUATE_H_

#include <string>
#include <vector>

#include "fpets/nnmodel/model.h"
#include "fpets/training/corpus.h"

namespace fpets::train {

struct UtteranceAlignment {
  std::string id;
  std::vector<int> phonemes;
  std::vector<double> reference;
  std::vector<double> predicted;
  double mean_abs_diff = 0;
};

struct AlignmentReport {
  std::string label;
  std::vector<UtteranceAlignment> items;
  // Mean |predicted - reference| over every phoneme of every utterance.
  double average_diff = 0;
  std::size_t phonemes = 0;
};

enum class DurationSource {
  kModel,        // predicted widths r
  kGroundTruth,  // r = true durations
  kUniform,      // r_i = T_a / T_p
};

// Frames per phoneme in the inference hard attention built from r, against
// the true durations. Needs durations on every item.
AlignmentReport evaluate_alignment(const Corpus& corpus, const nn::FpetsModel& model,
                                   DurationSource source = DurationSource::kModel);

// Per utterance: a "phoneme" header row, then "real" and "resynth" rows.
std::string format_alignment_report(const AlignmentReport& report,
                                    const std::vector<std::string>& vocabulary,
                                    std::size_t max_items = 5);
// id,index,phoneme,real,resynth,abs_diff
void write_alignment_csv(const AlignmentReport& report,
                         const std::vector<std::string>& vocabulary, const std::string& path);

}  // namespace fpets::train

#endif  // FPETS_TRAINING_EVALUATE_H_
