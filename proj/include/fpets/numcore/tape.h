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

// Reverse-mode gradient tape.
//
// Ops record themselves on the tape that is current on the calling thread
// (see TapeScope). Recording happens only when at least one input requires
// a gradient, unless the tape is in trace mode, which records every op so
// that dataflow can be audited after an inference pass.

#ifndef FPETS_NUMCORE_TAPE_H_
#define FPETS_NUMCORE_TAPE_H_

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "fpets/numcore/tensor.h"

namespace fpets {

class Tape {
 public:
  struct Node {
    std::string op;
    std::vector<std::shared_ptr<detail::TensorData>> inputs;
    std::shared_ptr<detail::TensorData> output;
    std::function<void()> backward;
  };

  Tape() = default;
  explicit Tape(bool trace_all) : trace_all_(trace_all) {}
  ~Tape() { clear(); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool trace_all() const { return trace_all_; }

  void record(std::string_view op, std::initializer_list<const Tensor*> inputs,
              Tensor& output, std::function<void()> backward);

  // Seeds d(loss)/d(loss) = 1 and runs every recorded backward rule once,
  // newest first. Gradients accumulate into existing buffers.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_[i]; }
  void clear();

  // Indices of all nodes whose output flows into `t`, including its own
  // producer.
  std::vector<std::size_t> ancestors(const Tensor& t) const;
  // True when some strict ancestor of `t` carries `tag`.
  bool has_tagged_ancestor(const Tensor& t, std::string_view tag) const;

 private:
  std::vector<Node> nodes_;
  bool trace_all_ = false;
};

// The tape that ops on this thread record to, or nullptr.
Tape* current_tape();

class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Suspends recording on this thread.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

namespace detail {

// The tape an op with these inputs should record to, or nullptr.
Tape* recording_tape(std::initializer_list<const Tensor*> inputs);

// Gradient buffer of `d`, allocated on demand.
std::vector<Real>& grad_of(TensorData& d);

}  // namespace detail

}  // namespace fpets

#endif  // FPETS_NUMCORE_TAPE_H_
