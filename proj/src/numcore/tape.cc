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

#include "fpets/numcore/tape.h"

#include <algorithm>
#include <utility>

#include "fpets/numcore/errors.h"

namespace fpets {

namespace {
thread_local Tape* g_current_tape = nullptr;
}  // namespace

Tape* current_tape() { return g_current_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_current_tape) {
  g_current_tape = &tape;
}

TapeScope::~TapeScope() { g_current_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_current_tape) {
  g_current_tape = nullptr;
}

NoGradScope::~NoGradScope() { g_current_tape = previous_; }

namespace detail {

Tape* recording_tape(std::initializer_list<const Tensor*> inputs) {
  Tape* tape = g_current_tape;
  if (tape == nullptr) return nullptr;
  if (tape->trace_all()) return tape;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return tape;
  }
  return nullptr;
}

std::vector<Real>& grad_of(TensorData& d) {
  if (d.grad.empty()) d.grad.assign(d.value.size(), Real(0));
  return d.grad;
}

}  // namespace detail

void Tape::record(std::string_view op,
                  std::initializer_list<const Tensor*> inputs, Tensor& output,
                  std::function<void()> backward) {
  Node node;
  node.op = std::string(op);
  bool any_grad = false;
  for (const Tensor* t : inputs) {
    node.inputs.push_back(t->handle());
    any_grad = any_grad || t->requires_grad();
  }
  output.set_requires_grad(any_grad);
  node.output = output.handle();
  node.backward = std::move(backward);
  output.impl()->node = static_cast<std::int64_t>(nodes_.size());
  output.impl()->tape = this;
  nodes_.push_back(std::move(node));
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw DimensionError("backward() needs a scalar loss, got shape " +
                         shape_to_string(loss.shape()));
  }
  if (loss.impl()->tape != this || loss.impl()->node < 0 ||
      !loss.requires_grad()) {
    throw UsageError("loss was not produced on this tape");
  }
  detail::grad_of(*loss.impl())[0] += Real(1);
  const auto last = static_cast<std::size_t>(loss.impl()->node);
  for (std::size_t i = last + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.output->grad.empty() || !node.output->requires_grad) continue;
    node.backward();
  }
}

void Tape::clear() {
  for (Node& node : nodes_) {
    if (node.output) {
      node.output->node = -1;
      node.output->tape = nullptr;
    }
  }
  nodes_.clear();
}

std::vector<std::size_t> Tape::ancestors(const Tensor& t) const {
  std::vector<std::size_t> out;
  if (t.impl()->tape != this || t.impl()->node < 0) return out;
  std::vector<char> seen(nodes_.size(), 0);
  std::vector<std::size_t> stack{static_cast<std::size_t>(t.impl()->node)};
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    if (seen[i]) continue;
    seen[i] = 1;
    out.push_back(i);
    for (const auto& in : nodes_[i].inputs) {
      if (in->tape == this && in->node >= 0) {
        stack.push_back(static_cast<std::size_t>(in->node));
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool Tape::has_tagged_ancestor(const Tensor& t, std::string_view tag) const {
  const std::int64_t self = t.impl()->node;
  for (std::size_t i : ancestors(t)) {
    if (static_cast<std::int64_t>(i) == self) continue;
    if (nodes_[i].output->tag == tag) return true;
  }
  return false;
}

}  // namespace fpets
