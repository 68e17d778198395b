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

// Dense row-major tensors with optional participation in a gradient tape.
//
// A Tensor is a cheap, shared handle: copying it aliases the same storage,
// exactly like the handles of the larger frameworks. Use clone() or detach()
// for an independent copy.

#ifndef FPETS_NUMCORE_TENSOR_H_
#define FPETS_NUMCORE_TENSOR_H_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fpets {

#ifdef FPETS_USE_FLOAT32
using Real = float;
#else
using Real = double;
#endif

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

class Tape;

namespace detail {

struct TensorData {
  Shape shape;
  std::vector<Real> value;
  std::vector<Real> grad;  // empty until first accumulation
  bool requires_grad = false;
  // Producing node on `tape`, or -1 for leaves.
  std::int64_t node = -1;
  const Tape* tape = nullptr;
  std::string tag;
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = Real(0));
  Tensor(Shape shape, std::vector<Real> values);

  static Tensor scalar(Real v);
  static Tensor vector(std::initializer_list<Real> values);
  static Tensor vector(std::span<const Real> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<Real>> rows);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  std::size_t dim(std::size_t axis) const;
  // First extent; for rank-2 tensors the second extent is cols().
  std::size_t rows() const { return dim(0); }
  std::size_t cols() const { return rank() >= 2 ? dim(1) : 1; }

  std::span<Real> values();
  std::span<const Real> values() const;
  Real* data() { return values().data(); }
  const Real* data() const { return values().data(); }

  Real& operator[](std::size_t i) { return impl_->value[i]; }
  Real operator[](std::size_t i) const { return impl_->value[i]; }
  Real& at(std::size_t i, std::size_t j);
  Real at(std::size_t i, std::size_t j) const;
  Real item() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);

  bool has_grad() const;
  // Allocates a zero gradient buffer if none exists yet.
  std::span<Real> grad();
  std::span<const Real> grad() const;
  void zero_grad();

  Tensor detach() const;
  Tensor clone() const { return detach(); }

  // Debug label; the tape audit uses it to find tagged ancestors.
  const std::string& tag() const;
  Tensor& set_tag(std::string tag);

  const std::shared_ptr<detail::TensorData>& handle() const { return impl_; }
  detail::TensorData* impl() const { return impl_.get(); }

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  std::shared_ptr<detail::TensorData> impl_;
};

// Integer id sequences (phonemes) travel as plain vectors.
using IdSequence = std::vector<int>;

}  // namespace fpets

#endif  // FPETS_NUMCORE_TENSOR_H_
