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

#include "fpets/numcore/tensor.h"

#include <algorithm>
#include <sstream>
#include <utility>

#include "fpets/numcore/errors.h"

namespace fpets {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << " x ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

namespace {

void check_shape(const Shape& shape) {
  for (std::size_t e : shape) {
    if (e == 0) {
      throw DimensionError("tensor extents must be positive, got " +
                           shape_to_string(shape));
    }
  }
}

}  // namespace

Tensor::Tensor(Shape shape, Real fill)
    : impl_(std::make_shared<detail::TensorData>()) {
  check_shape(shape);
  impl_->value.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<Real> values)
    : impl_(std::make_shared<detail::TensorData>()) {
  check_shape(shape);
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_to_string(shape) + " needs " +
                         std::to_string(shape_numel(shape)) +
                         " values, got " + std::to_string(values.size()));
  }
  impl_->shape = std::move(shape);
  impl_->value = std::move(values);
}

Tensor Tensor::scalar(Real v) { return Tensor(Shape{1}, std::vector<Real>{v}); }

Tensor Tensor::vector(std::initializer_list<Real> values) {
  return Tensor(Shape{values.size()}, std::vector<Real>(values));
}

Tensor Tensor::vector(std::span<const Real> values) {
  return Tensor(Shape{values.size()},
                std::vector<Real>(values.begin(), values.end()));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<Real>> rows) {
  const std::size_t n = rows.size();
  const std::size_t m = n ? rows.begin()->size() : 0;
  std::vector<Real> v;
  v.reserve(n * m);
  for (const auto& row : rows) {
    if (row.size() != m) throw DimensionError("ragged matrix literal");
    v.insert(v.end(), row.begin(), row.end());
  }
  return Tensor(Shape{n, m}, std::move(v));
}

const Shape& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::numel() const { return impl_->value.size(); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= impl_->shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) +
                         " out of range for shape " +
                         shape_to_string(impl_->shape));
  }
  return impl_->shape[axis];
}

std::span<Real> Tensor::values() { return impl_->value; }
std::span<const Real> Tensor::values() const { return impl_->value; }

Real& Tensor::at(std::size_t i, std::size_t j) {
  return impl_->value[i * cols() + j];
}

Real Tensor::at(std::size_t i, std::size_t j) const {
  return impl_->value[i * cols() + j];
}

Real Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("item() on non-scalar tensor " +
                         shape_to_string(shape()));
  }
  return impl_->value[0];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  return *this;
}

bool Tensor::has_grad() const { return !impl_->grad.empty(); }

std::span<Real> Tensor::grad() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->value.size(), Real(0));
  return impl_->grad;
}

std::span<const Real> Tensor::grad() const { return impl_->grad; }

void Tensor::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), Real(0));
}

Tensor Tensor::detach() const {
  return Tensor(impl_->shape, impl_->value);
}

const std::string& Tensor::tag() const { return impl_->tag; }

Tensor& Tensor::set_tag(std::string tag) {
  impl_->tag = std::move(tag);
  return *this;
}

}  // namespace fpets
