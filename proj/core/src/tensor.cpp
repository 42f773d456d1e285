#include "signbench/tensor.hpp"

#include <cmath>
#include <fmt/format.h>
#include <algorithm>
#include <utility>

#include "signbench/error.hpp"

namespace signbench {

std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return shape.empty() ? 0 : n;
}

namespace {

void check_extents(const Shape& shape) {
  for (auto extent : shape) {
    if (extent == 0) throw ShapeError("tensor extents must be positive, got " + to_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_extents(shape_);
  if (element_count(shape_) != data_.size()) {
    throw ShapeError(fmt::format("shape {} needs {} values, got {}", to_string(shape_),
                                 element_count(shape_), data_.size()));
  }
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError(fmt::format("axis {} out of range for shape {}", axis, to_string(shape_)));
  }
  return shape_[axis];
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw ShapeError(fmt::format("index of rank {} for tensor of shape {}", index.size(), to_string(shape_)));
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= shape_[axis]) {
      throw ShapeError(fmt::format("index {} out of range on axis {} of shape {}", i, axis, to_string(shape_)));
    }
    flat = flat * shape_[axis] + i;
    ++axis;
  }
  return flat;
}

Tensor Tensor::reshaped(Shape shape) const {
  if (element_count(shape) != data_.size()) {
    throw ShapeError(fmt::format("cannot reshape {} to {}", to_string(shape_), to_string(shape)));
  }
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(fmt::format("{}: expected rank {}, got shape {}", what, rank, to_string(t.shape())));
  }
}

void require_finite(const Tensor& t, const char* where) {
  if (!t.all_finite()) throw NumericError(fmt::format("non-finite value in {}", where));
}

}  // namespace signbench
