#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace signbench {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);

/// Dense row-major array of doubles.
///
/// Invariant: product(shape) == size(). Extents are strictly positive; a
/// default-constructed Tensor is empty (rank 0, no data).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Flat offset of a multi-index (bounds-checked).
  std::size_t offset(std::initializer_list<std::size_t> index) const;
  double& at(std::initializer_list<std::size_t> index) { return data_[offset(index)]; }
  double at(std::initializer_list<std::size_t> index) const { return data_[offset(index)]; }

  /// Same data, new extents; throws ShapeError if the element count differs.
  Tensor reshaped(Shape shape) const;

  void fill(double value);
  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

std::size_t element_count(const Shape& shape);

/// Throws ShapeError naming `what` unless `t` has the given rank.
void require_rank(const Tensor& t, std::size_t rank, const char* what);

/// Throws NumericError naming `where` if `t` holds NaN or Inf.
void require_finite(const Tensor& t, const char* where);

}  // namespace signbench
