#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bdnn {

using Shape = std::vector<std::size_t>;

std::size_t shape_product(const Shape& shape) noexcept;

/// Dense row-major float tensor, innermost dimension last.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);  // zero-filled
  Tensor(Shape shape, std::vector<float> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  const std::vector<float>& values() const noexcept { return data_; }

  float& operator[](std::size_t i) noexcept { return data_[i]; }
  float operator[](std::size_t i) const noexcept { return data_[i]; }

  float& at(std::span<const std::size_t> index);
  float at(std::span<const std::size_t> index) const;

  /// Reinterprets the same values under a new shape of equal product.
  Tensor reshaped(Shape shape) const;

  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

std::size_t flatten_index(const Shape& shape, std::span<const std::size_t> index);
std::vector<std::size_t> unflatten_index(const Shape& shape, std::size_t flat);

}  // namespace bdnn
