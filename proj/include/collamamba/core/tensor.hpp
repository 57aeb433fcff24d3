#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "collamamba/core/error.hpp"

namespace collamamba {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

/// Dense row-major tensor. Every extent is at least one and the element count
/// always equals the product of the extents. A default-constructed tensor is
/// the empty placeholder (rank 0, no storage).
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(shape_size(shape_), fill);
  }

  Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), data_(std::move(values)) {
    validate_shape();
    detail::require(data_.size() == shape_size(shape_),
                    "tensor data length " + std::to_string(data_.size()) +
                        " does not match shape " + shape_string(shape_));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  template <typename... I>
  T& at(I... idx) {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <typename... I>
  const T& at(I... idx) const {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  /// Same storage, new extents. The element count must not change.
  Tensor reshaped(Shape shape) const& {
    Tensor out = *this;
    out.reshape(std::move(shape));
    return out;
  }
  Tensor reshaped(Shape shape) && {
    reshape(std::move(shape));
    return std::move(*this);
  }
  void reshape(Shape shape) {
    detail::require(shape_size(shape) == data_.size(),
                    "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    shape_ = std::move(shape);
    validate_shape();
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void validate_shape() const {
    for (std::size_t d : shape_)
      detail::require(d >= 1, "tensor extents must be >= 1, got " + shape_string(shape_));
  }

  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    detail::require(idx.size() == shape_.size(), "index rank mismatch");
    std::size_t off = 0;
    std::size_t k = 0;
    for (std::size_t i : idx) {
      detail::require(i < shape_[k], "index out of range");
      off = off * shape_[k] + i;
      ++k;
    }
    return off;
  }

  Shape shape_;
  std::vector<T> data_;
};

/// Bitwise equality, which distinguishes -0.0 from 0.0 and compares NaN payloads.
template <typename T>
bool bitwise_equal(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) return false;
  return std::equal(reinterpret_cast<const unsigned char*>(a.data()),
                    reinterpret_cast<const unsigned char*>(a.data() + a.size()),
                    reinterpret_cast<const unsigned char*>(b.data()));
}

template <typename T>
T max_abs_diff(std::span<const T> a, std::span<const T> b) {
  detail::require(a.size() == b.size(), "max_abs_diff: length mismatch");
  T m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require(a.shape() == b.shape(), "max_abs_diff: shape mismatch " +
                                              shape_string(a.shape()) + " vs " +
                                              shape_string(b.shape()));
  return max_abs_diff(a.values(), b.values());
}

}  // namespace collamamba
