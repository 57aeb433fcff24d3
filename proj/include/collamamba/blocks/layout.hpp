#pragma once

#include <cstddef>
#include <string>
#include <utility>

#include "collamamba/core/error.hpp"
#include "collamamba/core/tensor.hpp"

namespace collamamba {

/// Spatial token grid, (batch, H, W, channels), row-major: token (i, j)
/// has flat index i * W + j.
template <typename T>
struct TokenGrid {
  Tensor<T> values;

  TokenGrid() = default;
  TokenGrid(std::size_t b, std::size_t h, std::size_t w, std::size_t c, T fill = T(0))
      : values({b, h, w, c}, fill) {}
  explicit TokenGrid(Tensor<T> t) : values(std::move(t)) {
    detail::require(values.rank() == 4, "token grid must be rank 4 (b, H, W, c), got " +
                                            shape_string(values.shape()));
  }

  std::size_t batch() const { return values.dim(0); }
  std::size_t height() const { return values.dim(1); }
  std::size_t width() const { return values.dim(2); }
  std::size_t channels() const { return values.dim(3); }
  std::size_t tokens() const { return height() * width(); }

  T* sample(std::size_t b) { return values.data() + b * tokens() * channels(); }
  const T* sample(std::size_t b) const { return values.data() + b * tokens() * channels(); }
};

/// Bird's-eye-view observation raster, (batch, h0, w0, c0). Rows follow y,
/// columns follow x.
template <typename T>
using BevGrid = TokenGrid<T>;

/// Stack of frames ordered oldest to newest, (batch, T, H, W, channels).
template <typename T>
struct FrameStack {
  Tensor<T> values;

  FrameStack() = default;
  FrameStack(std::size_t b, std::size_t t, std::size_t h, std::size_t w, std::size_t c, T fill = T(0))
      : values({b, t, h, w, c}, fill) {}
  explicit FrameStack(Tensor<T> t) : values(std::move(t)) {
    detail::require(values.rank() == 5, "frame stack must be rank 5 (b, T, H, W, c), got " +
                                            shape_string(values.shape()));
  }

  std::size_t batch() const { return values.dim(0); }
  std::size_t frames() const { return values.dim(1); }
  std::size_t height() const { return values.dim(2); }
  std::size_t width() const { return values.dim(3); }
  std::size_t channels() const { return values.dim(4); }
  std::size_t tokens_per_frame() const { return height() * width(); }

  T* sample(std::size_t b) { return values.data() + b * frames() * tokens_per_frame() * channels(); }
  const T* sample(std::size_t b) const {
    return values.data() + b * frames() * tokens_per_frame() * channels();
  }
};

/// Sequence-form feature, (batch, length, channels). This is the payload
/// agents exchange.
template <typename T>
struct FeatureSequence {
  Tensor<T> values;

  FeatureSequence() = default;
  FeatureSequence(std::size_t b, std::size_t l, std::size_t c, T fill = T(0)) : values({b, l, c}, fill) {}
  explicit FeatureSequence(Tensor<T> t) : values(std::move(t)) {
    detail::require(values.rank() == 3, "feature sequence must be rank 3 (b, l, c), got " +
                                            shape_string(values.shape()));
  }

  std::size_t batch() const { return values.dim(0); }
  std::size_t length() const { return values.dim(1); }
  std::size_t channels() const { return values.dim(2); }

  T* sample(std::size_t b) { return values.data() + b * length() * channels(); }
  const T* sample(std::size_t b) const { return values.data() + b * length() * channels(); }

  friend bool operator==(const FeatureSequence& a, const FeatureSequence& b) { return a.values == b.values; }
};

/// Row-major flattening of a grid into a sequence (no data movement).
template <typename T>
FeatureSequence<T> flatten(TokenGrid<T> grid) {
  const std::size_t b = grid.batch(), l = grid.tokens(), c = grid.channels();
  return FeatureSequence<T>(std::move(grid.values).reshaped({b, l, c}));
}

template <typename T>
TokenGrid<T> unflatten(FeatureSequence<T> seq, std::size_t h, std::size_t w) {
  detail::require(h * w == seq.length(), "sequence length " + std::to_string(seq.length()) +
                                             " does not factor into a " + std::to_string(h) + "x" +
                                             std::to_string(w) + " grid");
  const std::size_t b = seq.batch(), c = seq.channels();
  return TokenGrid<T>(std::move(seq.values).reshaped({b, h, w, c}));
}

}  // namespace collamamba
