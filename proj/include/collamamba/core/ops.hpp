#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>

#include <Eigen/Core>

#include "collamamba/core/error.hpp"
#include "collamamba/core/tensor.hpp"

namespace collamamba::ops {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// out[rows x out_dim] = in[rows x in_dim] * W^T (+ bias), with W stored
/// (out_dim, in_dim) and `out` not aliasing `in`.
template <typename T>
void linear(const T* in, std::size_t rows, const Tensor<T>& weight, const Tensor<T>* bias, T* out) {
  detail::require(weight.rank() == 2, "linear: weight must be rank 2");
  const auto out_dim = static_cast<Eigen::Index>(weight.dim(0));
  const auto in_dim = static_cast<Eigen::Index>(weight.dim(1));
  const auto n = static_cast<Eigen::Index>(rows);
  if (n == 0) return;
  Eigen::Map<const RowMatrix<T>> x(in, n, in_dim);
  Eigen::Map<const RowMatrix<T>> w(weight.data(), out_dim, in_dim);
  Eigen::Map<RowMatrix<T>> y(out, n, out_dim);
  y.noalias() = x * w.transpose();
  if (bias) {
    detail::require(bias->size() == weight.dim(0), "linear: bias length mismatch");
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias->data(), out_dim);
    y.rowwise() += b;
  }
}

/// Layer normalization over the last `width` values of each row, in place.
template <typename T>
void layer_norm(T* data, std::size_t rows, std::size_t width, const Tensor<T>& gamma, const Tensor<T>& beta,
                T eps = T(1e-5)) {
  detail::require(gamma.size() == width && beta.size() == width, "layer_norm: affine length mismatch");
  for (std::size_t r = 0; r < rows; ++r) {
    T* x = data + r * width;
    T mean = 0;
    for (std::size_t i = 0; i < width; ++i) mean += x[i];
    mean /= static_cast<T>(width);
    T var = 0;
    for (std::size_t i = 0; i < width; ++i) var += (x[i] - mean) * (x[i] - mean);
    var /= static_cast<T>(width);
    const T inv = T(1) / std::sqrt(var + eps);
    for (std::size_t i = 0; i < width; ++i) x[i] = (x[i] - mean) * inv * gamma[i] + beta[i];
  }
}

template <typename T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
inline T silu(T x) {
  return x * sigmoid(x);
}

template <typename T>
inline T softplus(T x) {
  return x > T(20) ? x : std::log1p(std::exp(x));
}

template <typename T>
void silu_inplace(std::span<T> v) {
  for (T& x : v) x = silu(x);
}

/// Depthwise 2D convolution with zero "same" padding on an (H, W, C) grid.
/// weight: (C, k, k); bias: (C). `out` must not alias `in`.
template <typename T>
void depthwise_conv2d(const T* in, std::size_t H, std::size_t W, std::size_t C, const T* weight,
                      const T* bias, std::size_t k, T* out) {
  const long pad = static_cast<long>(k / 2);
  for (std::size_t i = 0; i < H; ++i)
    for (std::size_t j = 0; j < W; ++j) {
      T* o = out + (i * W + j) * C;
      for (std::size_t c = 0; c < C; ++c) o[c] = bias ? bias[c] : T(0);
      for (std::size_t di = 0; di < k; ++di) {
        const long ii = static_cast<long>(i) + static_cast<long>(di) - pad;
        if (ii < 0 || ii >= static_cast<long>(H)) continue;
        for (std::size_t dj = 0; dj < k; ++dj) {
          const long jj = static_cast<long>(j) + static_cast<long>(dj) - pad;
          if (jj < 0 || jj >= static_cast<long>(W)) continue;
          const T* x = in + (static_cast<std::size_t>(ii) * W + static_cast<std::size_t>(jj)) * C;
          const std::size_t tap = di * k + dj;
          for (std::size_t c = 0; c < C; ++c) o[c] += weight[c * k * k + tap] * x[c];
        }
      }
    }
}

/// Causal depthwise 1D convolution over a (L, C) sequence: output t sees
/// inputs t-width+1 .. t. weight: (C, width), last tap multiplies x_t.
template <typename T>
void causal_conv1d(const T* in, std::size_t L, std::size_t C, const T* weight, const T* bias,
                   std::size_t width, T* out) {
  for (std::size_t t = 0; t < L; ++t) {
    T* o = out + t * C;
    for (std::size_t c = 0; c < C; ++c) o[c] = bias ? bias[c] : T(0);
    for (std::size_t k = 0; k < width; ++k) {
      const std::size_t back = width - 1 - k;
      if (back > t) continue;
      const T* x = in + (t - back) * C;
      for (std::size_t c = 0; c < C; ++c) o[c] += weight[c * width + k] * x[c];
    }
  }
}

}  // namespace collamamba::ops
