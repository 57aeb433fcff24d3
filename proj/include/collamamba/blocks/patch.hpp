#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "collamamba/blocks/layout.hpp"
#include "collamamba/blocks/params.hpp"
#include "collamamba/core/error.hpp"
#include "collamamba/core/ops.hpp"
#include "collamamba/core/tensor.hpp"

namespace collamamba {

// ---------------------------------------------------------------------------
// Dense 2D convolution

/// Dense convolution weights, (c_out, k, k, c_in), plus a bias per output.
template <typename T>
struct Conv2dParams {
  Tensor<T> weight;
  Tensor<T> bias;

  Conv2dParams() = default;
  Conv2dParams(std::size_t c_in, std::size_t c_out, std::size_t k) : weight({c_out, k, k, c_in}), bias({c_out}) {}

  std::size_t in_channels() const { return weight.dim(3); }
  std::size_t out_channels() const { return weight.dim(0); }
  std::size_t kernel() const { return weight.dim(1); }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(join_name(prefix, "weight"), weight, InitKind::FanIn);
    f(join_name(prefix, "bias"), bias, InitKind::Zeros);
  }
};

namespace detail {

/// Strided convolution of one (H, W, c_in) sample with zero padding `pad`
/// on every side. Output rows are lowered to patches and multiplied in one
/// GEMM per row.
template <typename T>
void conv2d_sample(const T* in, std::size_t H, std::size_t W, const Conv2dParams<T>& p, std::size_t stride,
                   std::size_t pad, std::size_t Ho, std::size_t Wo, T* out) {
  const std::size_t ci = p.in_channels(), co = p.out_channels(), k = p.kernel();
  const std::size_t patch = k * k * ci;
  std::vector<T> cols(Wo * patch);
  Eigen::Map<const ops::RowMatrix<T>> w(p.weight.data(), static_cast<Eigen::Index>(co),
                                        static_cast<Eigen::Index>(patch));
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bias(p.bias.data(), static_cast<Eigen::Index>(co));
  for (std::size_t i = 0; i < Ho; ++i) {
    std::fill(cols.begin(), cols.end(), T(0));
    for (std::size_t j = 0; j < Wo; ++j) {
      T* col = &cols[j * patch];
      for (std::size_t di = 0; di < k; ++di) {
        const long ii = static_cast<long>(i * stride + di) - static_cast<long>(pad);
        if (ii < 0 || ii >= static_cast<long>(H)) continue;
        for (std::size_t dj = 0; dj < k; ++dj) {
          const long jj = static_cast<long>(j * stride + dj) - static_cast<long>(pad);
          if (jj < 0 || jj >= static_cast<long>(W)) continue;
          std::copy_n(in + (static_cast<std::size_t>(ii) * W + static_cast<std::size_t>(jj)) * ci, ci,
                      col + (di * k + dj) * ci);
        }
      }
    }
    Eigen::Map<const ops::RowMatrix<T>> x(cols.data(), static_cast<Eigen::Index>(Wo),
                                          static_cast<Eigen::Index>(patch));
    Eigen::Map<ops::RowMatrix<T>> y(out + i * Wo * co, static_cast<Eigen::Index>(Wo), static_cast<Eigen::Index>(co));
    y.noalias() = x * w.transpose();
    y.rowwise() += bias;
  }
}

}  // namespace detail

/// Stride-1 convolution with "same" zero padding; the kernel must be odd.
template <typename T>
TokenGrid<T> conv2d_same(const TokenGrid<T>& grid, const Conv2dParams<T>& p) {
  detail::require(grid.channels() == p.in_channels(), "conv2d: channel mismatch");
  detail::require(p.kernel() % 2 == 1, "conv2d: kernel must be odd");
  const std::size_t H = grid.height(), W = grid.width();
  TokenGrid<T> out(grid.batch(), H, W, p.out_channels());
  for (std::size_t b = 0; b < grid.batch(); ++b)
    detail::conv2d_sample(grid.sample(b), H, W, p, 1, p.kernel() / 2, H, W, out.sample(b));
  return out;
}

inline std::uint64_t conv2d_flops(std::uint64_t out_tokens, std::uint64_t c_in, std::uint64_t c_out, std::uint64_t k) {
  return out_tokens * (2 * k * k * c_in * c_out + c_out);
}

// ---------------------------------------------------------------------------
// Patch embedding

/// Overlapping patch embedding: convolution with kernel `patch`, step
/// `stride` and (patch - stride) / 2 zero padding per side, then layer norm.
template <typename T>
struct PatchEmbedParams {
  std::size_t stride = 4;
  Conv2dParams<T> proj;
  Tensor<T> norm_weight, norm_bias;

  PatchEmbedParams() = default;
  PatchEmbedParams(std::size_t c_in, std::size_t c_out, std::size_t patch, std::size_t stride_)
      : stride(stride_), proj(c_in, c_out, patch), norm_weight({c_out}, T(1)), norm_bias({c_out}) {
    detail::require(c_in >= 1, "patch_embed: input channels must be >= 1");
    detail::require(patch >= stride && stride >= 1 && (patch - stride) % 2 == 0,
                    "patch_embed: patch - stride must be even and non-negative");
  }

  std::size_t patch() const { return proj.kernel(); }
  std::size_t pad() const { return (patch() - stride) / 2; }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    proj.visit(join_name(prefix, "proj"), f);
    f(join_name(prefix, "norm.weight"), norm_weight, InitKind::Ones);
    f(join_name(prefix, "norm.bias"), norm_bias, InitKind::Zeros);
  }
};

template <typename T>
PatchEmbedParams<T> make_patch_embed(std::size_t c_in, long c_out, std::size_t patch, std::size_t stride) {
  detail::require(c_out > 0, "patch_embed: c_out must be positive, got " + std::to_string(c_out));
  return PatchEmbedParams<T>(c_in, static_cast<std::size_t>(c_out), patch, stride);
}

namespace detail {
/// One (H, W, c_in) raster to (H / stride, W / stride, c_out) tokens.
template <typename T>
void patch_embed_sample(const T* in, std::size_t H, std::size_t W, const PatchEmbedParams<T>& p, T* out) {
  const std::size_t Ho = H / p.stride, Wo = W / p.stride, co = p.proj.out_channels();
  conv2d_sample(in, H, W, p.proj, p.stride, p.pad(), Ho, Wo, out);
  ops::layer_norm(out, Ho * Wo, co, p.norm_weight, p.norm_bias);
}
}  // namespace detail

template <typename T>
TokenGrid<T> patch_embed(const BevGrid<T>& bev, const PatchEmbedParams<T>& p) {
  detail::require(bev.channels() == p.proj.in_channels(),
                  "patch_embed: expected " + std::to_string(p.proj.in_channels()) + " input channels, got " +
                      std::to_string(bev.channels()));
  const std::size_t H = bev.height(), W = bev.width(), s = p.stride;
  detail::require(H % s == 0 && W % s == 0, "patch_embed: grid " + std::to_string(H) + "x" + std::to_string(W) +
                                                " is not divisible by stride " + std::to_string(s));
  TokenGrid<T> out(bev.batch(), H / s, W / s, p.proj.out_channels());
  for (std::size_t b = 0; b < bev.batch(); ++b) detail::patch_embed_sample(bev.sample(b), H, W, p, out.sample(b));
  return out;
}

inline std::uint64_t patch_embed_flops(std::uint64_t out_tokens, std::uint64_t c_in, std::uint64_t c_out,
                                       std::uint64_t patch) {
  return conv2d_flops(out_tokens, c_in, c_out, patch) + out_tokens * 5 * c_out;
}

// ---------------------------------------------------------------------------
// Positional embeddings

enum class EmbedKind { Spatial, Temporal };

/// Spatial table (1, H, W, c).
template <typename T>
Tensor<T> make_spatial_embedding(std::size_t H, std::size_t W, std::size_t c) {
  return Tensor<T>({1, H, W, c});
}

/// Temporal table (1, 1, 1, T, c): one vector per frame, shared by all
/// positions.
template <typename T>
Tensor<T> make_temporal_embedding(std::size_t frames, std::size_t c) {
  return Tensor<T>({1, 1, 1, frames, c});
}

template <typename T>
void add_pos_embed(TokenGrid<T>& grid, const Tensor<T>& table) {
  const Shape want{1, grid.height(), grid.width(), grid.channels()};
  detail::require(table.shape() == want, "spatial embedding " + shape_string(table.shape()) +
                                             " does not match grid " + shape_string(want));
  const std::size_t n = table.size();
  for (std::size_t b = 0; b < grid.batch(); ++b) {
    T* x = grid.sample(b);
    for (std::size_t i = 0; i < n; ++i) x[i] += table[i];
  }
}

template <typename T>
void add_pos_embed(FrameStack<T>& frames, const Tensor<T>& table, EmbedKind kind) {
  const std::size_t F = frames.frames(), hw = frames.tokens_per_frame(), c = frames.channels();
  if (kind == EmbedKind::Spatial) {
    const Shape want{1, frames.height(), frames.width(), c};
    detail::require(table.shape() == want, "spatial embedding " + shape_string(table.shape()) +
                                               " does not match frames " + shape_string(want));
    for (std::size_t b = 0; b < frames.batch(); ++b)
      for (std::size_t f = 0; f < F; ++f) {
        T* x = frames.sample(b) + f * hw * c;
        for (std::size_t i = 0; i < hw * c; ++i) x[i] += table[i];
      }
    return;
  }
  const Shape want{1, 1, 1, F, c};
  detail::require(table.shape() == want, "temporal embedding " + shape_string(table.shape()) +
                                             " does not match frames " + shape_string(want));
  for (std::size_t b = 0; b < frames.batch(); ++b)
    for (std::size_t f = 0; f < F; ++f) {
      T* x = frames.sample(b) + f * hw * c;
      const T* e = table.data() + f * c;
      for (std::size_t i = 0; i < hw; ++i)
        for (std::size_t ch = 0; ch < c; ++ch) x[i * c + ch] += e[ch];
    }
}

// ---------------------------------------------------------------------------
// 2x downsampling

/// Concatenates each 2x2 neighbourhood in the order (0,0), (1,0), (0,1),
/// (1,1), layer-normalizes the 4c vector and projects it to c without bias.
template <typename T>
struct PatchMergeParams {
  Tensor<T> norm_weight, norm_bias;  // (4c)
  Tensor<T> reduction_weight;        // (c, 4c)

  PatchMergeParams() = default;
  explicit PatchMergeParams(std::size_t c)
      : norm_weight({4 * c}, T(1)), norm_bias({4 * c}), reduction_weight({c, 4 * c}) {}

  std::size_t channels() const { return reduction_weight.dim(0); }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(join_name(prefix, "norm.weight"), norm_weight, InitKind::Ones);
    f(join_name(prefix, "norm.bias"), norm_bias, InitKind::Zeros);
    f(join_name(prefix, "reduction.weight"), reduction_weight, InitKind::FanIn);
  }
};

/// Halves each extent, rounding up: an odd grid gets one zero row/column
/// appended at the bottom/right.
template <typename T>
TokenGrid<T> patch_merge_down(const TokenGrid<T>& grid, const PatchMergeParams<T>& p) {
  const std::size_t c = grid.channels();
  detail::require(c == p.channels(), "patch_merge_down: channel mismatch");
  const std::size_t H = grid.height(), W = grid.width(), Ho = (H + 1) / 2, Wo = (W + 1) / 2;
  TokenGrid<T> out(grid.batch(), Ho, Wo, c);
  std::vector<T> cat(Ho * Wo * 4 * c);
  static constexpr std::size_t kOffsets[4][2] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  for (std::size_t b = 0; b < grid.batch(); ++b) {
    const T* x = grid.sample(b);
    std::fill(cat.begin(), cat.end(), T(0));
    for (std::size_t i = 0; i < Ho; ++i)
      for (std::size_t j = 0; j < Wo; ++j)
        for (std::size_t q = 0; q < 4; ++q) {
          const std::size_t ii = 2 * i + kOffsets[q][0], jj = 2 * j + kOffsets[q][1];
          if (ii >= H || jj >= W) continue;
          std::copy_n(x + (ii * W + jj) * c, c, &cat[((i * Wo + j) * 4 + q) * c]);
        }
    ops::layer_norm(cat.data(), Ho * Wo, 4 * c, p.norm_weight, p.norm_bias);
    ops::linear(cat.data(), Ho * Wo, p.reduction_weight, static_cast<const Tensor<T>*>(nullptr), out.sample(b));
  }
  return out;
}

inline std::uint64_t patch_merge_flops(std::uint64_t out_tokens, std::uint64_t c) {
  return out_tokens * (5 * 4 * c + 2 * 4 * c * c);
}

// ---------------------------------------------------------------------------
// 2x upsampling

/// One expansion stage: linear c -> 4c without bias, pixel shuffle to a 2x
/// grid (output (2i+di, 2j+dj) takes channel block 2*di + dj), layer norm.
template <typename T>
struct PatchExpandParams {
  Tensor<T> expand_weight;           // (4c, c)
  Tensor<T> norm_weight, norm_bias;  // (c)

  PatchExpandParams() = default;
  explicit PatchExpandParams(std::size_t c) : expand_weight({4 * c, c}), norm_weight({c}, T(1)), norm_bias({c}) {}

  std::size_t channels() const { return expand_weight.dim(1); }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(join_name(prefix, "expand.weight"), expand_weight, InitKind::FanIn);
    f(join_name(prefix, "norm.weight"), norm_weight, InitKind::Ones);
    f(join_name(prefix, "norm.bias"), norm_bias, InitKind::Zeros);
  }
};

template <typename T>
TokenGrid<T> patch_expand(const TokenGrid<T>& grid, const PatchExpandParams<T>& p) {
  const std::size_t c = grid.channels();
  detail::require(c == p.channels(), "patch_expand: channel mismatch");
  const std::size_t H = grid.height(), W = grid.width(), Wo = 2 * W;
  TokenGrid<T> out(grid.batch(), 2 * H, Wo, c);
  std::vector<T> wide(H * W * 4 * c);
  for (std::size_t b = 0; b < grid.batch(); ++b) {
    ops::linear(grid.sample(b), H * W, p.expand_weight, static_cast<const Tensor<T>*>(nullptr), wide.data());
    T* y = out.sample(b);
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j)
        for (std::size_t di = 0; di < 2; ++di)
          for (std::size_t dj = 0; dj < 2; ++dj)
            std::copy_n(&wide[((i * W + j) * 4 + 2 * di + dj) * c], c, y + ((2 * i + di) * Wo + 2 * j + dj) * c);
    ops::layer_norm(y, 4 * H * W, c, p.norm_weight, p.norm_bias);
  }
  return out;
}

inline std::uint64_t patch_expand_flops(std::uint64_t in_tokens, std::uint64_t c) {
  return in_tokens * 2 * c * 4 * c + 4 * in_tokens * 5 * c;
}

/// Bilinear resampling with half-pixel centers (align_corners = false).
/// Same-size resampling is an exact copy.
template <typename T>
TokenGrid<T> bilinear_resize(const TokenGrid<T>& grid, std::size_t Ho, std::size_t Wo) {
  detail::require(Ho >= 1 && Wo >= 1, "bilinear_resize: target extents must be >= 1");
  const std::size_t H = grid.height(), W = grid.width(), c = grid.channels();
  if (H == Ho && W == Wo) return grid;
  struct Tap {
    std::size_t lo, hi;
    double w;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
      const double src = std::max(0.0, (static_cast<double>(o) + 0.5) * scale - 0.5);
      const auto lo = std::min(static_cast<std::size_t>(src), in - 1);
      t[o] = {lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
    }
    return t;
  };
  const auto ty = taps(H, Ho), tx = taps(W, Wo);
  TokenGrid<T> out(grid.batch(), Ho, Wo, c);
  for (std::size_t b = 0; b < grid.batch(); ++b) {
    const T* x = grid.sample(b);
    T* y = out.sample(b);
    for (std::size_t i = 0; i < Ho; ++i)
      for (std::size_t j = 0; j < Wo; ++j) {
        const T wy = static_cast<T>(ty[i].w), wx = static_cast<T>(tx[j].w);
        const T* p00 = x + (ty[i].lo * W + tx[j].lo) * c;
        const T* p01 = x + (ty[i].lo * W + tx[j].hi) * c;
        const T* p10 = x + (ty[i].hi * W + tx[j].lo) * c;
        const T* p11 = x + (ty[i].hi * W + tx[j].hi) * c;
        T* o = y + (i * Wo + j) * c;
        for (std::size_t ch = 0; ch < c; ++ch) {
          const T top = p00[ch] + wx * (p01[ch] - p00[ch]);
          const T bot = p10[ch] + wx * (p11[ch] - p10[ch]);
          o[ch] = top + wy * (bot - top);
        }
      }
  }
  return out;
}

inline std::uint64_t bilinear_resize_flops(std::uint64_t in_h, std::uint64_t in_w, std::uint64_t out_h,
                                           std::uint64_t out_w, std::uint64_t c) {
  if (in_h == out_h && in_w == out_w) return 0;
  return out_h * out_w * c * 6;
}

/// Expansion stages, bilinear resampling to the target grid, and a 3x3
/// convolution to the output channel count.
template <typename T>
struct ExpandUpParams {
  std::vector<PatchExpandParams<T>> stages;
  Conv2dParams<T> out_conv;

  ExpandUpParams() = default;
  ExpandUpParams(std::size_t c, std::size_t n_stages, std::size_t c_out, std::size_t kernel = 3)
      : out_conv(c, c_out, kernel) {
    for (std::size_t s = 0; s < n_stages; ++s) stages.emplace_back(c);
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    for (std::size_t s = 0; s < stages.size(); ++s) stages[s].visit(join_name(prefix, "upsamples." + std::to_string(s)), f);
    out_conv.visit(join_name(prefix, "out_conv"), f);
  }
};

template <typename T>
TokenGrid<T> patch_expand_up(const TokenGrid<T>& grid, std::size_t target_h, std::size_t target_w,
                             const ExpandUpParams<T>& p) {
  detail::require(target_h >= grid.height() && target_w >= grid.width(),
                  "patch_expand_up: target " + std::to_string(target_h) + "x" + std::to_string(target_w) +
                      " is smaller than the source " + std::to_string(grid.height()) + "x" +
                      std::to_string(grid.width()));
  TokenGrid<T> x = grid;
  for (const auto& stage : p.stages) x = patch_expand(x, stage);
  x = bilinear_resize(x, target_h, target_w);
  return conv2d_same(x, p.out_conv);
}

}  // namespace collamamba
