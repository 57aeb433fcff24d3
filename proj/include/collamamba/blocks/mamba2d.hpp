#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "collamamba/blocks/directions.hpp"
#include "collamamba/blocks/layout.hpp"
#include "collamamba/blocks/params.hpp"
#include "collamamba/blocks/ssm_branch.hpp"
#include "collamamba/core/error.hpp"
#include "collamamba/core/ops.hpp"
#include "collamamba/core/tensor.hpp"

namespace collamamba {

/// Learnable tensors of a multi-order scan block. The 2D block uses four
/// scan orders, the spatial-temporal block three; everything outside the
/// per-order SSM branch is shared between orders.
template <typename T>
struct ScanBlockParams {
  BlockConfig cfg;
  Tensor<T> norm_weight, norm_bias;   // (c)
  Tensor<T> in_proj_weight;           // (2 * inner, c)
  Tensor<T> conv_weight, conv_bias;   // (inner, k, k), (inner)
  SsmBranchParams<T> ssm;
  Tensor<T> out_norm_weight, out_norm_bias;  // (inner)
  Tensor<T> out_proj_weight;                 // (c, inner)

  ScanBlockParams() = default;
  ScanBlockParams(const BlockConfig& c, std::size_t directions)
      : cfg(c),
        norm_weight({c.dim}, T(1)),
        norm_bias({c.dim}),
        in_proj_weight({2 * c.inner(), c.dim}),
        conv_weight({c.inner(), c.conv2d_kernel, c.conv2d_kernel}),
        conv_bias({c.inner()}),
        ssm(c, directions),
        out_norm_weight({c.inner()}, T(1)),
        out_norm_bias({c.inner()}),
        out_proj_weight({c.dim, c.inner()}) {
    detail::require(c.dim >= 1 && c.inner() >= 1 && c.state >= 1 && c.dt_rank >= 1,
                    "block config extents must be >= 1");
    detail::require(c.conv2d_kernel % 2 == 1, "conv2d kernel must be odd");
  }

  std::size_t directions() const { return ssm.directions(); }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(join_name(prefix, "norm.weight"), norm_weight, InitKind::Ones);
    f(join_name(prefix, "norm.bias"), norm_bias, InitKind::Zeros);
    f(join_name(prefix, "in_proj.weight"), in_proj_weight, InitKind::FanIn);
    f(join_name(prefix, "conv2d.weight"), conv_weight, InitKind::FanIn);
    f(join_name(prefix, "conv2d.bias"), conv_bias, InitKind::Zeros);
    ssm.visit(prefix, f);
    f(join_name(prefix, "out_norm.weight"), out_norm_weight, InitKind::Ones);
    f(join_name(prefix, "out_norm.bias"), out_norm_bias, InitKind::Zeros);
    f(join_name(prefix, "out_proj.weight"), out_proj_weight, InitKind::FanIn);
  }
};

template <typename T>
using Mamba2dParams = ScanBlockParams<T>;

template <typename T>
Mamba2dParams<T> make_mamba2d_params(const BlockConfig& cfg) {
  return Mamba2dParams<T>(cfg, kAllDirections.size());
}

/// A visiting order: perm[i] is the token read at step i. A nonzero segment
/// splits the visit into independent scans of that length.
struct ScanOrder {
  std::vector<std::size_t> perm;
  std::size_t segment = 0;
};

namespace detail {

/// One sample of a scan block over `frames` stacked H x W grids stored
/// frame-major, with one SSM branch direction per entry of `orders`.
template <typename T>
void scan_block_sample(const T* in, std::size_t frames, std::size_t H, std::size_t W,
                       const ScanBlockParams<T>& p, const std::vector<ScanOrder>& orders, T* out) {
  const BlockConfig& cfg = p.cfg;
  const std::size_t c = cfg.dim, E = cfg.inner(), hw = H * W, n = frames * hw;

  std::vector<T> x(in, in + n * c);
  ops::layer_norm(x.data(), n, c, p.norm_weight, p.norm_bias);

  std::vector<T> xz(n * 2 * E);
  ops::linear(x.data(), n, p.in_proj_weight, static_cast<const Tensor<T>*>(nullptr), xz.data());
  std::vector<T> u(n * E), z(n * E);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(&xz[i * 2 * E], E, &u[i * E]);
    std::copy_n(&xz[i * 2 * E + E], E, &z[i * E]);
  }
  xz = {};

  std::vector<T> v(n * E);
  for (std::size_t f = 0; f < frames; ++f)
    ops::depthwise_conv2d(&u[f * hw * E], H, W, E, p.conv_weight.data(), p.conv_bias.data(), cfg.conv2d_kernel,
                          &v[f * hw * E]);
  ops::silu_inplace(std::span<T>(v));

  std::vector<T> acc(n * E, T(0)), ys(n * E);
  for (std::size_t k = 0; k < orders.size(); ++k) {
    const auto& perm = orders[k].perm;
    for (std::size_t i = 0; i < n; ++i) std::copy_n(&v[perm[i] * E], E, &u[i * E]);
    directional_scan(u.data(), n, cfg, p.ssm, k, ys.data(), orders[k].segment);
    for (std::size_t i = 0; i < n; ++i) {
      T* a = &acc[perm[i] * E];
      const T* s = &ys[i * E];
      for (std::size_t e = 0; e < E; ++e) a[e] += s[e];
    }
  }
  const T K = static_cast<T>(orders.size());
  for (T& a : acc) a /= K;

  ops::layer_norm(acc.data(), n, E, p.out_norm_weight, p.out_norm_bias);
  for (std::size_t i = 0; i < n * E; ++i) acc[i] *= ops::silu(z[i]);

  ops::linear(acc.data(), n, p.out_proj_weight, static_cast<const Tensor<T>*>(nullptr), out);
  for (std::size_t i = 0; i < n * c; ++i) out[i] += in[i];
}

template <typename T>
void check_finite(const Tensor<T>& t, const char* where, int block_index) {
  if (!t.all_finite()) throw NumericOverflow(where, block_index);
}

}  // namespace detail

/// Four-direction 2D scan block with pre-norm, gated branch and residual.
/// Shape preserving.
template <typename T>
TokenGrid<T> mamba2d_block(const TokenGrid<T>& tokens, const Mamba2dParams<T>& p, int block_index = 0) {
  detail::require(tokens.values.rank() == 4, "mamba2d_block: input must be a token grid");
  detail::require(tokens.channels() == p.cfg.dim, "mamba2d_block: expected " + std::to_string(p.cfg.dim) +
                                                      " channels, got " + std::to_string(tokens.channels()));
  detail::require(p.directions() == kAllDirections.size(), "mamba2d_block: parameters must hold 4 directions");
  const std::size_t H = tokens.height(), W = tokens.width();
  std::vector<ScanOrder> orders;
  for (DirectionOrder d : kAllDirections) orders.push_back({order_directions(H, W, d), 0});

  TokenGrid<T> out(tokens.batch(), H, W, tokens.channels());
  for (std::size_t b = 0; b < tokens.batch(); ++b)
    detail::scan_block_sample(tokens.sample(b), 1, H, W, p, orders, out.sample(b));
  detail::check_finite(out.values, "mamba2d_block", block_index);
  return out;
}

/// FLOPs of a scan block over `tokens` tokens with `directions` orders.
inline std::uint64_t scan_block_flops(std::uint64_t tokens, std::size_t directions, const BlockConfig& cfg) {
  const std::uint64_t c = cfg.dim, E = cfg.inner(), k2 = cfg.conv2d_kernel * cfg.conv2d_kernel;
  std::uint64_t per_token = 5 * c            // norm
                            + 2 * c * 2 * E  // in_proj
                            + (2 * k2 + 1) * E  // depthwise conv + bias
                            + 4 * E             // silu
                            + directions * E    // direction mean
                            + 5 * E             // out_norm
                            + 5 * E             // gate
                            + 2 * E * c         // out_proj
                            + c;                // residual
  return tokens * per_token + directions * directional_scan_flops(tokens, cfg);
}

}  // namespace collamamba
