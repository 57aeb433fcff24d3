#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "collamamba/blocks/layout.hpp"
#include "collamamba/blocks/mamba2d.hpp"
#include "collamamba/blocks/params.hpp"
#include "collamamba/blocks/ssm_branch.hpp"
#include "collamamba/core/error.hpp"
#include "collamamba/core/ops.hpp"
#include "collamamba/core/tensor.hpp"

namespace collamamba {

/// Cross-feature fusion block. The ego stream is projected to a scan input
/// and a gate, the other stream to a scan input only; the two are joined as
/// [ego | other] and scanned forward and backward with per-direction short
/// convolutions and SSM branches. Only the ego segment is kept.
template <typename T>
struct FusionParams {
  BlockConfig cfg;
  Tensor<T> norm_ego_weight, norm_ego_bias;  // (c)
  Tensor<T> norm_nb_weight, norm_nb_bias;    // (c)
  Tensor<T> in_proj_ego_weight;              // (2 * inner, c)
  Tensor<T> in_proj_nb_weight;               // (inner, c)
  Tensor<T> conv_weight, conv_bias;          // (2, inner, width), (2, inner)
  SsmBranchParams<T> ssm;                    // 2 directions
  Tensor<T> out_norm_weight, out_norm_bias;  // (inner)
  Tensor<T> out_proj_weight;                 // (c, inner)

  FusionParams() = default;
  explicit FusionParams(const BlockConfig& c)
      : cfg(c),
        norm_ego_weight({c.dim}, T(1)),
        norm_ego_bias({c.dim}),
        norm_nb_weight({c.dim}, T(1)),
        norm_nb_bias({c.dim}),
        in_proj_ego_weight({2 * c.inner(), c.dim}),
        in_proj_nb_weight({c.inner(), c.dim}),
        conv_weight({2, c.inner(), c.conv1d_width}),
        conv_bias({2, c.inner()}),
        ssm(c, 2),
        out_norm_weight({c.inner()}, T(1)),
        out_norm_bias({c.inner()}),
        out_proj_weight({c.dim, c.inner()}) {
    detail::require(c.conv1d_width >= 1, "conv1d width must be >= 1");
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(join_name(prefix, "norm_ego.weight"), norm_ego_weight, InitKind::Ones);
    f(join_name(prefix, "norm_ego.bias"), norm_ego_bias, InitKind::Zeros);
    f(join_name(prefix, "norm_nb.weight"), norm_nb_weight, InitKind::Ones);
    f(join_name(prefix, "norm_nb.bias"), norm_nb_bias, InitKind::Zeros);
    f(join_name(prefix, "in_proj_ego.weight"), in_proj_ego_weight, InitKind::FanIn);
    f(join_name(prefix, "in_proj_nb.weight"), in_proj_nb_weight, InitKind::FanIn);
    f(join_name(prefix, "conv1d.weight"), conv_weight, InitKind::FanIn);
    f(join_name(prefix, "conv1d.bias"), conv_bias, InitKind::Zeros);
    ssm.visit(prefix, f);
    f(join_name(prefix, "out_norm.weight"), out_norm_weight, InitKind::Ones);
    f(join_name(prefix, "out_norm.bias"), out_norm_bias, InitKind::Zeros);
    f(join_name(prefix, "out_proj.weight"), out_proj_weight, InitKind::FanIn);
  }
};

namespace detail {

template <typename T>
void fusion_sample(const T* ego, const T* other, std::size_t l, const FusionParams<T>& p, T* out) {
  const BlockConfig& cfg = p.cfg;
  const std::size_t c = cfg.dim, E = cfg.inner(), w = cfg.conv1d_width;
  const auto* no_bias = static_cast<const Tensor<T>*>(nullptr);

  std::vector<T> xe(ego, ego + l * c), xn(other, other + l * c);
  ops::layer_norm(xe.data(), l, c, p.norm_ego_weight, p.norm_ego_bias);
  ops::layer_norm(xn.data(), l, c, p.norm_nb_weight, p.norm_nb_bias);

  std::vector<T> xz(l * 2 * E), seq(2 * l * E), z(l * E);
  ops::linear(xe.data(), l, p.in_proj_ego_weight, no_bias, xz.data());
  for (std::size_t i = 0; i < l; ++i) {
    std::copy_n(&xz[i * 2 * E], E, &seq[i * E]);
    std::copy_n(&xz[i * 2 * E + E], E, &z[i * E]);
  }
  ops::linear(xn.data(), l, p.in_proj_nb_weight, no_bias, &seq[l * E]);

  std::vector<T> conv(2 * l * E), ys(2 * l * E), acc(l * E);

  // Forward over [ego | other]: ego outputs depend only on the ego prefix.
  ops::causal_conv1d(seq.data(), l, E, p.conv_weight.data(), p.conv_bias.data(), w, conv.data());
  ops::silu_inplace(std::span<T>(conv.data(), l * E));
  directional_scan(conv.data(), l, cfg, p.ssm, 0, ys.data());
  std::copy_n(ys.data(), l * E, acc.data());

  // Backward: scan the reversed joint sequence, the ego segment comes last.
  std::vector<T> rev(2 * l * E);
  for (std::size_t i = 0; i < 2 * l; ++i) std::copy_n(&seq[(2 * l - 1 - i) * E], E, &rev[i * E]);
  ops::causal_conv1d(rev.data(), 2 * l, E, p.conv_weight.data() + E * w, p.conv_bias.data() + E, w, conv.data());
  ops::silu_inplace(std::span<T>(conv));
  directional_scan(conv.data(), 2 * l, cfg, p.ssm, 1, ys.data());
  for (std::size_t i = 0; i < l; ++i) {
    T* a = &acc[i * E];
    const T* s = &ys[(2 * l - 1 - i) * E];
    for (std::size_t e = 0; e < E; ++e) a[e] = (a[e] + s[e]) / T(2);
  }

  ops::layer_norm(acc.data(), l, E, p.out_norm_weight, p.out_norm_bias);
  for (std::size_t i = 0; i < l * E; ++i) acc[i] *= ops::silu(z[i]);
  ops::linear(acc.data(), l, p.out_proj_weight, no_bias, out);
  for (std::size_t i = 0; i < l * c; ++i) out[i] += ego[i];
}

}  // namespace detail

template <typename T>
FeatureSequence<T> fusion_block(const FeatureSequence<T>& ego, const FeatureSequence<T>& other,
                                const FusionParams<T>& p, int block_index = 0) {
  detail::require(ego.values.rank() == 3 && other.values.rank() == 3, "fusion_block: inputs must be sequences");
  detail::require(ego.length() == other.length(), "fusion_block: ego length " + std::to_string(ego.length()) +
                                                      " differs from other length " +
                                                      std::to_string(other.length()));
  detail::require(ego.batch() == other.batch(), "fusion_block: batch mismatch");
  detail::require(ego.channels() == p.cfg.dim && other.channels() == p.cfg.dim,
                  "fusion_block: expected " + std::to_string(p.cfg.dim) + " channels");
  FeatureSequence<T> out(ego.batch(), ego.length(), ego.channels());
  for (std::size_t b = 0; b < ego.batch(); ++b)
    detail::fusion_sample(ego.sample(b), other.sample(b), ego.length(), p, out.sample(b));
  detail::check_finite(out.values, "fusion_block", block_index);
  return out;
}

/// FLOPs of one fusion block application on length-l sequences: the forward
/// scan covers the ego segment, the backward scan the joint sequence.
inline std::uint64_t fusion_block_flops(std::uint64_t l, const BlockConfig& cfg) {
  const std::uint64_t c = cfg.dim, E = cfg.inner(), w = cfg.conv1d_width;
  const std::uint64_t scanned = l + 2 * l;
  std::uint64_t f = 2 * l * 5 * c              // two input norms
                    + l * 2 * c * 2 * E        // ego projection
                    + l * 2 * c * E            // other projection
                    + scanned * ((2 * w + 1) * E + 4 * E)  // conv + bias + silu
                    + l * 2 * E                // direction mean
                    + l * 5 * E                // out_norm
                    + l * 5 * E                // gate
                    + l * 2 * E * c            // out_proj
                    + l * c;                   // residual
  return f + directional_scan_flops(l, cfg) + directional_scan_flops(2 * l, cfg);
}

}  // namespace collamamba
