#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "collamamba/blocks/fusion.hpp"
#include "collamamba/blocks/layout.hpp"
#include "collamamba/blocks/mamba2d.hpp"
#include "collamamba/blocks/patch.hpp"
#include "collamamba/blocks/st_mamba.hpp"
#include "collamamba/core/error.hpp"
#include "collamamba/core/ops.hpp"
#include "collamamba/net/model.hpp"
#include "collamamba/net/trajectory.hpp"

namespace collamamba {

template <typename T>
struct DetectionOutput {
  TokenGrid<T> cls;  // (b, H, W, anchors)
  TokenGrid<T> reg;  // (b, H, W, anchors * box_params)
  TokenGrid<T> dir;  // (b, H, W, anchors * dir_bins)
};

/// Per-frame history features, (b, l_his, l, c), oldest frame first.
template <typename T>
struct HistoryFeatures {
  Tensor<T> values;

  std::size_t batch() const { return values.dim(0); }
  std::size_t frames() const { return values.dim(1); }
  std::size_t length() const { return values.dim(2); }
  std::size_t channels() const { return values.dim(3); }
};

/// A neighbour's shared features, tagged with its agent id.
template <typename T>
struct Neighbor {
  int id;
  const FeatureSequence<T>* features;
};

// ---------------------------------------------------------------------------
// Backbone

template <typename T>
FeatureSequence<T> encode(const Model<T>& m, const BevGrid<T>& bev) {
  const NetConfig& cfg = m.cfg;
  const Shape want{bev.values.rank() == 4 ? bev.batch() : 0, cfg.grid_h(), cfg.grid_w(), cfg.in_channels};
  detail::require(bev.values.shape() == want,
                  "encode: expected BEV " + shape_string(want) + ", got " + shape_string(bev.values.shape()));
  TokenGrid<T> x = patch_embed(bev, m.encoder.patch_embed);
  add_pos_embed(x, m.encoder.pos_embed);
  const auto& layers = m.encoder.layers;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i == cfg.encoder_pre_merge) x = patch_merge_down(x, m.encoder.downsample);
    x = mamba2d_block(x, layers[i], static_cast<int>(i));
  }
  if (cfg.encoder_pre_merge == layers.size()) x = patch_merge_down(x, m.encoder.downsample);
  return flatten(std::move(x));
}

namespace detail {
template <typename T>
void check_sequence(const NetConfig& cfg, const FeatureSequence<T>& s, const char* who) {
  require(s.values.rank() == 3 && s.length() == cfg.seq_len() && s.channels() == cfg.channels(),
          std::string(who) + ": expected sequences of length " + std::to_string(cfg.seq_len()) + " and " +
              std::to_string(cfg.channels()) + " channels, got " + shape_string(s.values.shape()));
}

template <typename T>
FeatureSequence<T> run_fusion_stack(const FusionStackParams<T>& stack, FeatureSequence<T> ego,
                                    const FeatureSequence<T>& other) {
  for (std::size_t d = 0; d < stack.layers.size(); ++d)
    ego = fusion_block(ego, other, stack.layers[d], static_cast<int>(d));
  return ego;
}
}  // namespace detail

/// Applies the shared fusion stack once per neighbour, in ascending agent
/// id order. No neighbours returns the ego features unchanged.
template <typename T>
FeatureSequence<T> fuse_global(const Model<T>& m, const FeatureSequence<T>& ego, std::vector<Neighbor<T>> neighbors) {
  detail::check_sequence(m.cfg, ego, "fuse_global");
  for (const auto& n : neighbors) {
    detail::require(n.features != nullptr, "fuse_global: null neighbour features");
    detail::check_sequence(m.cfg, *n.features, "fuse_global");
    detail::require(n.features->batch() == ego.batch(), "fuse_global: batch mismatch");
  }
  std::stable_sort(neighbors.begin(), neighbors.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  FeatureSequence<T> out = ego;
  for (const auto& n : neighbors) out = detail::run_fusion_stack(m.fusion, std::move(out), *n.features);
  return out;
}

template <typename T>
TokenGrid<T> decode(const Model<T>& m, const FeatureSequence<T>& fused) {
  const NetConfig& cfg = m.cfg;
  detail::require(fused.values.rank() == 3 && fused.channels() == cfg.channels(), "decode: channel mismatch");
  detail::require(fused.length() == cfg.seq_len(),
                  "decode: length " + std::to_string(fused.length()) + " does not reshape to the " +
                      std::to_string(cfg.token_h()) + "x" + std::to_string(cfg.token_w()) + " token grid");
  TokenGrid<T> x = unflatten(fused, cfg.token_h(), cfg.token_w());
  const auto& dec = m.decoder;
  const std::size_t stages = std::max<std::size_t>(cfg.decoder_stages, 1);
  for (std::size_t s = 0; s < stages; ++s) {
    for (std::size_t j = 0; j < cfg.decoder_depth; ++j) {
      const std::size_t i = s * cfg.decoder_depth + j;
      x = mamba2d_block(x, dec.layers[i], static_cast<int>(i));
    }
    if (s < dec.upsamples.size()) x = patch_expand(x, dec.upsamples[s]);
  }
  x = bilinear_resize(x, cfg.decoder_out_h, cfg.decoder_out_w);
  return conv2d_same(x, dec.out_conv);
}

namespace detail {
template <typename T>
TokenGrid<T> apply_head(const TokenGrid<T>& grid, const HeadParams<T>& h) {
  TokenGrid<T> out(grid.batch(), grid.height(), grid.width(), h.weight.dim(0));
  ops::linear(grid.values.data(), grid.batch() * grid.tokens(), h.weight, &h.bias, out.values.data());
  return out;
}
}  // namespace detail

template <typename T>
DetectionOutput<T> detect(const Model<T>& m, const TokenGrid<T>& grid) {
  detail::require(grid.channels() == m.cfg.out_dims, "detect: expected " + std::to_string(m.cfg.out_dims) +
                                                         " channels, got " + std::to_string(grid.channels()));
  return {detail::apply_head(grid, m.cls_head), detail::apply_head(grid, m.reg_head),
          detail::apply_head(grid, m.dir_head)};
}

// ---------------------------------------------------------------------------
// History modules

template <typename T>
HistoryFeatures<T> history_encode(const Model<T>& m, const FrameStack<T>& traj) {
  detail::require(m.history_encoder.has_value(), "history_encode: variant has no history encoder");
  const NetConfig& cfg = m.cfg;
  const auto& he = *m.history_encoder;
  detail::require(traj.values.rank() == 5 && traj.frames() == he.frames(),
                  "history_encode: expected " + std::to_string(he.frames()) + " frames, got " +
                      (traj.values.rank() == 5 ? std::to_string(traj.frames()) : shape_string(traj.values.shape())));
  detail::require(traj.height() == cfg.grid_h() && traj.width() == cfg.grid_w() &&
                      traj.channels() == cfg.in_channels,
                  "history_encode: frame extents do not match the configured BEV grid");
  const std::size_t b = traj.batch(), F = traj.frames(), c = cfg.channels();
  const std::size_t H0 = cfg.grid_h(), W0 = cfg.grid_w(), ph = cfg.patch_h(), pw = cfg.patch_w();

  FrameStack<T> x(b, F, ph, pw, c);
  const std::size_t in_per = H0 * W0 * cfg.in_channels, out_per = ph * pw * c;
  for (std::size_t s = 0; s < b; ++s)
    for (std::size_t f = 0; f < F; ++f)
      detail::patch_embed_sample(traj.sample(s) + f * in_per, H0, W0, m.encoder.patch_embed,
                                 x.sample(s) + f * out_per);
  add_pos_embed(x, m.encoder.pos_embed, EmbedKind::Spatial);
  add_pos_embed(x, he.temporal_pos_embed, EmbedKind::Temporal);

  auto merge = [&](FrameStack<T> in) {
    const std::size_t h = in.height(), w = in.width();
    TokenGrid<T> g(std::move(in.values).reshaped({b * F, h, w, c}));
    TokenGrid<T> merged = patch_merge_down(g, he.downsample);
    return FrameStack<T>(std::move(merged.values).reshaped({b, F, merged.height(), merged.width(), c}));
  };
  for (std::size_t i = 0; i < he.layers.size(); ++i) {
    if (i == cfg.history_pre_merge) x = merge(std::move(x));
    x = st_mamba_block(x, he.layers[i], static_cast<int>(i));
  }
  if (cfg.history_pre_merge == he.layers.size()) x = merge(std::move(x));
  return {std::move(x.values).reshaped({b, F, cfg.seq_len(), c})};
}

namespace detail {
/// (b, F, l, c) -> one 2D block over the (l, F) grid -> MLP F * c -> c.
template <typename T>
FeatureSequence<T> temporal_head(const TemporalHeadParams<T>& p, const Tensor<T>& hist) {
  const std::size_t b = hist.dim(0), F = hist.dim(1), l = hist.dim(2), c = hist.dim(3);
  require(F == p.frames(), "temporal head: expected " + std::to_string(p.frames()) + " frames");
  TokenGrid<T> g(b, l, F, c);
  for (std::size_t s = 0; s < b; ++s)
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t i = 0; i < l; ++i)
        std::copy_n(hist.data() + ((s * F + f) * l + i) * c, c, g.values.data() + ((s * l + i) * F + f) * c);
  g = mamba2d_block(g, p.mixer);
  FeatureSequence<T> out(b, l, c);
  ops::linear(g.values.data(), b * l, p.mlp_weight, &p.mlp_bias, out.values.data());
  return out;
}
}  // namespace detail

/// Refines the current features with the auxiliary sequence distilled from
/// the history features, through the history fusion stack.
template <typename T>
FeatureSequence<T> boost_features(const Model<T>& m, const FeatureSequence<T>& current, const HistoryFeatures<T>& hist) {
  detail::require(m.history_encoder.has_value() && m.history_fusion.has_value(),
                  "boost_features: variant has no boosting module");
  detail::check_sequence(m.cfg, current, "boost_features");
  detail::require(hist.values.rank() == 4 && hist.frames() == m.history_encoder->frames(),
                  "boost_features: history must hold " + std::to_string(m.history_encoder->frames()) + " frames");
  detail::require(hist.batch() == current.batch() && hist.length() == current.length() &&
                      hist.channels() == current.channels(),
                  "boost_features: history features do not match the current features");
  const FeatureSequence<T> aux = detail::temporal_head(m.history_encoder->out_layers, hist.values);
  return detail::run_fusion_stack(*m.history_fusion, current, aux);
}

/// Predicts the current fused features from the global feature trajectory.
/// The newest frame is carried through a residual path.
template <typename T>
FeatureSequence<T> predict_global(const Model<T>& m, const GlobalTrajectory<T>& traj) {
  detail::require(m.predictor.has_value(), "predict_global: variant has no predictor");
  const auto& pr = *m.predictor;
  if (traj.size() < pr.frames())
    throw InsufficientHistory("predict_global: trajectory holds " + std::to_string(traj.size()) + " of " +
                              std::to_string(pr.frames()) + " frames");
  const NetConfig& cfg = m.cfg;
  const std::size_t F = pr.frames(), b = traj.newest().batch(), l = cfg.seq_len(), c = cfg.channels();
  FrameStack<T> x(b, F, 1, l, c);
  const std::size_t first = traj.size() - F;
  for (std::size_t f = 0; f < F; ++f) {
    const auto& seq = traj[first + f];
    detail::check_sequence(cfg, seq, "predict_global");
    detail::require(seq.batch() == b, "predict_global: batch changes within the trajectory");
    for (std::size_t s = 0; s < b; ++s) std::copy_n(seq.sample(s), l * c, x.sample(s) + f * l * c);
  }
  add_pos_embed(x, pr.temporal_pos_embed, EmbedKind::Temporal);
  for (std::size_t i = 0; i < pr.layers.size(); ++i) x = st_mamba_block(x, pr.layers[i], static_cast<int>(i));
  FeatureSequence<T> out = detail::temporal_head(pr.out_layers, std::move(x.values).reshaped({b, F, l, c}));
  const auto& newest = traj.newest();
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += newest.values[i];
  return out;
}

}  // namespace collamamba
