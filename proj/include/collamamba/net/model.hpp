#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "collamamba/blocks/fusion.hpp"
#include "collamamba/blocks/mamba2d.hpp"
#include "collamamba/blocks/params.hpp"
#include "collamamba/blocks/patch.hpp"
#include "collamamba/blocks/st_mamba.hpp"
#include "collamamba/net/config.hpp"

namespace collamamba {

template <typename T>
struct EncoderParams {
  PatchEmbedParams<T> patch_embed;
  Tensor<T> pos_embed;  // (1, H/stride, W/stride, c)
  std::vector<Mamba2dParams<T>> layers;
  PatchMergeParams<T> downsample;

  explicit EncoderParams(const NetConfig& cfg)
      : patch_embed(cfg.in_channels, cfg.channels(), cfg.patch, cfg.stride),
        pos_embed(make_spatial_embedding<T>(cfg.patch_h(), cfg.patch_w(), cfg.channels())),
        downsample(cfg.channels()) {
    for (std::size_t i = 0; i < cfg.encoder_depth; ++i) layers.push_back(make_mamba2d_params<T>(cfg.block));
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(join_name(prefix, "absolute_pos_embed"), pos_embed, InitKind::Embedding);
    patch_embed.visit(join_name(prefix, "patch_embed"), f);
    for (std::size_t i = 0; i < layers.size(); ++i) layers[i].visit(join_name(prefix, "layers." + std::to_string(i)), f);
    downsample.visit(join_name(prefix, "downsamples.0"), f);
  }
};

template <typename T>
struct FusionStackParams {
  std::vector<FusionParams<T>> layers;

  FusionStackParams(const BlockConfig& block, std::size_t depth) {
    for (std::size_t i = 0; i < depth; ++i) layers.emplace_back(block);
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    for (std::size_t i = 0; i < layers.size(); ++i) layers[i].visit(join_name(prefix, "layers." + std::to_string(i)), f);
  }
};

template <typename T>
struct DecoderParams {
  std::vector<Mamba2dParams<T>> layers;  // decoder_depth per stage
  std::vector<PatchExpandParams<T>> upsamples;
  Conv2dParams<T> out_conv;

  explicit DecoderParams(const NetConfig& cfg) : out_conv(cfg.channels(), cfg.out_dims, cfg.out_kernel) {
    const std::size_t stages = std::max<std::size_t>(cfg.decoder_stages, 1);
    for (std::size_t i = 0; i < cfg.decoder_depth * stages; ++i) layers.push_back(make_mamba2d_params<T>(cfg.block));
    for (std::size_t i = 0; i < cfg.decoder_stages; ++i) upsamples.emplace_back(cfg.channels());
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    for (std::size_t i = 0; i < layers.size(); ++i)
      layers[i].visit(join_name(prefix, "vss_layers." + std::to_string(i)), f);
    for (std::size_t i = 0; i < upsamples.size(); ++i)
      upsamples[i].visit(join_name(prefix, "upsamples." + std::to_string(i)), f);
    out_conv.visit(join_name(prefix, "out_layer"), f);
  }
};

/// 1x1 convolution head, (out, in) weight and bias.
template <typename T>
struct HeadParams {
  Tensor<T> weight, bias;

  HeadParams(std::size_t in, std::size_t out) : weight({out, in}), bias({out}) {}

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(join_name(prefix, "weight"), weight, InitKind::FanIn);
    f(join_name(prefix, "bias"), bias, InitKind::Zeros);
  }
};

/// Temporal fusion head: one 2D block over the (l, l_his) grid of per-frame
/// features, then a per-position MLP l_his * c -> c.
template <typename T>
struct TemporalHeadParams {
  Mamba2dParams<T> mixer;
  Tensor<T> mlp_weight, mlp_bias;  // (c, l_his * c), (c)

  TemporalHeadParams(const BlockConfig& block, std::size_t frames)
      : mixer(make_mamba2d_params<T>(block)), mlp_weight({block.dim, frames * block.dim}), mlp_bias({block.dim}) {}

  std::size_t frames() const { return mlp_weight.dim(1) / mlp_weight.dim(0); }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    mixer.visit(join_name(prefix, "mixer"), f);
    f(join_name(prefix, "mlp.weight"), mlp_weight, InitKind::FanIn);
    f(join_name(prefix, "mlp.bias"), mlp_bias, InitKind::Zeros);
  }
};

/// Historical trajectory encoder. Patch embedding and the spatial table are
/// borrowed from the main encoder.
template <typename T>
struct HistoryEncoderParams {
  Tensor<T> temporal_pos_embed;  // (1, 1, 1, l_his, c)
  std::vector<StMambaParams<T>> layers;
  PatchMergeParams<T> downsample;
  TemporalHeadParams<T> out_layers;

  HistoryEncoderParams(const NetConfig& cfg, Variant v)
      : temporal_pos_embed(make_temporal_embedding<T>(cfg.history_len(v), cfg.channels())),
        downsample(cfg.channels()),
        out_layers(cfg.block, cfg.history_len(v)) {
    for (std::size_t i = 0; i < cfg.history_depth(v); ++i) layers.push_back(make_st_params<T>(cfg.block));
  }

  std::size_t frames() const { return temporal_pos_embed.dim(3); }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(join_name(prefix, "temporal_pos_embedding"), temporal_pos_embed, InitKind::Embedding);
    for (std::size_t i = 0; i < layers.size(); ++i) layers[i].visit(join_name(prefix, "layers." + std::to_string(i)), f);
    downsample.visit(join_name(prefix, "downsample_layers.0.layer"), f);
    out_layers.visit(join_name(prefix, "out_layers"), f);
  }
};

/// Global feature predictor: spatial-temporal stack over the 1D feature
/// trajectory (a 1 x l grid per frame) and a temporal head.
template <typename T>
struct PredictorParams {
  Tensor<T> temporal_pos_embed;
  std::vector<StMambaParams<T>> layers;
  TemporalHeadParams<T> out_layers;

  explicit PredictorParams(const NetConfig& cfg)
      : temporal_pos_embed(make_temporal_embedding<T>(cfg.miss_history, cfg.channels())),
        out_layers(cfg.block, cfg.miss_history) {
    for (std::size_t i = 0; i < cfg.miss_depth; ++i) layers.push_back(make_st_params<T>(cfg.block));
  }

  std::size_t frames() const { return temporal_pos_embed.dim(3); }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(join_name(prefix, "temporal_pos_embedding"), temporal_pos_embed, InitKind::Embedding);
    for (std::size_t i = 0; i < layers.size(); ++i) layers[i].visit(join_name(prefix, "layers." + std::to_string(i)), f);
    out_layers.visit(join_name(prefix, "out_layers"), f);
  }
};

/// All weights of one variant. Every tensor is seeded from (seed, name), so
/// stages shared between variants start from identical values.
template <typename T>
struct Model {
  NetConfig cfg;
  Variant variant;
  EncoderParams<T> encoder;
  FusionStackParams<T> fusion;
  DecoderParams<T> decoder;
  HeadParams<T> cls_head, reg_head, dir_head;
  std::optional<HistoryEncoderParams<T>> history_encoder;
  std::optional<FusionStackParams<T>> history_fusion;
  std::optional<PredictorParams<T>> predictor;

  Model(const NetConfig& c, Variant v)
      : cfg((c.validate(), c)),
        variant(v),
        encoder(c),
        fusion(c.block, c.fusion_depth),
        decoder(c),
        cls_head(c.out_dims, c.cls_channels()),
        reg_head(c.out_dims, c.reg_channels()),
        dir_head(c.out_dims, c.dir_channels()) {
    if (has_boosting(v)) {
      history_encoder.emplace(c, v);
      history_fusion.emplace(c.block, c.fusion_depth);
    }
    if (has_prediction(v)) predictor.emplace(c);
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    encoder.visit(join_name(prefix, "encoder"), f);
    fusion.visit(join_name(prefix, "fusion_net"), f);
    decoder.visit(join_name(prefix, "decoder"), f);
    cls_head.visit(join_name(prefix, "cls_head"), f);
    reg_head.visit(join_name(prefix, "reg_head"), f);
    dir_head.visit(join_name(prefix, "dir_head"), f);
    if (history_encoder) history_encoder->visit(join_name(prefix, "history_encoder"), f);
    if (history_fusion) history_fusion->visit(join_name(prefix, "history_fusion_net"), f);
    if (predictor) predictor->visit(join_name(prefix, "global_predictor"), f);
  }
};

/// Builds and initializes a model from cfg.seed.
template <typename T>
Model<T> make_model(const NetConfig& cfg, Variant v) {
  Model<T> m(cfg, v);
  initialize_parameters(m, cfg.seed);
  return m;
}

}  // namespace collamamba
