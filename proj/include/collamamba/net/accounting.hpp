#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "collamamba/blocks/fusion.hpp"
#include "collamamba/blocks/mamba2d.hpp"
#include "collamamba/blocks/patch.hpp"
#include "collamamba/blocks/st_mamba.hpp"
#include "collamamba/net/config.hpp"
#include "collamamba/net/model.hpp"

namespace collamamba {

/// One line of a parameter or FLOPs breakdown. `depth` is the nesting level
/// of `path`; `shape` is set for embedding tables.
struct BudgetRow {
  std::string path;
  std::uint64_t value = 0;
  std::string shape;
  int depth = 0;
};

struct BudgetTable {
  std::vector<BudgetRow> rows;
  std::uint64_t total = 0;

  /// Value of the row at `path`; throws if absent.
  std::uint64_t at(const std::string& path) const {
    for (const auto& r : rows)
      if (r.path == path) return r.value;
    throw InvalidArgument("no budget row '" + path + "'");
  }
  bool contains(const std::string& path) const {
    for (const auto& r : rows)
      if (r.path == path) return true;
    return false;
  }
};

namespace detail {
inline bool has_prefix(const std::string& name, const std::string& prefix) {
  return name == prefix || (name.size() > prefix.size() && name.compare(0, prefix.size(), prefix) == 0 &&
                            name[prefix.size()] == '.');
}
}  // namespace detail

/// Learnable scalar counts grouped into the module rows of the breakdown.
inline BudgetTable count_params(const NetConfig& cfg, Variant v) {
  Model<float> m(cfg, v);
  std::vector<std::pair<std::string, const Tensor<float>*>> tensors;
  m.visit("", [&](const std::string& name, auto& t, InitKind) { tensors.emplace_back(name, &t); });

  std::vector<std::string> groups = {"encoder", "encoder.absolute_pos_embed", "encoder.patch_embed",
                                     "encoder.layers", "encoder.downsamples.0", "fusion_net"};
  for (std::size_t i = 0; i < cfg.fusion_depth; ++i) groups.push_back("fusion_net.layers." + std::to_string(i));
  groups.insert(groups.end(), {"decoder", "decoder.vss_layers"});
  for (std::size_t i = 0; i < cfg.decoder_stages; ++i) groups.push_back("decoder.upsamples." + std::to_string(i));
  groups.insert(groups.end(), {"decoder.out_layer", "cls_head", "reg_head", "dir_head"});
  if (has_boosting(v)) {
    groups.insert(groups.end(), {"history_encoder", "history_encoder.temporal_pos_embedding",
                                 "history_encoder.layers", "history_encoder.downsample_layers.0.layer",
                                 "history_encoder.out_layers", "history_fusion_net"});
    for (std::size_t i = 0; i < cfg.fusion_depth; ++i)
      groups.push_back("history_fusion_net.layers." + std::to_string(i));
  }
  if (has_prediction(v))
    groups.insert(groups.end(), {"global_predictor", "global_predictor.temporal_pos_embedding",
                                 "global_predictor.layers", "global_predictor.out_layers"});

  BudgetTable table;
  for (const auto& g : groups) {
    BudgetRow row{g, 0, "", g.find('.') == std::string::npos ? 0 : 1};
    for (const auto& [name, t] : tensors)
      if (detail::has_prefix(name, g)) {
        row.value += t->size();
        if (name == g) row.shape = shape_string(t->shape());
      }
    table.rows.push_back(row);
  }
  for (const auto& [name, t] : tensors) table.total += t->size();
  return table;
}

/// Analytic FLOPs of one forward pass per module (1 multiply-add = 2 FLOPs).
/// `neighbors` is the number of neighbour feature sets fused by the ego.
inline BudgetTable count_flops(const NetConfig& cfg, Variant v, std::uint64_t batch = 1, std::uint64_t neighbors = 1) {
  cfg.validate();
  const BlockConfig& bc = cfg.block;
  const std::uint64_t c = cfg.channels(), c0 = cfg.in_channels;
  const std::uint64_t ph = cfg.patch_h(), pw = cfg.patch_w(), patch_tokens = ph * pw;
  const std::uint64_t l = cfg.seq_len();

  BudgetTable table;
  auto add = [&](const std::string& path, std::uint64_t flops, int depth) {
    table.rows.push_back({path, flops * batch, "", depth});
  };
  auto group = [&](const std::string& path, std::size_t first) {
    std::uint64_t sum = 0;
    for (std::size_t i = first; i < table.rows.size(); ++i) sum += table.rows[i].value;
    table.rows.insert(table.rows.begin() + static_cast<long>(first), BudgetRow{path, sum, "", 0});
  };

  // Encoder
  std::size_t start = table.rows.size();
  add("encoder.patch_embed", patch_embed_flops(patch_tokens, c0, c, cfg.patch), 1);
  add("encoder.absolute_pos_embed", patch_tokens * c, 1);
  {
    std::uint64_t f = 0;
    for (std::size_t i = 0; i < cfg.encoder_depth; ++i)
      f += scan_block_flops(i < cfg.encoder_pre_merge ? patch_tokens : l, 4, bc);
    add("encoder.layers", f, 1);
  }
  add("encoder.downsamples.0", patch_merge_flops(l, c), 1);
  group("encoder", start);

  // Cross-agent fusion
  add("fusion_net", neighbors * cfg.fusion_depth * fusion_block_flops(l, bc), 0);

  // Decoder
  start = table.rows.size();
  {
    const std::size_t stages = std::max<std::size_t>(cfg.decoder_stages, 1);
    std::uint64_t h = cfg.token_h(), w = cfg.token_w(), blocks = 0, ups = 0;
    for (std::size_t s = 0; s < stages; ++s) {
      blocks += cfg.decoder_depth * scan_block_flops(h * w, 4, bc);
      if (s < cfg.decoder_stages) {
        ups += patch_expand_flops(h * w, c);
        h *= 2;
        w *= 2;
      }
    }
    add("decoder.vss_layers", blocks, 1);
    add("decoder.upsamples", ups, 1);
    add("decoder.resize", bilinear_resize_flops(h, w, cfg.decoder_out_h, cfg.decoder_out_w, c), 1);
    add("decoder.out_layer",
        conv2d_flops(cfg.decoder_out_h * cfg.decoder_out_w, c, cfg.out_dims, cfg.out_kernel), 1);
  }
  group("decoder", start);

  // Heads
  const std::uint64_t head_tokens = cfg.decoder_out_h * cfg.decoder_out_w;
  auto head = [&](std::uint64_t co) { return head_tokens * (2 * cfg.out_dims * co + co); };
  add("cls_head", head(cfg.cls_channels()), 0);
  add("reg_head", head(cfg.reg_channels()), 0);
  add("dir_head", head(cfg.dir_channels()), 0);

  auto temporal_head_flops = [&](std::uint64_t frames) {
    return scan_block_flops(l * frames, 4, bc) + l * (2 * frames * c * c + c);
  };

  if (has_boosting(v)) {
    const std::uint64_t F = cfg.history_len(v), depth = cfg.history_depth(v);
    start = table.rows.size();
    add("history_encoder.patch_embed", F * patch_embed_flops(patch_tokens, c0, c, cfg.patch), 1);
    add("history_encoder.pos_embed", 2 * F * patch_tokens * c, 1);
    std::uint64_t f = 0;
    for (std::size_t i = 0; i < depth; ++i)
      f += scan_block_flops(F * (i < cfg.history_pre_merge ? patch_tokens : l), kStDirections, bc);
    add("history_encoder.layers", f, 1);
    add("history_encoder.downsample_layers.0.layer", F * patch_merge_flops(l, c), 1);
    add("history_encoder.out_layers", temporal_head_flops(F), 1);
    group("history_encoder", start);
    add("history_fusion_net", cfg.fusion_depth * fusion_block_flops(l, bc), 0);
  }
  if (has_prediction(v)) {
    const std::uint64_t F = cfg.miss_history;
    start = table.rows.size();
    add("global_predictor.temporal_pos_embedding", F * l * c, 1);
    add("global_predictor.layers", cfg.miss_depth * scan_block_flops(F * l, kStDirections, bc), 1);
    add("global_predictor.out_layers", temporal_head_flops(F) + l * c, 1);
    group("global_predictor", start);
  }

  for (const auto& r : table.rows)
    if (r.depth == 0) table.total += r.value;
  return table;
}

/// Named tensor shapes along the pipeline for batch `b`.
inline std::vector<std::pair<std::string, Shape>> report_shapes(const NetConfig& cfg, Variant v, std::size_t b = 1) {
  cfg.validate();
  const std::size_t c = cfg.channels();
  std::vector<std::pair<std::string, Shape>> rows = {
      {"bev_input", {b, cfg.grid_h(), cfg.grid_w(), cfg.in_channels}},
      {"patch_tokens", {b, cfg.patch_h(), cfg.patch_w(), c}},
      {"pos_embed", {1, cfg.patch_h(), cfg.patch_w(), c}},
      {"merged_tokens", {b, cfg.token_h(), cfg.token_w(), c}},
      {"feature_sequence", {b, cfg.seq_len(), c}},
      {"decoded", {b, cfg.decoder_out_h, cfg.decoder_out_w, cfg.out_dims}},
      {"cls", {b, cfg.decoder_out_h, cfg.decoder_out_w, cfg.cls_channels()}},
      {"reg", {b, cfg.decoder_out_h, cfg.decoder_out_w, cfg.reg_channels()}},
      {"dir", {b, cfg.decoder_out_h, cfg.decoder_out_w, cfg.dir_channels()}},
  };
  if (has_boosting(v)) {
    rows.push_back({"history_temporal_pos_embed", {1, 1, 1, cfg.history_len(v), c}});
    rows.push_back({"history_features", {b, cfg.history_len(v), cfg.seq_len(), c}});
  }
  if (has_prediction(v)) rows.push_back({"predictor_temporal_pos_embed", {1, 1, 1, cfg.miss_history, c}});
  return rows;
}

}  // namespace collamamba
