#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "collamamba/blocks/params.hpp"
#include "collamamba/core/error.hpp"

namespace collamamba {

enum class Variant { Simple, ST, Miss };

inline std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::Simple: return "Simple";
    case Variant::ST: return "ST";
    case Variant::Miss: return "Miss";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "Simple" || s == "simple") return Variant::Simple;
  if (s == "ST" || s == "st") return Variant::ST;
  if (s == "Miss" || s == "miss") return Variant::Miss;
  throw InvalidArgument("unknown variant '" + std::string(s) + "' (expected Simple, ST or Miss)");
}

inline bool has_boosting(Variant v) { return v != Variant::Simple; }
inline bool has_prediction(Variant v) { return v == Variant::Miss; }

/// Network hyper-parameters. Defaults give a 200 x 704 x 64 input grid,
/// 50 x 176 patch tokens, 25 x 88 = 2200 shared tokens of width 96 and a
/// 100 x 352 x 384 decoded map.
struct NetConfig {
  // Detection range and voxel size (metres).
  double x_min = -140.8, x_max = 140.8;
  double y_min = -40.0, y_max = 40.0;
  double voxel = 0.4;
  std::size_t in_channels = 64;

  std::size_t patch = 8;
  std::size_t stride = 4;
  BlockConfig block;

  std::size_t encoder_depth = 10;       // L_E
  std::size_t encoder_pre_merge = 2;    // blocks before the down-merge
  std::size_t fusion_depth = 4;
  std::size_t decoder_depth = 2;        // L_D, blocks per decoder stage
  std::size_t decoder_stages = 2;       // 2x expansions
  std::size_t out_dims = 384;
  std::size_t out_kernel = 3;
  std::size_t decoder_out_h = 100;
  std::size_t decoder_out_w = 352;

  std::size_t anchors = 2;
  std::size_t box_params = 7;
  std::size_t dir_bins = 2;

  std::size_t st_depth = 8;             // L_ST for ST
  std::size_t st_history = 10;          // l_his for ST
  std::size_t miss_depth = 12;          // L_ST for Miss
  std::size_t miss_history = 20;        // l_his for Miss
  std::size_t history_pre_merge = 1;    // history blocks before the down-merge

  std::uint64_t seed = 2024;

  std::size_t grid_h() const { return static_cast<std::size_t>(std::llround((y_max - y_min) / voxel)); }
  std::size_t grid_w() const { return static_cast<std::size_t>(std::llround((x_max - x_min) / voxel)); }
  std::size_t patch_h() const { return grid_h() / stride; }
  std::size_t patch_w() const { return grid_w() / stride; }
  std::size_t token_h() const { return (patch_h() + 1) / 2; }
  std::size_t token_w() const { return (patch_w() + 1) / 2; }
  std::size_t seq_len() const { return token_h() * token_w(); }
  std::size_t channels() const { return block.dim; }
  std::size_t cls_channels() const { return anchors; }
  std::size_t reg_channels() const { return anchors * box_params; }
  std::size_t dir_channels() const { return anchors * dir_bins; }

  std::size_t history_depth(Variant v) const { return v == Variant::Miss ? miss_depth : st_depth; }
  std::size_t history_len(Variant v) const { return v == Variant::Miss ? miss_history : st_history; }

  void validate() const {
    auto req = [](bool ok, const std::string& msg) { detail::require(ok, "config: " + msg); };
    req(voxel > 0 && x_max > x_min && y_max > y_min, "detection range and voxel must be positive");
    req(std::abs((y_max - y_min) / voxel - static_cast<double>(grid_h())) < 1e-6 &&
            std::abs((x_max - x_min) / voxel - static_cast<double>(grid_w())) < 1e-6,
        "detection range must be a whole number of voxels");
    req(in_channels >= 1 && block.dim >= 1 && out_dims >= 1, "channel counts must be >= 1");
    req(stride >= 1 && patch >= stride && (patch - stride) % 2 == 0, "patch - stride must be even and >= 0");
    req(grid_h() % stride == 0 && grid_w() % stride == 0, "grid must be divisible by the patch stride");
    req(encoder_depth >= 1 && fusion_depth >= 1 && decoder_depth >= 1, "depths must be >= 1");
    req(encoder_pre_merge <= encoder_depth, "encoder_pre_merge exceeds encoder_depth");
    req(st_depth >= 1 && miss_depth >= 1 && st_history >= 1 && miss_history >= 1,
        "history depth and length must be >= 1");
    req(history_pre_merge <= st_depth && history_pre_merge <= miss_depth, "history_pre_merge exceeds depth");
    req(decoder_out_h >= token_h() && decoder_out_w >= token_w(), "decoder output smaller than token grid");
    req(out_kernel % 2 == 1, "out_kernel must be odd");
    req(anchors >= 1 && box_params >= 1 && dir_bins >= 1, "head sizes must be >= 1");
  }
};

inline void to_json(nlohmann::json& j, const BlockConfig& b) {
  j = {{"dim", b.dim},        {"expand", b.expand},           {"state", b.state},
       {"dt_rank", b.dt_rank}, {"conv2d_kernel", b.conv2d_kernel}, {"conv1d_width", b.conv1d_width}};
}

inline void from_json(const nlohmann::json& j, BlockConfig& b) {
  b.dim = j.value("dim", b.dim);
  b.expand = j.value("expand", b.expand);
  b.state = j.value("state", b.state);
  b.dt_rank = j.value("dt_rank", b.dt_rank);
  b.conv2d_kernel = j.value("conv2d_kernel", b.conv2d_kernel);
  b.conv1d_width = j.value("conv1d_width", b.conv1d_width);
}

#define COLLAMAMBA_NET_FIELDS(X)                                                                          \
  X(x_min) X(x_max) X(y_min) X(y_max) X(voxel) X(in_channels) X(patch) X(stride) X(encoder_depth)        \
  X(encoder_pre_merge) X(fusion_depth) X(decoder_depth) X(decoder_stages) X(out_dims) X(out_kernel)      \
  X(decoder_out_h) X(decoder_out_w) X(anchors) X(box_params) X(dir_bins) X(st_depth) X(st_history)       \
  X(miss_depth) X(miss_history) X(history_pre_merge) X(seed)

inline void to_json(nlohmann::json& j, const NetConfig& c) {
  j = nlohmann::json::object();
#define X(f) j[#f] = c.f;
  COLLAMAMBA_NET_FIELDS(X)
#undef X
  j["block"] = c.block;
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline void from_json(const nlohmann::json& j, NetConfig& c) {
  detail::require(j.is_object(), "config: network section must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = it.key() == "block";
#define X(f) known = known || it.key() == #f;
    COLLAMAMBA_NET_FIELDS(X)
#undef X
    detail::require(known, "config: unknown network key '" + it.key() + "'");
  }
#define X(f) c.f = j.value(#f, c.f);
  COLLAMAMBA_NET_FIELDS(X)
#undef X
  if (j.contains("block")) c.block = j.at("block").get<BlockConfig>();
}

#undef COLLAMAMBA_NET_FIELDS

/// A reduced geometry (32 x 64 grid, 4 x 8 tokens, width 16) with the same
/// stage structure as the defaults. Used for protocol runs and fast tests.
inline NetConfig compact_net_config() {
  NetConfig c;
  c.x_min = -12.8;
  c.x_max = 12.8;
  c.y_min = -6.4;
  c.y_max = 6.4;
  c.in_channels = 8;
  c.block.dim = 16;
  c.block.state = 4;
  c.block.dt_rank = 2;
  c.encoder_depth = 2;
  c.encoder_pre_merge = 1;
  c.fusion_depth = 2;
  c.decoder_depth = 1;
  c.out_dims = 16;
  c.decoder_out_h = 16;
  c.decoder_out_w = 32;
  c.st_depth = 2;
  c.st_history = 10;
  c.miss_depth = 2;
  c.miss_history = 20;
  return c;
}

}  // namespace collamamba
