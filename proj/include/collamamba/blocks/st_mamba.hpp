#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "collamamba/blocks/directions.hpp"
#include "collamamba/blocks/layout.hpp"
#include "collamamba/blocks/mamba2d.hpp"

namespace collamamba {

/// Spatial-temporal block: the 2D block's layout with three scan orders.
/// The spatial scans run once over all frames concatenated; the temporal
/// scan visits tokens position-major and restarts at every position, so each
/// spatial location gets its own length-T scan. The short convolution runs
/// per frame.
template <typename T>
using StMambaParams = ScanBlockParams<T>;

inline constexpr std::size_t kStDirections = 3;

template <typename T>
StMambaParams<T> make_st_params(const BlockConfig& cfg) {
  return StMambaParams<T>(cfg, kStDirections);
}

template <typename T>
FrameStack<T> st_mamba_block(const FrameStack<T>& frames, const StMambaParams<T>& p, int block_index = 0) {
  detail::require(frames.values.rank() == 5, "st_mamba_block: input must be a frame stack");
  detail::require(frames.channels() == p.cfg.dim, "st_mamba_block: expected " + std::to_string(p.cfg.dim) +
                                                      " channels, got " + std::to_string(frames.channels()));
  detail::require(p.directions() == kStDirections, "st_mamba_block: parameters must hold 3 directions");
  const std::size_t Tn = frames.frames(), H = frames.height(), W = frames.width(), hw = H * W;
  const std::vector<ScanOrder> orders = {{st_order(Tn, hw, StOrder::SpatialForward), 0},
                                         {st_order(Tn, hw, StOrder::SpatialBackward), 0},
                                         {st_order(Tn, hw, StOrder::Temporal), Tn}};
  FrameStack<T> out(frames.batch(), Tn, H, W, frames.channels());
  for (std::size_t b = 0; b < frames.batch(); ++b)
    detail::scan_block_sample(frames.sample(b), Tn, H, W, p, orders, out.sample(b));
  detail::check_finite(out.values, "st_mamba_block", block_index);
  return out;
}

}  // namespace collamamba
