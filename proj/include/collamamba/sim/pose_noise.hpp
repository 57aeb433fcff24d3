#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "collamamba/blocks/layout.hpp"
#include "collamamba/core/error.hpp"
#include "collamamba/core/random.hpp"

namespace collamamba::sim {

/// Localization error in metres.
struct PoseError {
  double x = 0, y = 0;
};

/// Translates the raster by round(err / voxel) cells per axis, filling the
/// uncovered border with zeros. Positive x moves content towards higher
/// columns, positive y towards higher rows.
template <typename T>
BevGrid<T> inject_pose_noise(const BevGrid<T>& grid, PoseError err, double voxel) {
  collamamba::detail::require(voxel > 0, "inject_pose_noise: voxel must be positive");
  collamamba::detail::require(std::isfinite(err.x) && std::isfinite(err.y), "inject_pose_noise: non-finite error");
  const auto dx = static_cast<long>(std::lround(err.x / voxel));
  const auto dy = static_cast<long>(std::lround(err.y / voxel));
  if (dx == 0 && dy == 0) return grid;
  const long H = static_cast<long>(grid.height()), W = static_cast<long>(grid.width());
  const std::size_t c = grid.channels();
  BevGrid<T> out(grid.batch(), grid.height(), grid.width(), c);
  for (std::size_t s = 0; s < grid.batch(); ++s)
    for (long r = 0; r < H; ++r) {
      const long src_r = r - dy;
      if (src_r < 0 || src_r >= H) continue;
      for (long col = 0; col < W; ++col) {
        const long src_c = col - dx;
        if (src_c < 0 || src_c >= W) continue;
        const T* from = grid.sample(s) + (static_cast<std::size_t>(src_r * W + src_c)) * c;
        std::copy(from, from + c, out.sample(s) + static_cast<std::size_t>(r * W + col) * c);
      }
    }
  return out;
}

/// Per-(frame, agent) Gaussian localization error; zero when std_m is 0.
inline PoseError sample_pose_error(double std_m, std::uint64_t seed, std::size_t frame, int agent) {
  if (std_m <= 0) return {};
  Rng rng(derive_seed(derive_seed(seed, "pose_noise"), frame * 65536 + static_cast<std::uint64_t>(agent)));
  const double ex = rng.normal(0, std_m);
  const double ey = rng.normal(0, std_m);
  return {ex, ey};
}

}  // namespace collamamba::sim
