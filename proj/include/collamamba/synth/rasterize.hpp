#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include "collamamba/blocks/layout.hpp"
#include "collamamba/core/random.hpp"
#include "collamamba/net/config.hpp"
#include "collamamba/synth/scene.hpp"

namespace collamamba::synth {

/// Raster geometry. Row r covers y in [y_min + r v, y_min + (r + 1) v),
/// column c covers x in [x_min + c v, x_min + (c + 1) v).
struct BevGeometry {
  double x_min = -140.8, y_min = -40.0, voxel = 0.4;
  std::size_t height = 200, width = 704, channels = 64;

  double cell_x(std::size_t c) const { return x_min + (static_cast<double>(c) + 0.5) * voxel; }
  double cell_y(std::size_t r) const { return y_min + (static_cast<double>(r) + 0.5) * voxel; }
};

inline BevGeometry bev_geometry(const NetConfig& cfg) {
  cfg.validate();
  return {cfg.x_min, cfg.y_min, cfg.voxel, cfg.grid_h(), cfg.grid_w(), cfg.in_channels};
}

/// World rectangle covered by the raster.
inline WorldBounds world_bounds(const NetConfig& cfg) { return {cfg.x_min, cfg.x_max, cfg.y_min, cfg.y_max}; }

namespace detail {

inline double wrap_angle(double a) {
  a = std::remainder(a, 2 * std::numbers::pi);
  return a;
}

inline bool in_fov(const AgentRig& rig, double px, double py) {
  const double dx = px - rig.pose.x, dy = py - rig.pose.y;
  if (dx * dx + dy * dy > rig.fov_range * rig.fov_range) return false;
  if (rig.fov_half_angle >= std::numbers::pi) return true;
  if (dx == 0 && dy == 0) return true;
  return std::abs(wrap_angle(std::atan2(dy, dx) - rig.pose.heading)) <= rig.fov_half_angle;
}

/// True if the open segment from (ax, ay) to (bx, by) passes through the box.
/// Slab clipping in the box frame.
inline bool segment_hits_box(const SceneObject& o, double ax, double ay, double bx, double by) {
  const auto a = o.to_local(ax, ay), b = o.to_local(bx, by);
  double t0 = 0, t1 = 1;
  const double d[2] = {b[0] - a[0], b[1] - a[1]};
  const double half[2] = {o.length / 2, o.width / 2};
  for (int k = 0; k < 2; ++k) {
    if (std::abs(d[k]) < 1e-15) {
      if (std::abs(a[k]) > half[k]) return false;
      continue;
    }
    double ta = (-half[k] - a[k]) / d[k], tb = (half[k] - a[k]) / d[k];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return t1 > 1e-12 && t0 < 1 - 1e-12;
}

/// Channel 0 is occupancy; the rest is a fixed projection of the object id,
/// perturbed by at most 10% per agent.
template <typename T>
std::vector<T> object_signature(int id, std::size_t channels, std::uint64_t scene_seed, std::uint64_t rig_seed) {
  std::vector<T> sig(channels);
  sig[0] = T(1);
  Rng base(derive_seed(scene_seed, static_cast<std::uint64_t>(id)));
  Rng jitter(derive_seed(rig_seed, static_cast<std::uint64_t>(id)));
  for (std::size_t k = 1; k < channels; ++k)
    sig[k] = static_cast<T>(base.normal() * (1.0 + 0.1 * jitter.uniform(-1.0, 1.0)));
  return sig;
}

}  // namespace detail

/// Rasterizes the objects visible to `rig`. A cell belongs to an object when
/// its centre lies inside the footprint; it is visible when the centre is in
/// the field of view and the sight line from the rig does not cross another
/// footprint. Where footprints overlap the nearer object wins. Every other
/// cell is zero.
template <typename T = float>
BevGrid<T> rasterize_bev(const WorldState& world, const AgentRig& rig, const BevGeometry& g,
                         std::uint64_t signature_seed = 0) {
  collamamba::detail::require(g.voxel > 0 && g.height >= 1 && g.width >= 1 && g.channels >= 1,
                              "rasterize_bev: invalid geometry");
  BevGrid<T> out(1, g.height, g.width, g.channels);
  std::vector<double> owner_dist(g.height * g.width, std::numeric_limits<double>::infinity());
  const double rx = rig.pose.x, ry = rig.pose.y;

  for (std::size_t oi = 0; oi < world.objects.size(); ++oi) {
    const SceneObject& o = world.objects[oi];
    double lo_x = o.x, hi_x = o.x, lo_y = o.y, hi_y = o.y;
    for (const auto& c : o.corners()) {
      lo_x = std::min(lo_x, c[0]);
      hi_x = std::max(hi_x, c[0]);
      lo_y = std::min(lo_y, c[1]);
      hi_y = std::max(hi_y, c[1]);
    }
    const auto col_of = [&](double x) { return std::floor((x - g.x_min) / g.voxel); };
    const auto row_of = [&](double y) { return std::floor((y - g.y_min) / g.voxel); };
    const double c0 = std::max(0.0, col_of(lo_x)), c1 = std::min(static_cast<double>(g.width) - 1, col_of(hi_x));
    const double r0 = std::max(0.0, row_of(lo_y)), r1 = std::min(static_cast<double>(g.height) - 1, row_of(hi_y));
    if (c0 > c1 || r0 > r1) continue;

    std::vector<T> sig;
    for (auto r = static_cast<std::size_t>(r0); r <= static_cast<std::size_t>(r1); ++r) {
      for (auto c = static_cast<std::size_t>(c0); c <= static_cast<std::size_t>(c1); ++c) {
        const double px = g.cell_x(c), py = g.cell_y(r);
        if (!o.contains(px, py) || !detail::in_fov(rig, px, py)) continue;
        const double dist = std::hypot(px - rx, py - ry);
        if (dist >= owner_dist[r * g.width + c]) continue;
        bool blocked = false;
        for (std::size_t oj = 0; oj < world.objects.size() && !blocked; ++oj)
          blocked = oj != oi && !world.objects[oj].contains(px, py) &&
                    detail::segment_hits_box(world.objects[oj], rx, ry, px, py);
        if (blocked) continue;
        if (sig.empty()) sig = detail::object_signature<T>(o.id, g.channels, signature_seed, rig.feature_seed);
        owner_dist[r * g.width + c] = dist;
        std::copy(sig.begin(), sig.end(), out.values.data() + (r * g.width + c) * g.channels);
      }
    }
  }
  return out;
}

/// Zeroes every cell whose centre is outside the rig's field of view.
template <typename T>
void apply_fov_mask(BevGrid<T>& grid, const AgentRig& rig, const BevGeometry& g) {
  collamamba::detail::require(grid.height() == g.height && grid.width() == g.width, "apply_fov_mask: extent mismatch");
  const std::size_t c = grid.channels();
  for (std::size_t s = 0; s < grid.batch(); ++s)
    for (std::size_t r = 0; r < g.height; ++r)
      for (std::size_t col = 0; col < g.width; ++col)
        if (!detail::in_fov(rig, g.cell_x(col), g.cell_y(r))) {
          T* cell = grid.sample(s) + (r * g.width + col) * c;
          std::fill(cell, cell + c, T(0));
        }
}

/// Rasters of every agent at one frame, in agent order.
template <typename T = float>
std::vector<BevGrid<T>> rasterize_frame(const Scene& scene, std::size_t frame, const BevGeometry& g) {
  collamamba::detail::require(frame < scene.frames.size(), "rasterize_frame: frame out of range");
  const auto& w = scene.frames[frame];
  std::vector<BevGrid<T>> out;
  out.reserve(w.agents.size());
  for (const auto& rig : w.agents) out.push_back(rasterize_bev<T>(w, rig, g, scene.config.seed));
  return out;
}

}  // namespace collamamba::synth
