#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <vector>

#include <nlohmann/json.hpp>

#include "collamamba/core/error.hpp"
#include "collamamba/core/random.hpp"

namespace collamamba::synth {

struct Pose {
  double x = 0, y = 0, heading = 0;  // metres, radians
  friend bool operator==(const Pose&, const Pose&) = default;
};

/// Oriented box moving at constant velocity.
struct SceneObject {
  int id = 0;
  double x = 0, y = 0;            // centre, metres
  double length = 4.5, width = 2; // extents along / across the heading
  double heading = 0;
  double vx = 0, vy = 0;          // m/s

  /// Corner points, counter-clockwise.
  std::array<std::array<double, 2>, 4> corners() const {
    const double c = std::cos(heading), s = std::sin(heading), hl = length / 2, hw = width / 2;
    std::array<std::array<double, 2>, 4> out{};
    const double sx[4] = {hl, -hl, -hl, hl}, sy[4] = {hw, hw, -hw, -hw};
    for (int k = 0; k < 4; ++k) out[k] = {x + c * sx[k] - s * sy[k], y + s * sx[k] + c * sy[k]};
    return out;
  }

  /// Point in the box's local frame.
  std::array<double, 2> to_local(double px, double py) const {
    const double c = std::cos(heading), s = std::sin(heading), dx = px - x, dy = py - y;
    return {c * dx + s * dy, -s * dx + c * dy};
  }

  bool contains(double px, double py) const {
    const auto [u, v] = to_local(px, py);
    return std::abs(u) <= length / 2 && std::abs(v) <= width / 2;
  }

  friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

/// Sensor placement and field of view. The feature seed perturbs object
/// signatures per agent.
struct AgentRig {
  int id = 0;
  Pose pose;
  double fov_range = 70.0;                    // metres
  double fov_half_angle = std::numbers::pi;   // pi covers the full circle
  std::uint64_t feature_seed = 0;

  friend bool operator==(const AgentRig&, const AgentRig&) = default;
};

/// Axis-aligned world rectangle. Scenes share one frame for all agents, so
/// rasters of different agents are aligned cell for cell.
struct WorldBounds {
  double x_min = -140.8, x_max = 140.8, y_min = -40.0, y_max = 40.0;
  friend bool operator==(const WorldBounds&, const WorldBounds&) = default;
};

struct SceneConfig {
  std::uint64_t seed = 0;
  std::size_t n_agents = 2;
  std::size_t n_objects = 12;
  std::size_t frames = 10;
  double frame_period_ms = 100.0;
  WorldBounds bounds;
  double max_speed = 15.0;       // m/s
  double agent_speed = 8.0;      // m/s
  double fov_range = 70.0;
  double fov_half_angle = std::numbers::pi;

  void validate() const {
    collamamba::detail::require(n_agents >= 1, "scene: n_agents must be >= 1");
    collamamba::detail::require(frames >= 1, "scene: frames must be >= 1");
    collamamba::detail::require(frame_period_ms > 0, "scene: frame period must be positive");
    collamamba::detail::require(bounds.x_max - bounds.x_min > 10 && bounds.y_max - bounds.y_min > 10,
                    "scene: world must be larger than 10 m on each side");
    collamamba::detail::require(fov_range > 0 && fov_half_angle > 0, "scene: field of view must be positive");
  }

  friend bool operator==(const SceneConfig&, const SceneConfig&) = default;
};

/// World state at one frame.
struct WorldState {
  std::size_t frame = 0;
  std::vector<SceneObject> objects;
  std::vector<AgentRig> agents;

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

struct Scene {
  SceneConfig config;
  std::vector<WorldState> frames;

  friend bool operator==(const Scene&, const Scene&) = default;
};

namespace detail {

/// Advances one coordinate and reflects it off [lo, hi].
inline void reflect(double& p, double& v, double dt, double lo, double hi) {
  p += v * dt;
  if (hi <= lo) {
    p = (lo + hi) / 2;
    v = 0;
    return;
  }
  // Bounded number of folds even for very fast movers.
  for (int k = 0; k < 64 && (p < lo || p > hi); ++k) {
    if (p > hi) p = 2 * hi - p;
    if (p < lo) p = 2 * lo - p;
    v = -v;
  }
  p = std::clamp(p, lo, hi);
}

inline double half_diagonal(const SceneObject& o) { return 0.5 * std::hypot(o.length, o.width); }

inline void step_object(SceneObject& o, double dt, const WorldBounds& b) {
  const double r = half_diagonal(o);
  const double vx0 = o.vx, vy0 = o.vy;
  reflect(o.x, o.vx, dt, b.x_min + r, b.x_max - r);
  reflect(o.y, o.vy, dt, b.y_min + r, b.y_max - r);
  if (o.vx != vx0 || o.vy != vy0) o.heading = std::atan2(o.vy, o.vx);
}

}  // namespace detail

/// Seeded placement and constant-velocity motion with reflection at the world
/// bounds. Objects are placed so their whole footprint lies inside the world.
inline Scene generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  const WorldBounds& b = cfg.bounds;
  Rng rng(derive_seed(cfg.seed, "scene"));
  WorldState s0;

  for (std::size_t i = 0; i < cfg.n_objects; ++i) {
    SceneObject o;
    o.id = static_cast<int>(i) + 1;
    o.length = rng.uniform(3.8, 5.2);
    o.width = rng.uniform(1.7, 2.2);
    const double r = detail::half_diagonal(o);
    o.x = rng.uniform(b.x_min + r, b.x_max - r);
    o.y = rng.uniform(b.y_min + r, b.y_max - r);
    o.heading = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const double speed = rng.uniform(0.0, cfg.max_speed);
    o.vx = speed * std::cos(o.heading);
    o.vy = speed * std::sin(o.heading);
    s0.objects.push_back(o);
  }

  // Agents start spread along the x axis, facing the middle of the world.
  const double cx = (b.x_min + b.x_max) / 2, cy = (b.y_min + b.y_max) / 2;
  for (std::size_t a = 0; a < cfg.n_agents; ++a) {
    AgentRig rig;
    rig.id = static_cast<int>(a);
    const double t = (static_cast<double>(a) + 0.5) / static_cast<double>(cfg.n_agents);
    rig.pose.x = b.x_min + 5 + t * (b.x_max - b.x_min - 10);
    rig.pose.y = cy + rng.uniform(-0.25, 0.25) * (b.y_max - b.y_min);
    rig.pose.heading = std::atan2(cy - rig.pose.y, cx - rig.pose.x);
    if (std::abs(cx - rig.pose.x) < 1e-9 && std::abs(cy - rig.pose.y) < 1e-9) rig.pose.heading = 0;
    rig.fov_range = cfg.fov_range;
    rig.fov_half_angle = cfg.fov_half_angle;
    rig.feature_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(a) + 1000);
    s0.agents.push_back(rig);
  }

  std::vector<double> agent_v(2 * cfg.n_agents);
  for (std::size_t a = 0; a < cfg.n_agents; ++a) {
    const double h = rng.uniform(-std::numbers::pi, std::numbers::pi);
    agent_v[2 * a] = cfg.agent_speed * std::cos(h);
    agent_v[2 * a + 1] = cfg.agent_speed * std::sin(h);
  }

  Scene scene{cfg, {}};
  scene.frames.reserve(cfg.frames);
  const double dt = cfg.frame_period_ms / 1000.0;
  for (std::size_t f = 0; f < cfg.frames; ++f) {
    s0.frame = f;
    scene.frames.push_back(s0);
    for (auto& o : s0.objects) detail::step_object(o, dt, b);
    for (std::size_t a = 0; a < cfg.n_agents; ++a) {
      auto& p = s0.agents[a].pose;
      detail::reflect(p.x, agent_v[2 * a], dt, b.x_min, b.x_max);
      detail::reflect(p.y, agent_v[2 * a + 1], dt, b.y_min, b.y_max);
    }
  }
  return scene;
}

/// Ground-truth boxes of one frame, restricted to the world rectangle.
inline std::vector<SceneObject> ground_truth(const Scene& scene, std::size_t frame) {
  collamamba::detail::require(frame < scene.frames.size(), "ground_truth: frame out of range");
  std::vector<SceneObject> out;
  const auto& b = scene.config.bounds;
  for (const auto& o : scene.frames[frame].objects)
    if (o.x >= b.x_min && o.x <= b.x_max && o.y >= b.y_min && o.y <= b.y_max) out.push_back(o);
  return out;
}

// JSON forms used by scenario files and the dataset metadata block.

inline void to_json(nlohmann::json& j, const WorldBounds& b) {
  j = {{"x_min", b.x_min}, {"x_max", b.x_max}, {"y_min", b.y_min}, {"y_max", b.y_max}};
}
inline void from_json(const nlohmann::json& j, WorldBounds& b) {
  b.x_min = j.value("x_min", b.x_min);
  b.x_max = j.value("x_max", b.x_max);
  b.y_min = j.value("y_min", b.y_min);
  b.y_max = j.value("y_max", b.y_max);
}

inline void to_json(nlohmann::json& j, const SceneConfig& c) {
  j = {{"seed", c.seed},
       {"n_agents", c.n_agents},
       {"n_objects", c.n_objects},
       {"frames", c.frames},
       {"frame_period_ms", c.frame_period_ms},
       {"bounds", c.bounds},
       {"max_speed", c.max_speed},
       {"agent_speed", c.agent_speed},
       {"fov_range", c.fov_range},
       {"fov_half_angle", c.fov_half_angle}};
}
inline void from_json(const nlohmann::json& j, SceneConfig& c) {
  c.seed = j.value("seed", c.seed);
  c.n_agents = j.value("n_agents", c.n_agents);
  c.n_objects = j.value("n_objects", c.n_objects);
  c.frames = j.value("frames", c.frames);
  c.frame_period_ms = j.value("frame_period_ms", c.frame_period_ms);
  if (j.contains("bounds")) c.bounds = j.at("bounds").get<WorldBounds>();
  c.max_speed = j.value("max_speed", c.max_speed);
  c.agent_speed = j.value("agent_speed", c.agent_speed);
  c.fov_range = j.value("fov_range", c.fov_range);
  c.fov_half_angle = j.value("fov_half_angle", c.fov_half_angle);
}

}  // namespace collamamba::synth
