#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "collamamba/core/random.hpp"
#include "collamamba/net/forward.hpp"
#include "collamamba/net/model.hpp"
#include "collamamba/net/trajectory.hpp"
#include "collamamba/sim/pose_noise.hpp"
#include "collamamba/sim/protocol.hpp"
#include "collamamba/sim/scenario.hpp"
#include "collamamba/synth/rasterize.hpp"
#include "collamamba/synth/scene.hpp"

namespace collamamba::sim {

template <typename T>
struct RunHooks {
  /// Sees every in-flight payload, accepted or not, before the receiver
  /// decides, and may modify it.
  std::function<void(std::size_t frame, int sender, int receiver, FeatureSequence<T>& payload)> payload_mutator;
  /// Called once per agent-frame with the logged record and the detections.
  std::function<void(const CommRecord&, const DetectionOutput<T>&)> on_output;
  /// Placeholder for a detection score against ground truth; no loss is
  /// implemented. The value is stored in CommRecord::score.
  std::function<double(const DetectionOutput<T>&, const std::vector<synth::SceneObject>&)> score;
};

namespace detail {

template <typename T>
std::uint64_t digest(const DetectionOutput<T>& out) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto* t : {&out.cls.values, &out.reg.values, &out.dir.values}) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(t->data());
    for (std::size_t i = 0; i < t->size() * sizeof(T); ++i) {
      h ^= bytes[i];
      h *= 0x00000100000001b3ull;
    }
  }
  return h;
}

/// Rounds the payload to the wire precision.
template <typename T>
void to_wire(FeatureSequence<T>& s, std::size_t bytes_per_element) {
  if (bytes_per_element == 4 && sizeof(T) > 4)
    for (auto& v : s.values.values()) v = static_cast<T>(static_cast<float>(v));
}

}  // namespace detail

/// Runs the scenario with the given weights. Frame loop: every agent
/// rasterizes, encodes and (ST / Miss, once its local buffer is full) boosts
/// its features, then broadcasts them. Each agent then collects the messages
/// that arrive within tau0, picks its mode, fuses or predicts, decodes and
/// detects. Agents are processed in id order; the run is deterministic.
template <typename T>
CommLog run_scenario(const ScenarioConfig& cfg, const Model<T>& model, const RunHooks<T>& hooks = {}) {
  cfg.validate();
  collamamba::detail::require(model.variant == cfg.variant, "run_scenario: model variant does not match the scenario");
  collamamba::detail::require(nlohmann::json(model.cfg) == nlohmann::json(cfg.network),
                              "run_scenario: model network config does not match the scenario");
  const NetConfig& net = model.cfg;
  const std::size_t n = cfg.n_agents;
  const bool boosting = has_boosting(cfg.variant), prediction = has_prediction(cfg.variant);

  synth::SceneConfig sc;
  sc.seed = cfg.seed;
  sc.n_agents = n;
  sc.n_objects = cfg.n_objects;
  sc.frames = cfg.frames;
  sc.frame_period_ms = cfg.frame_period_ms;
  sc.bounds = synth::world_bounds(net);
  sc.fov_range = std::min(sc.fov_range, 0.5 * std::hypot(net.x_max - net.x_min, net.y_max - net.y_min));
  const synth::Scene scene = synth::generate_scene(sc);
  const synth::BevGeometry geom = synth::bev_geometry(net);

  std::vector<TrajectoryBuffer<T>> local;
  std::vector<GlobalTrajectory<T>> global;
  for (std::size_t i = 0; i < n; ++i) {
    if (boosting) local.emplace_back(net.history_len(cfg.variant));
    if (prediction) global.emplace_back(net.miss_history);
  }

  const std::uint64_t payload_bytes =
      static_cast<std::uint64_t>(net.seq_len()) * net.channels() * cfg.payload_bytes_per_element;
  const double cv = comm_volume(payload_bytes);

  CommLog log;
  log.warmup_frames = cfg.warmup_frames();
  std::vector<FeatureSequence<T>> shared(n);

  for (std::size_t f = 0; f < cfg.frames; ++f) {
    const synth::WorldState& world = scene.frames[f];
    for (std::size_t i = 0; i < n; ++i) {
      BevGrid<T> grid = synth::rasterize_bev<T>(world, world.agents[i], geom, cfg.seed);
      const PoseError err = sample_pose_error(cfg.pose_noise_std_m, cfg.seed, f, static_cast<int>(i));
      grid = inject_pose_noise(grid, err, net.voxel);
      FeatureSequence<T> features = encode(model, grid);
      if (boosting) {
        local[i].push(std::move(grid));
        if (local[i].full()) features = boost_features(model, features, history_encode(model, stack_frames(local[i])));
      }
      detail::to_wire(features, cfg.payload_bytes_per_element);
      shared[i] = std::move(features);
    }

    const double frame_start = static_cast<double>(f) * cfg.frame_period_ms;
    for (std::size_t i = 0; i < n; ++i) {
      const int ego = static_cast<int>(i);
      double first = std::numeric_limits<double>::infinity(), last_accepted = 0;
      std::vector<std::pair<int, FeatureSequence<T>>> accepted;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double lat = cfg.link_latency_ms(f, static_cast<int>(j), ego);
        first = std::min(first, lat);
        FeatureSequence<T> payload = shared[j];
        if (hooks.payload_mutator) hooks.payload_mutator(f, static_cast<int>(j), ego, payload);
        if (lat <= cfg.tau0_ms) {
          accepted.emplace_back(static_cast<int>(j), std::move(payload));
          last_accepted = std::max(last_accepted, lat);
        }
      }
      const bool received = !accepted.empty();
      const bool ready = prediction && global[i].full();
      const Mode mode = n == 1 ? Mode::EgoOnly : decide_mode(first, received, cfg.tau0_ms, ready);

      CommRecord rec;
      rec.frame = f;
      rec.agent_id = ego;
      rec.mode = mode;
      rec.delta_tau_ms = first;
      rec.cv_log2 = cv;
      double waited = 0;
      if (n > 1) waited = accepted.size() == n - 1 ? last_accepted : cfg.tau0_ms;
      rec.wall_us = std::llround((frame_start + waited) * 1000.0);

      FeatureSequence<T> fused;
      if (mode == Mode::FeatureFusion) {
        std::vector<Neighbor<T>> nb;
        for (const auto& [id, payload] : accepted) nb.push_back({id, &payload});
        rec.messages = accepted.size();
        rec.bytes = payload_bytes * accepted.size();
        fused = fuse_global(model, shared[i], nb);
      } else if (mode == Mode::CollaborativePrediction) {
        const FeatureSequence<T> predicted = predict_global(model, global[i]);
        fused = fuse_global(model, shared[i], {{-1, &predicted}});
      } else {
        fused = shared[i];
      }
      if (prediction) global[i].push(fused);

      const DetectionOutput<T> out = detect(model, decode(model, fused));
      rec.output_digest = detail::digest(out);
      if (hooks.score) rec.score = hooks.score(out, synth::ground_truth(scene, f));
      if (hooks.on_output) hooks.on_output(rec, out);
      log.append(rec);
    }
  }
  return log;
}

}  // namespace collamamba::sim
