#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "collamamba/core/error.hpp"
#include "collamamba/core/random.hpp"
#include "collamamba/net/config.hpp"

namespace collamamba::sim {

enum class LatencyKind { Fixed, Uniform, Normal };
enum class MissMode { Periodic, Bernoulli };

/// Per-link delay. Fixed: mean_ms. Uniform: mean_ms +- jitter_ms.
/// Normal: N(mean_ms, jitter_ms), clipped at 0.
struct LatencyConfig {
  LatencyKind kind = LatencyKind::Fixed;
  double mean_ms = 20.0;
  double jitter_ms = 0.0;
};

inline constexpr std::size_t kNoMiss = 0;

struct ScenarioConfig {
  std::size_t n_agents = 2;
  std::size_t frames = 40;
  double frame_period_ms = 100.0;
  LatencyConfig latency;
  std::size_t miss_interval = kNoMiss;  // m; kNoMiss disables
  MissMode miss_mode = MissMode::Periodic;
  double miss_probability = 0.0;       // Bernoulli mode
  double miss_latency_ms = std::numeric_limits<double>::infinity();  // delay on a miss; inf drops
  double tau0_ms = 50.0;
  std::uint64_t seed = 0;
  Variant variant = Variant::Miss;
  std::size_t n_objects = 8;
  double pose_noise_std_m = 0.0;
  std::size_t payload_bytes_per_element = 4;
  NetConfig network = compact_net_config();

  /// Frames before history-based modules may run: l_his of the variant, 0
  /// for Simple.
  std::size_t warmup_frames() const { return variant == Variant::Simple ? 0 : network.history_len(variant); }

  void validate() const {
    auto req = [](bool ok, const std::string& msg) { collamamba::detail::require(ok, "scenario: " + msg); };
    req(n_agents >= 1, "n_agents must be >= 1");
    req(frames >= 1, "frames must be >= 1");
    req(frame_period_ms > 0, "frame_period_ms must be positive");
    req(tau0_ms >= 0, "tau0_ms must be >= 0");
    req(latency.mean_ms >= 0 && latency.jitter_ms >= 0, "latency must be non-negative");
    req(!(miss_latency_ms < 0), "miss_latency_ms must be >= 0");
    req(miss_probability >= 0 && miss_probability <= 1, "miss_probability must lie in [0, 1]");
    req(payload_bytes_per_element == 4 || payload_bytes_per_element == 8, "payload precision must be 4 or 8 bytes");
    req(pose_noise_std_m >= 0, "pose_noise_std_m must be >= 0");
    network.validate();
  }

  /// True if frame `f` is a miss-receiving frame for `receiver`. Periodic
  /// misses fall on frames congruent to the warm-up length modulo m, so the
  /// post-warm-up count is exactly ceil((T - warmup) / m).
  bool is_miss_frame(std::size_t f, int receiver) const {
    if (miss_mode == MissMode::Bernoulli) {
      if (miss_probability <= 0) return false;
      Rng rng(derive_seed(derive_seed(seed, "miss"), f * 65536 + static_cast<std::uint64_t>(receiver)));
      return rng.uniform() < miss_probability;
    }
    if (miss_interval == kNoMiss) return false;
    const std::size_t w = warmup_frames() % miss_interval;
    return (f + miss_interval - w) % miss_interval == 0;
  }

  /// Delay of the message sender -> receiver at frame f.
  double link_latency_ms(std::size_t f, int sender, int receiver) const {
    if (is_miss_frame(f, receiver)) return miss_latency_ms;
    switch (latency.kind) {
      case LatencyKind::Fixed: return latency.mean_ms;
      case LatencyKind::Uniform:
      case LatencyKind::Normal: {
        const std::uint64_t link = (f * 1024 + static_cast<std::uint64_t>(sender)) * 1024 + static_cast<std::uint64_t>(receiver);
        Rng rng(derive_seed(derive_seed(seed, "latency"), link));
        const double v = latency.kind == LatencyKind::Uniform
                             ? rng.uniform(latency.mean_ms - latency.jitter_ms, latency.mean_ms + latency.jitter_ms)
                             : rng.normal(latency.mean_ms, latency.jitter_ms);
        return std::max(0.0, v);
      }
    }
    return latency.mean_ms;
  }
};

// ---------------------------------------------------------------------------
// JSON schema
//
// {
//   "n_agents": 2, "frames": 200, "frame_period_ms": 100,
//   "latency": {"kind": "fixed|uniform|normal", "mean_ms": 20, "jitter_ms": 0},
//   "miss_interval": 2 | "inf",
//   "miss_mode": "periodic|bernoulli", "miss_probability": 0.0,
//   "miss_latency_ms": "inf" | <ms>,
//   "tau0_ms": 50, "seed": 1, "variant": "Simple|ST|Miss",
//   "n_objects": 8, "pose_noise_std_m": 0.0, "payload_precision": "f32|f64",
//   "network": "compact" | "default" | { NetConfig keys }
// }

namespace detail {
inline double parse_ms_or_inf(const nlohmann::json& j, const char* key) {
  if (j.is_string()) {
    collamamba::detail::require(j.get<std::string>() == "inf", std::string("scenario: ") + key + " must be a number or \"inf\"");
    return std::numeric_limits<double>::infinity();
  }
  return j.get<double>();
}
}  // namespace detail

inline void to_json(nlohmann::json& j, const ScenarioConfig& c) {
  auto inf_or = [](double v) { return std::isinf(v) ? nlohmann::json("inf") : nlohmann::json(v); };
  j = {{"n_agents", c.n_agents},
       {"frames", c.frames},
       {"frame_period_ms", c.frame_period_ms},
       {"latency",
        {{"kind", c.latency.kind == LatencyKind::Fixed ? "fixed" : c.latency.kind == LatencyKind::Uniform ? "uniform" : "normal"},
         {"mean_ms", c.latency.mean_ms},
         {"jitter_ms", c.latency.jitter_ms}}},
       {"miss_interval", c.miss_interval == kNoMiss ? nlohmann::json("inf") : nlohmann::json(c.miss_interval)},
       {"miss_mode", c.miss_mode == MissMode::Periodic ? "periodic" : "bernoulli"},
       {"miss_probability", c.miss_probability},
       {"miss_latency_ms", inf_or(c.miss_latency_ms)},
       {"tau0_ms", c.tau0_ms},
       {"seed", c.seed},
       {"variant", std::string(variant_name(c.variant))},
       {"n_objects", c.n_objects},
       {"pose_noise_std_m", c.pose_noise_std_m},
       {"payload_precision", c.payload_bytes_per_element == 8 ? "f64" : "f32"},
       {"network", c.network}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline void from_json(const nlohmann::json& j, ScenarioConfig& c) {
  using collamamba::detail::require;
  require(j.is_object(), "scenario: top level must be an object");
  static const char* known[] = {"n_agents", "frames", "frame_period_ms", "latency", "miss_interval", "miss_mode",
                                "miss_probability", "miss_latency_ms", "tau0_ms", "seed", "variant", "n_objects",
                                "pose_noise_std_m", "payload_precision", "network"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    require(ok, "scenario: unknown key '" + it.key() + "'");
  }
  try {
    c.n_agents = j.value("n_agents", c.n_agents);
    c.frames = j.value("frames", c.frames);
    c.frame_period_ms = j.value("frame_period_ms", c.frame_period_ms);
    if (j.contains("latency")) {
      const auto& l = j.at("latency");
      const std::string kind = l.value("kind", std::string("fixed"));
      require(kind == "fixed" || kind == "uniform" || kind == "normal", "scenario: unknown latency kind '" + kind + "'");
      c.latency.kind = kind == "fixed" ? LatencyKind::Fixed : kind == "uniform" ? LatencyKind::Uniform : LatencyKind::Normal;
      c.latency.mean_ms = l.value("mean_ms", c.latency.mean_ms);
      c.latency.jitter_ms = l.value("jitter_ms", c.latency.jitter_ms);
    }
    if (j.contains("miss_interval")) {
      const auto& m = j.at("miss_interval");
      if (m.is_string() || m.is_null()) {
        require(m.is_null() || m.get<std::string>() == "inf", "scenario: miss_interval must be >= 1 or \"inf\"");
        c.miss_interval = kNoMiss;
      } else {
        const auto v = m.get<long long>();
        require(v >= 1, "scenario: miss_interval must be >= 1 or \"inf\"");
        c.miss_interval = static_cast<std::size_t>(v);
      }
    }
    if (j.contains("miss_mode")) {
      const auto mode = j.at("miss_mode").get<std::string>();
      require(mode == "periodic" || mode == "bernoulli", "scenario: unknown miss_mode '" + mode + "'");
      c.miss_mode = mode == "periodic" ? MissMode::Periodic : MissMode::Bernoulli;
    }
    c.miss_probability = j.value("miss_probability", c.miss_probability);
    if (j.contains("miss_latency_ms")) c.miss_latency_ms = detail::parse_ms_or_inf(j.at("miss_latency_ms"), "miss_latency_ms");
    c.tau0_ms = j.value("tau0_ms", c.tau0_ms);
    c.seed = j.value("seed", c.seed);
    if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
    c.n_objects = j.value("n_objects", c.n_objects);
    c.pose_noise_std_m = j.value("pose_noise_std_m", c.pose_noise_std_m);
    if (j.contains("payload_precision")) {
      const auto p = j.at("payload_precision").get<std::string>();
      require(p == "f32" || p == "f64", "scenario: payload_precision must be f32 or f64");
      c.payload_bytes_per_element = p == "f64" ? 8 : 4;
    }
    if (j.contains("network")) {
      const auto& n = j.at("network");
      if (n.is_string()) {
        const auto name = n.get<std::string>();
        require(name == "compact" || name == "default", "scenario: network must be \"compact\", \"default\" or an object");
        c.network = name == "compact" ? compact_net_config() : NetConfig{};
      } else {
        c.network = n.get<NetConfig>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("scenario: ") + e.what());
  }
}

inline ScenarioConfig parse_scenario(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("scenario: ") + e.what());
  }
  auto c = j.get<ScenarioConfig>();
  c.validate();
  return c;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open scenario '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_scenario(ss.str());
}

}  // namespace collamamba::sim
