#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "collamamba/core/binary_io.hpp"
#include "collamamba/synth/rasterize.hpp"
#include "collamamba/synth/scene.hpp"

namespace collamamba::synth {

/// A scene with optional per-agent rasters, grids[frame][agent].
struct Dataset {
  Scene scene;
  BevGeometry geometry;
  std::vector<std::vector<BevGrid<float>>> grids;
};

/// Dataset container:
///   "CMBD" | u32 version | string metadata JSON {"scene", "geometry"}
///   | u32 frames | per frame: u32 objects, object records; u32 agents, rig records
///   | u32 raster frames | per raster frame: u32 agents, tensor records
/// Object record: i32 id, f64 x, y, length, width, heading, vx, vy.
/// Rig record: i32 id, f64 x, y, heading, fov_range, fov_half_angle, u64 feature_seed.
/// Numeric state is stored in binary so a round trip is bit-exact.
inline constexpr std::string_view kDatasetMagic = "CMBD";
inline constexpr std::uint32_t kDatasetVersion = 1;

inline void write_dataset(std::ostream& os, const Dataset& d) {
  io::Writer w(os);
  w.magic(kDatasetMagic);
  w.u32(kDatasetVersion);
  const auto& g = d.geometry;
  nlohmann::json meta = {{"scene", d.scene.config},
                         {"geometry",
                          {{"x_min", g.x_min}, {"y_min", g.y_min}, {"voxel", g.voxel},
                           {"height", g.height}, {"width", g.width}, {"channels", g.channels}}}};
  w.string(meta.dump());
  w.u32(static_cast<std::uint32_t>(d.scene.frames.size()));
  for (const auto& f : d.scene.frames) {
    w.u32(static_cast<std::uint32_t>(f.objects.size()));
    for (const auto& o : f.objects) {
      w.scalar<std::int32_t>(o.id);
      for (double v : {o.x, o.y, o.length, o.width, o.heading, o.vx, o.vy}) w.scalar(v);
    }
    w.u32(static_cast<std::uint32_t>(f.agents.size()));
    for (const auto& a : f.agents) {
      w.scalar<std::int32_t>(a.id);
      for (double v : {a.pose.x, a.pose.y, a.pose.heading, a.fov_range, a.fov_half_angle}) w.scalar(v);
      w.u64(a.feature_seed);
    }
  }
  w.u32(static_cast<std::uint32_t>(d.grids.size()));
  for (const auto& frame : d.grids) {
    w.u32(static_cast<std::uint32_t>(frame.size()));
    for (const auto& grid : frame) w.tensor(grid.values);
  }
  if (!w.ok()) throw Error("write_dataset: stream error");
}

/// Everything is decoded into locals first; a malformed file throws
/// FormatError without returning partial data.
inline Dataset read_dataset(std::istream& is) {
  io::Reader r(is, "dataset");
  r.expect_magic(kDatasetMagic);
  const std::uint32_t version = r.u32();
  if (version != kDatasetVersion) r.fail("unsupported version " + std::to_string(version));
  Dataset d;
  try {
    const auto meta = nlohmann::json::parse(r.string());
    d.scene.config = meta.at("scene").get<SceneConfig>();
    const auto& g = meta.at("geometry");
    d.geometry = {g.at("x_min").get<double>(), g.at("y_min").get<double>(), g.at("voxel").get<double>(),
                  g.at("height").get<std::size_t>(), g.at("width").get<std::size_t>(),
                  g.at("channels").get<std::size_t>()};
  } catch (const nlohmann::json::exception& e) {
    r.fail(std::string("bad metadata: ") + e.what());
  }
  const std::uint32_t frames = r.u32();
  if (frames > (1u << 24)) r.fail("frame count out of range");
  for (std::uint32_t f = 0; f < frames; ++f) {
    WorldState s;
    s.frame = f;
    const std::uint32_t n_obj = r.u32();
    if (n_obj > (1u << 20)) r.fail("object count out of range");
    for (std::uint32_t i = 0; i < n_obj; ++i) {
      SceneObject o;
      o.id = r.scalar<std::int32_t>();
      for (double* v : {&o.x, &o.y, &o.length, &o.width, &o.heading, &o.vx, &o.vy}) *v = r.scalar<double>();
      s.objects.push_back(o);
    }
    const std::uint32_t n_agents = r.u32();
    if (n_agents > (1u << 16)) r.fail("agent count out of range");
    for (std::uint32_t i = 0; i < n_agents; ++i) {
      AgentRig a;
      a.id = r.scalar<std::int32_t>();
      for (double* v : {&a.pose.x, &a.pose.y, &a.pose.heading, &a.fov_range, &a.fov_half_angle})
        *v = r.scalar<double>();
      a.feature_seed = r.u64();
      s.agents.push_back(a);
    }
    d.scene.frames.push_back(std::move(s));
  }
  const std::uint32_t raster_frames = r.u32();
  if (raster_frames > frames) r.fail("more raster frames than scene frames");
  for (std::uint32_t f = 0; f < raster_frames; ++f) {
    const std::uint32_t n = r.u32();
    if (n > (1u << 16)) r.fail("raster count out of range");
    std::vector<BevGrid<float>> row;
    for (std::uint32_t a = 0; a < n; ++a) {
      BevGrid<float> grid;
      try {
        grid = BevGrid<float>(r.tensor<float>());
      } catch (const InvalidArgument& e) {
        r.fail(e.what());
      }
      row.push_back(std::move(grid));
    }
    d.grids.push_back(std::move(row));
  }
  return d;
}

inline void export_dataset(const std::string& path, const Dataset& d) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  write_dataset(os, d);
}

inline Dataset import_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path + "'");
  return read_dataset(is);
}

/// Generates a scene and rasterizes every agent at every frame.
inline Dataset build_dataset(const SceneConfig& cfg, const BevGeometry& geometry) {
  Dataset d{generate_scene(cfg), geometry, {}};
  for (std::size_t f = 0; f < d.scene.frames.size(); ++f) d.grids.push_back(rasterize_frame<float>(d.scene, f, geometry));
  return d;
}

}  // namespace collamamba::synth
