#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "collamamba/net/config.hpp"
#include "collamamba/synth/dataset.hpp"
#include "collamamba/synth/rasterize.hpp"
#include "collamamba/synth/scene.hpp"

namespace cm = collamamba;
namespace sy = collamamba::synth;

namespace {

sy::BevGeometry small_geometry() {
  sy::BevGeometry g;
  g.x_min = -20;
  g.y_min = -10;
  g.voxel = 0.4;
  g.width = 100;
  g.height = 50;
  g.channels = 6;
  return g;
}

sy::AgentRig origin_rig() {
  sy::AgentRig rig;
  rig.pose = {-15, 0, 0};
  rig.fov_range = 100;
  rig.fov_half_angle = std::numbers::pi;
  rig.feature_seed = 3;
  return rig;
}

sy::SceneObject box(int id, double x, double y, double length, double width, double heading = 0) {
  sy::SceneObject o;
  o.id = id;
  o.x = x;
  o.y = y;
  o.length = length;
  o.width = width;
  o.heading = heading;
  return o;
}

std::size_t occupied(const cm::BevGrid<float>& g) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < g.tokens(); ++i) n += g.values.data()[i * g.channels()] != 0.0f;
  return n;
}

bool all_zero(const cm::BevGrid<float>& g) {
  for (float v : g.values.values())
    if (v != 0.0f) return false;
  return true;
}

}  // namespace

TEST(Scene, SameSeedSameTrajectories) {
  sy::SceneConfig cfg;
  cfg.seed = 4;
  cfg.frames = 30;
  EXPECT_EQ(sy::generate_scene(cfg), sy::generate_scene(cfg));
  sy::SceneConfig other = cfg;
  other.seed = 5;
  EXPECT_FALSE(sy::generate_scene(other) == sy::generate_scene(cfg));
}

TEST(Scene, NoObjectsMeansEmptyGroundTruth) {
  sy::SceneConfig cfg;
  cfg.n_objects = 0;
  cfg.frames = 5;
  const auto scene = sy::generate_scene(cfg);
  for (std::size_t f = 0; f < cfg.frames; ++f) EXPECT_TRUE(sy::ground_truth(scene, f).empty());
}

TEST(Scene, RejectsInvalidCounts) {
  sy::SceneConfig cfg;
  cfg.n_agents = 0;
  EXPECT_THROW(sy::generate_scene(cfg), cm::InvalidArgument);
  cfg.n_agents = 1;
  cfg.frames = 0;
  EXPECT_THROW(sy::generate_scene(cfg), cm::InvalidArgument);
}

TEST(Scene, FootprintsStayInsideWorldOverLongRollout) {
  sy::SceneConfig cfg;
  cfg.seed = 8;
  cfg.n_objects = 40;
  cfg.frames = 1000;
  cfg.max_speed = 60;
  cfg.bounds = {-30, 30, -12, 12};
  const auto scene = sy::generate_scene(cfg);
  std::size_t reflections = 0;
  for (std::size_t f = 0; f < scene.frames.size(); ++f) {
    for (std::size_t i = 0; i < scene.frames[f].objects.size(); ++i) {
      const auto& o = scene.frames[f].objects[i];
      for (const auto& c : o.corners()) {
        ASSERT_GE(c[0], cfg.bounds.x_min - 1e-9) << "frame " << f;
        ASSERT_LE(c[0], cfg.bounds.x_max + 1e-9) << "frame " << f;
        ASSERT_GE(c[1], cfg.bounds.y_min - 1e-9) << "frame " << f;
        ASSERT_LE(c[1], cfg.bounds.y_max + 1e-9) << "frame " << f;
      }
      if (f && o.vx != scene.frames[f - 1].objects[i].vx) ++reflections;
    }
    for (const auto& a : scene.frames[f].agents) {
      ASSERT_GE(a.pose.x, cfg.bounds.x_min);
      ASSERT_LE(a.pose.x, cfg.bounds.x_max);
    }
  }
  EXPECT_GT(reflections, 0u);
}

TEST(Raster, EmptyWorldIsZero) {
  sy::WorldState w;
  EXPECT_TRUE(all_zero(sy::rasterize_bev(w, origin_rig(), small_geometry())));
}

TEST(Raster, FootprintMatchesArea) {
  // 4.0 x 2.0 m box, axis aligned, edges on cell boundaries: 10 x 5 cells.
  const auto g = small_geometry();
  sy::WorldState w;
  w.objects.push_back(box(1, 2.0, 1.0, 4.0, 2.0));
  const auto grid = sy::rasterize_bev(w, origin_rig(), g);
  std::size_t r_lo = g.height, r_hi = 0, c_lo = g.width, c_hi = 0;
  for (std::size_t r = 0; r < g.height; ++r)
    for (std::size_t c = 0; c < g.width; ++c)
      if (grid.values.data()[(r * g.width + c) * g.channels] != 0.0f) {
        r_lo = std::min(r_lo, r);
        r_hi = std::max(r_hi, r);
        c_lo = std::min(c_lo, c);
        c_hi = std::max(c_hi, c);
      }
  EXPECT_EQ(occupied(grid), 50u);
  EXPECT_EQ(c_hi - c_lo + 1, 10u);
  EXPECT_EQ(r_hi - r_lo + 1, 5u);

  // Rotated box: count within one cell per edge of area / voxel^2.
  sy::WorldState rot;
  rot.objects.push_back(box(2, 3.1, -1.3, 4.6, 1.9, 0.7));
  const double area_cells = 4.6 * 1.9 / (0.4 * 0.4), perimeter_cells = 2 * (4.6 + 1.9) / 0.4;
  const double n = static_cast<double>(occupied(sy::rasterize_bev(rot, origin_rig(), g)));
  EXPECT_LE(std::abs(n - area_cells), perimeter_cells) << n << " vs " << area_cells;
}

TEST(Raster, ObjectOutsideFovLeavesGridEmpty) {
  auto rig = origin_rig();
  rig.pose = {0, 0, 0};
  rig.fov_half_angle = std::numbers::pi / 4;
  sy::WorldState w;
  w.objects.push_back(box(1, -10, 0, 4, 2));
  EXPECT_TRUE(all_zero(sy::rasterize_bev(w, rig, small_geometry())));
  rig.fov_half_angle = std::numbers::pi;
  rig.fov_range = 5;
  EXPECT_TRUE(all_zero(sy::rasterize_bev(w, rig, small_geometry())));
}

TEST(Raster, NearerObjectOccludesFartherOne) {
  const auto g = small_geometry();
  sy::WorldState far_only;
  far_only.objects.push_back(box(2, 5, 0.1, 2, 2));
  sy::WorldState both = far_only;
  both.objects.push_back(box(1, 0, 0.1, 2, 6));
  const std::size_t alone = occupied(sy::rasterize_bev(far_only, origin_rig(), g));
  const std::size_t blocker = occupied(sy::rasterize_bev(sy::WorldState{0, {box(1, 0, 0.1, 2, 6)}, {}}, origin_rig(), g));
  const std::size_t together = occupied(sy::rasterize_bev(both, origin_rig(), g));
  EXPECT_EQ(alone, 25u);
  EXPECT_EQ(together, blocker);
}

TEST(Raster, TranslationShiftsFootprint) {
  const auto g = small_geometry();
  sy::WorldState a, b;
  a.objects.push_back(box(1, 1.3, 0.7, 3.3, 1.7, 0.4));
  b.objects.push_back(box(1, 1.3 + 3 * 0.4, 0.7 - 2 * 0.4, 3.3, 1.7, 0.4));
  const auto ga = sy::rasterize_bev(a, origin_rig(), g), gb = sy::rasterize_bev(b, origin_rig(), g);
  std::size_t mismatches = 0;
  for (std::size_t r = 2; r < g.height; ++r)
    for (std::size_t c = 0; c + 3 < g.width; ++c) {
      const bool in_a = ga.values.data()[(r * g.width + c) * g.channels] != 0.0f;
      const bool in_b = gb.values.data()[((r - 2) * g.width + c + 3) * g.channels] != 0.0f;
      mismatches += in_a != in_b;
    }
  // Cell centres sit near the rotated edges, so rounding may flip a couple.
  EXPECT_LE(mismatches, 2u);
  EXPECT_EQ(occupied(ga) > 0, true);
}

TEST(Raster, SignatureSharedAcrossAgents) {
  const auto g = small_geometry();
  sy::WorldState w;
  w.objects.push_back(box(7, 0, 0, 2, 2));
  auto rig_a = origin_rig(), rig_b = origin_rig();
  rig_b.pose = {15, 5, 3.0};
  rig_b.feature_seed = 99;
  const auto ga = sy::rasterize_bev(w, rig_a, g, 1), gb = sy::rasterize_bev(w, rig_b, g, 1);
  const std::size_t cell = (25 * g.width + 50) * g.channels;
  double dot = 0, na = 0, nb = 0;
  EXPECT_EQ(ga.values.data()[cell], 1.0f);
  for (std::size_t k = 1; k < g.channels; ++k) {
    const double x = ga.values.data()[cell + k], y = gb.values.data()[cell + k];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  EXPECT_GT(dot / std::sqrt(na * nb), 0.95);
}

TEST(Raster, FovMaskIsIdempotent) {
  const auto g = small_geometry();
  sy::SceneConfig cfg;
  cfg.bounds = {-20, 20, -10, 10};
  cfg.n_objects = 15;
  cfg.fov_half_angle = 1.0;
  cfg.fov_range = 25;
  const auto scene = sy::generate_scene(cfg);
  const auto& rig = scene.frames[0].agents[0];
  auto grid = sy::rasterize_bev(scene.frames[0], rig, g);
  auto masked = grid;
  sy::apply_fov_mask(masked, rig, g);
  EXPECT_EQ(masked.values, grid.values);
  cm::BevGrid<float> ones(1, g.height, g.width, g.channels, 1.0f);
  sy::apply_fov_mask(ones, rig, g);
  auto twice = ones;
  sy::apply_fov_mask(twice, rig, g);
  EXPECT_EQ(twice.values, ones.values);
}

TEST(Raster, GeometryFollowsNetConfig) {
  const auto g = sy::bev_geometry(cm::NetConfig{});
  EXPECT_EQ(g.height, 200u);
  EXPECT_EQ(g.width, 704u);
  EXPECT_EQ(g.channels, 64u);
}

TEST(Dataset, RoundTripIsBitwise) {
  sy::SceneConfig cfg;
  cfg.seed = 12;
  cfg.frames = 3;
  cfg.n_agents = 2;
  cfg.bounds = {-20, 20, -10, 10};
  const auto d = sy::build_dataset(cfg, small_geometry());
  std::stringstream ss;
  sy::write_dataset(ss, d);
  const auto back = sy::read_dataset(ss);
  EXPECT_EQ(back.scene, d.scene);
  ASSERT_EQ(back.grids.size(), d.grids.size());
  for (std::size_t f = 0; f < d.grids.size(); ++f)
    for (std::size_t a = 0; a < d.grids[f].size(); ++a) EXPECT_EQ(back.grids[f][a].values, d.grids[f][a].values);
  EXPECT_EQ(back.geometry.width, d.geometry.width);
  EXPECT_EQ(back.geometry.x_min, d.geometry.x_min);
}

TEST(Dataset, EmptySceneRoundTrips) {
  sy::SceneConfig cfg;
  cfg.n_objects = 0;
  cfg.frames = 1;
  cfg.n_agents = 1;
  sy::Dataset d{sy::generate_scene(cfg), small_geometry(), {}};
  std::stringstream ss;
  sy::write_dataset(ss, d);
  const auto back = sy::read_dataset(ss);
  EXPECT_EQ(back.scene, d.scene);
  EXPECT_TRUE(back.grids.empty());
}

TEST(Dataset, CorruptedMagicIsFormatError) {
  sy::SceneConfig cfg;
  cfg.frames = 2;
  std::stringstream ss;
  sy::write_dataset(ss, sy::Dataset{sy::generate_scene(cfg), small_geometry(), {}});
  std::string bytes = ss.str();
  bytes[2] = 'W';
  std::stringstream bad(bytes);
  EXPECT_THROW(sy::read_dataset(bad), cm::FormatError);
  std::stringstream cut(ss.str().substr(0, ss.str().size() - 9));
  EXPECT_THROW(sy::read_dataset(cut), cm::FormatError);
}
