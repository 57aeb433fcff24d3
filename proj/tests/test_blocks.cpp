#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "collamamba/blocks/directions.hpp"
#include "collamamba/blocks/fusion.hpp"
#include "collamamba/blocks/layout.hpp"
#include "collamamba/blocks/mamba2d.hpp"
#include "collamamba/blocks/params.hpp"
#include "collamamba/blocks/patch.hpp"
#include "collamamba/blocks/st_mamba.hpp"
#include "collamamba/core/parallel.hpp"
#include "collamamba/core/random.hpp"

namespace cm = collamamba;

namespace {

cm::BlockConfig small_config() {
  cm::BlockConfig cfg;
  cfg.dim = 8;
  cfg.expand = 2;
  cfg.state = 4;
  cfg.dt_rank = 2;
  return cfg;
}

template <typename T>
void fill_normal(cm::Tensor<T>& t, std::uint64_t seed) {
  cm::Rng rng(seed);
  for (auto& v : t.values()) v = static_cast<T>(rng.normal());
}

template <typename T>
cm::TokenGrid<T> random_grid(std::size_t b, std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed) {
  cm::TokenGrid<T> g(b, h, w, c);
  fill_normal(g.values, seed);
  return g;
}

template <typename T>
cm::FeatureSequence<T> random_sequence(std::size_t b, std::size_t l, std::size_t c, std::uint64_t seed) {
  cm::FeatureSequence<T> s(b, l, c);
  fill_normal(s.values, seed);
  return s;
}

using Perm = std::vector<std::size_t>;

}  // namespace

// ---------------------------------------------------------------------------
// Orders

TEST(Directions, TwoByTwoEnumeration) {
  EXPECT_EQ(cm::order_directions(2, 2, cm::DirectionOrder::LeftRight), (Perm{0, 1, 2, 3}));
  EXPECT_EQ(cm::order_directions(2, 2, cm::DirectionOrder::RightLeft), (Perm{3, 2, 1, 0}));
  EXPECT_EQ(cm::order_directions(2, 2, cm::DirectionOrder::TopDown), (Perm{0, 2, 1, 3}));
  EXPECT_EQ(cm::order_directions(2, 2, cm::DirectionOrder::BottomUp), (Perm{3, 1, 2, 0}));
}

TEST(Directions, SingleRowLeftRightIsIdentity) {
  const Perm p = cm::order_directions(1, 7, cm::DirectionOrder::LeftRight);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], i);
}

TEST(Directions, EveryOrderIsABijection) {
  for (std::size_t H : {1u, 2u, 3u, 5u})
    for (std::size_t W : {1u, 4u, 7u})
      for (auto d : cm::kAllDirections) {
        const Perm p = cm::order_directions(H, W, d);
        const Perm inv = cm::invert_permutation(p);
        ASSERT_EQ(p.size(), H * W);
        for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(inv[p[i]], i);
        std::vector<int> seen(H * W, 0);
        for (std::size_t v : p) ++seen[v];
        for (int s : seen) EXPECT_EQ(s, 1);
      }
}

TEST(Directions, RejectsEmptyGrid) {
  EXPECT_THROW(cm::order_directions(0, 3, cm::DirectionOrder::LeftRight), cm::InvalidArgument);
}

TEST(Directions, SpatialTemporalExample) {
  // Two frames of a 1x2 grid: [a, b] then [c, d] stored as indices 0..3.
  EXPECT_EQ(cm::st_order(2, 2, cm::StOrder::SpatialForward), (Perm{0, 1, 2, 3}));
  EXPECT_EQ(cm::st_order(2, 2, cm::StOrder::SpatialBackward), (Perm{3, 2, 1, 0}));
  EXPECT_EQ(cm::st_order(2, 2, cm::StOrder::Temporal), (Perm{0, 2, 1, 3}));
}

// ---------------------------------------------------------------------------
// Patch embedding and positional embeddings

TEST(PatchEmbed, DefaultGeometryAndBudget) {
  auto p = cm::make_patch_embed<float>(64, 96, 8, 4);
  EXPECT_EQ(cm::count_parameters(p), 393504u);
  cm::initialize_parameters(p, 1, "patch_embed");
  cm::BevGrid<float> bev(1, 200, 704, 64);
  fill_normal(bev.values, 3);
  const auto out = cm::patch_embed(bev, p);
  EXPECT_EQ(out.values.shape(), (cm::Shape{1, 50, 176, 96}));
  EXPECT_TRUE(out.values.all_finite());
}

TEST(PatchEmbed, RejectsNonPositiveWidth) {
  EXPECT_THROW(cm::make_patch_embed<float>(64, 0, 8, 4), cm::InvalidArgument);
  EXPECT_THROW(cm::make_patch_embed<float>(64, -3, 8, 4), cm::InvalidArgument);
}

TEST(PatchEmbed, RejectsIndivisibleGrid) {
  auto p = cm::make_patch_embed<double>(2, 4, 8, 4);
  cm::BevGrid<double> bev(1, 10, 16, 2);
  EXPECT_THROW(cm::patch_embed(bev, p), cm::InvalidArgument);
}

TEST(PatchEmbed, UnitPatchIdentityProjectionIsPassThroughUpToNorm) {
  const std::size_t c = 5;
  auto p = cm::make_patch_embed<double>(c, c, 1, 1);
  for (std::size_t o = 0; o < c; ++o) p.proj.weight.at(o, 0, 0, o) = 1.0;
  auto bev = random_grid<double>(2, 3, 4, c, 9);
  const auto out = cm::patch_embed(bev, p);
  auto expected = bev.values;
  cm::ops::layer_norm(expected.data(), 2 * 3 * 4, c, p.norm_weight, p.norm_bias);
  EXPECT_LE(cm::max_abs_diff<double>(out.values.values(), expected.values()), 1e-14);
}

TEST(PatchEmbed, ConstantInputGivesIdenticalInteriorTokens) {
  auto p = cm::make_patch_embed<double>(3, 6, 8, 4);
  cm::initialize_parameters(p, 5, "pe");
  cm::BevGrid<double> bev(1, 32, 40, 3, 0.75);
  const auto out = cm::patch_embed(bev, p);
  // Interior tokens: receptive field [4i - 2, 4i + 6) inside the grid. GEMM
  // blocking may round rows differently, so compare to 1e-12.
  const std::size_t Ho = out.height(), Wo = out.width(), c = out.channels();
  const double* ref = out.values.data() + (1 * Wo + 1) * c;
  for (std::size_t i = 1; i + 1 < Ho; ++i)
    for (std::size_t j = 1; j + 1 < Wo; ++j)
      for (std::size_t ch = 0; ch < c; ++ch) EXPECT_NEAR(out.values.at(0, i, j, ch), ref[ch], 1e-12);
}

TEST(PosEmbed, ZeroTableIsIdentityAndShapesMatch) {
  auto g = random_grid<float>(2, 3, 5, 4, 1);
  const auto before = g.values;
  const auto table = cm::make_spatial_embedding<float>(3, 5, 4);
  cm::add_pos_embed(g, table);
  EXPECT_TRUE(cm::bitwise_equal(g.values, before));
  EXPECT_EQ(cm::make_spatial_embedding<float>(50, 176, 96).shape(), (cm::Shape{1, 50, 176, 96}));
  EXPECT_EQ(cm::make_temporal_embedding<float>(10, 96).shape(), (cm::Shape{1, 1, 1, 10, 96}));
}

TEST(PosEmbed, BroadcastsOverBatchAndFrames) {
  cm::FrameStack<double> fs(2, 3, 2, 2, 4);
  auto temporal = cm::make_temporal_embedding<double>(3, 4);
  for (std::size_t f = 0; f < 3; ++f)
    for (std::size_t ch = 0; ch < 4; ++ch) temporal.at(0, 0, 0, f, ch) = double(10 * f + ch);
  cm::add_pos_embed(fs, temporal, cm::EmbedKind::Temporal);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t f = 0; f < 3; ++f)
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
          for (std::size_t ch = 0; ch < 4; ++ch) EXPECT_EQ(fs.values.at(b, f, i, j, ch), double(10 * f + ch));
}

TEST(PosEmbed, RejectsExtentMismatch) {
  auto g = random_grid<float>(1, 3, 5, 4, 1);
  EXPECT_THROW(cm::add_pos_embed(g, cm::make_spatial_embedding<float>(3, 4, 4)), cm::InvalidArgument);
  cm::FrameStack<float> fs(1, 3, 3, 5, 4);
  EXPECT_THROW(cm::add_pos_embed(fs, cm::make_temporal_embedding<float>(4, 4), cm::EmbedKind::Temporal),
               cm::InvalidArgument);
}

// ---------------------------------------------------------------------------
// Mamba2D

TEST(Mamba2d, DefaultBudget) {
  const auto p = cm::make_mamba2d_params<float>(cm::BlockConfig{});
  EXPECT_EQ(cm::count_parameters(p), 105408u);
}

TEST(Mamba2d, PreservesShape) {
  auto p = cm::make_mamba2d_params<double>(small_config());
  cm::initialize_parameters(p, 2, "blk");
  for (auto [h, w] : std::vector<std::pair<std::size_t, std::size_t>>{{1, 1}, {1, 9}, {4, 3}, {5, 6}}) {
    const auto x = random_grid<double>(2, h, w, 8, 4);
    EXPECT_EQ(cm::mamba2d_block(x, p).values.shape(), x.values.shape());
  }
}

TEST(Mamba2d, ZeroedProjectionsAreIdentity) {
  auto p = cm::make_mamba2d_params<float>(small_config());
  cm::initialize_parameters(p, 2, "blk");
  cm::zero_projections(p);
  const auto x = random_grid<float>(2, 4, 5, 8, 6);
  EXPECT_EQ(cm::mamba2d_block(x, p).values, x.values);
}

TEST(Mamba2d, DeterministicAcrossRunsAndThreads) {
  auto p = cm::make_mamba2d_params<float>(small_config());
  cm::initialize_parameters(p, 2, "blk");
  const auto x = random_grid<float>(2, 6, 7, 8, 8);
  const auto a = cm::mamba2d_block(x, p);
  const auto b = cm::mamba2d_block(x, p);
  cm::set_num_threads(3);
  const auto c = cm::mamba2d_block(x, p);
  cm::set_num_threads(1);
  EXPECT_TRUE(cm::bitwise_equal(a.values, b.values));
  EXPECT_TRUE(cm::bitwise_equal(a.values, c.values));
  EXPECT_FALSE(a.values == x.values);
}

TEST(Mamba2d, SeedDeterminesParameters) {
  auto p = cm::make_mamba2d_params<double>(small_config());
  auto q = cm::make_mamba2d_params<double>(small_config());
  cm::initialize_parameters(p, 42, "blk");
  cm::initialize_parameters(q, 42, "blk");
  EXPECT_EQ(p.in_proj_weight, q.in_proj_weight);
  EXPECT_EQ(p.ssm.dt_projs_bias, q.ssm.dt_projs_bias);
  cm::initialize_parameters(q, 43, "blk");
  EXPECT_FALSE(p.in_proj_weight == q.in_proj_weight);
}

TEST(Mamba2d, NonFiniteActivationReportsBlockIndex) {
  auto p = cm::make_mamba2d_params<double>(small_config());
  cm::initialize_parameters(p, 2, "blk");
  auto x = random_grid<double>(1, 3, 3, 8, 1);
  x.values[5] = std::numeric_limits<double>::infinity();
  try {
    (void)cm::mamba2d_block(x, p, 7);
    FAIL() << "expected NumericOverflow";
  } catch (const cm::NumericOverflow& e) {
    EXPECT_EQ(e.block_index(), 7);
  }
}

TEST(Mamba2d, RejectsChannelMismatch) {
  auto p = cm::make_mamba2d_params<double>(small_config());
  EXPECT_THROW(cm::mamba2d_block(random_grid<double>(1, 2, 2, 6, 1), p), cm::InvalidArgument);
}

TEST(Mamba2d, DirectionsAreNotInterchangeable) {
  // Swapping the parameters of two directions changes the output.
  auto p = cm::make_mamba2d_params<double>(small_config());
  cm::initialize_parameters(p, 2, "blk");
  const auto x = random_grid<double>(1, 3, 4, 8, 1);
  const auto y = cm::mamba2d_block(x, p);
  auto q = p;
  const std::size_t stride = q.ssm.x_proj_weight.size() / 4;
  std::swap_ranges(q.ssm.x_proj_weight.data(), q.ssm.x_proj_weight.data() + stride,
                   q.ssm.x_proj_weight.data() + stride);
  EXPECT_GT(cm::max_abs_diff<double>(y.values.values(), cm::mamba2d_block(x, q).values.values()), 1e-9);
}

// ---------------------------------------------------------------------------
// Spatial-temporal block

TEST(StMamba, PreservesShapeAndZeroedIsIdentity) {
  auto p = cm::make_st_params<double>(small_config());
  cm::initialize_parameters(p, 3, "st");
  cm::FrameStack<double> x(2, 3, 2, 4, 8);
  fill_normal(x.values, 10);
  const auto y = cm::st_mamba_block(x, p);
  EXPECT_EQ(y.values.shape(), x.values.shape());
  EXPECT_FALSE(y.values == x.values);
  cm::zero_projections(p);
  EXPECT_EQ(cm::st_mamba_block(x, p).values, x.values);
}

TEST(StMamba, SingleFrameRuns) {
  auto p = cm::make_st_params<float>(small_config());
  cm::initialize_parameters(p, 3, "st");
  cm::FrameStack<float> x(1, 1, 3, 3, 8);
  fill_normal(x.values, 11);
  const auto y = cm::st_mamba_block(x, p);
  EXPECT_EQ(y.values.shape(), x.values.shape());
  EXPECT_TRUE(y.values.all_finite());
}

TEST(StMamba, TemporalScanIsCausalInTime) {
  // Only the temporal direction active: frame 0 must not see later frames.
  auto p = cm::make_st_params<double>(small_config());
  cm::initialize_parameters(p, 3, "st");
  // Zeroed x_proj rows give B = C = 0 and zeroed D removes the skip term,
  // so the two spatial directions output exactly zero.
  const std::size_t E = p.cfg.inner(), rows = p.cfg.xproj_out();
  for (std::size_t k = 0; k < 2; ++k) {
    std::fill_n(p.ssm.x_proj_weight.data() + k * rows * E, rows * E, 0.0);
    std::fill_n(p.ssm.Ds.data() + k * E, E, 0.0);
  }
  cm::FrameStack<double> x(1, 3, 2, 2, 8);
  fill_normal(x.values, 12);
  const auto y = cm::st_mamba_block(x, p);
  auto x2 = x;
  const std::size_t frame = 2 * 2 * 8;
  for (std::size_t i = 2 * frame; i < 3 * frame; ++i) x2.values[i] += 1.0;
  const auto y2 = cm::st_mamba_block(x2, p);
  for (std::size_t i = 0; i < frame; ++i) EXPECT_EQ(y.values[i], y2.values[i]);
  double moved = 0;
  for (std::size_t i = 2 * frame; i < 3 * frame; ++i) moved = std::max(moved, std::abs(y.values[i] - y2.values[i]));
  EXPECT_GT(moved, 0.0);
}

TEST(StMamba, TemporalScansArePerPosition) {
  // With only the temporal direction active, a token depends on its own
  // position across frames and, through the 3x3 convolution, on its
  // neighbours. On a 1x5 grid, perturbing position 0 leaves position 4 alone.
  auto p = cm::make_st_params<double>(small_config());
  cm::initialize_parameters(p, 4, "st");
  const std::size_t E = p.cfg.inner(), rows = p.cfg.xproj_out();
  for (std::size_t k = 0; k < 2; ++k) {
    std::fill_n(p.ssm.x_proj_weight.data() + k * rows * E, rows * E, 0.0);
    std::fill_n(p.ssm.Ds.data() + k * E, E, 0.0);
  }
  cm::FrameStack<double> x(1, 2, 1, 5, 8);
  fill_normal(x.values, 13);
  auto x2 = x;
  for (std::size_t ch = 0; ch < 8; ++ch) x2.values.at(0, 0, 0, 0, ch) += 1.0;
  const auto y = cm::st_mamba_block(x, p), y2 = cm::st_mamba_block(x2, p);
  for (std::size_t f = 0; f < 2; ++f)
    for (std::size_t ch = 0; ch < 8; ++ch) EXPECT_EQ(y.values.at(0, f, 0, 4, ch), y2.values.at(0, f, 0, 4, ch));
}

// ---------------------------------------------------------------------------
// Downsampling and upsampling

TEST(PatchMerge, DefaultBudgetAndShape) {
  cm::PatchMergeParams<float> p(96);
  EXPECT_EQ(cm::count_parameters(p), 37632u);
  cm::initialize_parameters(p, 1, "merge");
  cm::TokenGrid<float> g(1, 50, 176, 96);
  fill_normal(g.values, 2);
  EXPECT_EQ(cm::patch_merge_down(g, p).values.shape(), (cm::Shape{1, 25, 88, 96}));
}

TEST(PatchMerge, ConstantInputGivesConstantOutput) {
  cm::PatchMergeParams<double> p(4);
  cm::initialize_parameters(p, 1, "merge");
  cm::TokenGrid<double> g(1, 4, 6, 4);
  for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] = double(i % 4) - 1.5;
  const auto y = cm::patch_merge_down(g, p);
  for (std::size_t t = 1; t < y.tokens(); ++t)
    for (std::size_t ch = 0; ch < 4; ++ch) EXPECT_EQ(y.values[t * 4 + ch], y.values[ch]);
}

TEST(PatchMerge, NeighbourhoodOrderAndOddPadding) {
  // Identity norm on a unit-variance pattern is awkward; instead check the
  // concatenation order with a projection that selects one slot.
  cm::PatchMergeParams<double> p(1);
  p.reduction_weight.fill(0.0);
  p.reduction_weight[1] = 1.0;  // slot (1, 0): the row below
  cm::TokenGrid<double> g(1, 3, 3, 1);
  for (std::size_t i = 0; i < 9; ++i) g.values[i] = double(i);
  const auto y = cm::patch_merge_down(g, p);
  ASSERT_EQ(y.values.shape(), (cm::Shape{1, 2, 2, 1}));
  // Token (0, 0) sees [0, 3, 1, 4]; after normalization slot 1 is positive.
  EXPECT_GT(y.values[0], 0.0);
  // Token (1, 1) sees [8, 0, 0, 0] (padded); slot 1 is a padded zero, below the mean.
  EXPECT_LT(y.values[3], 0.0);
}

TEST(PatchExpand, StageBudgetAndShuffle) {
  EXPECT_EQ(cm::count_parameters(cm::PatchExpandParams<float>(96)), 37056u);
  cm::PatchExpandParams<double> p(2);
  // Route input channel 0 to every output block position with a distinct scale.
  p.expand_weight.fill(0.0);
  for (std::size_t q = 0; q < 4; ++q) {
    p.expand_weight.at(q * 2, 0) = double(q + 1);
    p.expand_weight.at(q * 2 + 1, 0) = -double(q + 1);
  }
  cm::TokenGrid<double> g(1, 1, 1, 2);
  g.values[0] = 1.0;
  const auto y = cm::patch_expand(g, p);
  ASSERT_EQ(y.values.shape(), (cm::Shape{1, 2, 2, 2}));
  // After the norm each token is (+1, -1) regardless of scale.
  for (std::size_t t = 0; t < 4; ++t) {
    EXPECT_NEAR(y.values[2 * t], 1.0, 1e-4);
    EXPECT_NEAR(y.values[2 * t + 1], -1.0, 1e-4);
  }
}

TEST(PatchExpandUp, DefaultDecoderGeometry) {
  cm::ExpandUpParams<float> p(8, 2, 384);
  cm::initialize_parameters(p, 1, "up");
  cm::TokenGrid<float> g(1, 25, 88, 8);
  fill_normal(g.values, 4);
  const auto y = cm::patch_expand_up(g, 100, 352, p);
  EXPECT_EQ(y.values.shape(), (cm::Shape{1, 100, 352, 384}));
  EXPECT_EQ(cm::count_parameters(cm::Conv2dParams<float>(96, 384, 3)), 332160u);
}

TEST(PatchExpandUp, IdentityConfigurationPassesThrough) {
  cm::ExpandUpParams<double> p(3, 0, 3);
  for (std::size_t o = 0; o < 3; ++o) p.out_conv.weight.at(o, 1, 1, o) = 1.0;
  const auto g = random_grid<double>(2, 4, 5, 3, 7);
  EXPECT_EQ(cm::patch_expand_up(g, 4, 5, p).values, g.values);
}

TEST(PatchExpandUp, RejectsSmallerTarget) {
  cm::ExpandUpParams<double> p(3, 1, 5);
  const auto g = random_grid<double>(1, 4, 5, 3, 7);
  EXPECT_THROW(cm::patch_expand_up(g, 3, 5, p), cm::InvalidArgument);
}

TEST(PatchExpandUp, OutputChannelsFollowConfig) {
  for (std::size_t co : {1u, 4u, 11u}) {
    cm::ExpandUpParams<float> p(3, 1, co);
    cm::initialize_parameters(p, 2, "up");
    EXPECT_EQ(cm::patch_expand_up(random_grid<float>(1, 2, 3, 3, 1), 6, 6, p).channels(), co);
  }
}

TEST(BilinearResize, HalfPixelCenters) {
  cm::TokenGrid<double> g(1, 1, 2, 1);
  g.values[0] = 0.0;
  g.values[1] = 4.0;
  const auto y = cm::bilinear_resize(g, 1, 4);
  // Sample positions -0.25, 0.25, 0.75, 1.25 clamp to [0, 1].
  EXPECT_DOUBLE_EQ(y.values[0], 0.0);
  EXPECT_DOUBLE_EQ(y.values[1], 1.0);
  EXPECT_DOUBLE_EQ(y.values[2], 3.0);
  EXPECT_DOUBLE_EQ(y.values[3], 4.0);
}

// ---------------------------------------------------------------------------
// Fusion

namespace {

/// Fusion forward that scans the whole joint sequence in both directions and
/// slices the ego segment afterwards.
template <typename T>
cm::FeatureSequence<T> fusion_full_joint(const cm::FeatureSequence<T>& ego, const cm::FeatureSequence<T>& nb,
                                         const cm::FusionParams<T>& p) {
  const std::size_t l = ego.length(), c = p.cfg.dim, E = p.cfg.inner(), w = p.cfg.conv1d_width;
  cm::FeatureSequence<T> out(ego.batch(), l, c);
  for (std::size_t b = 0; b < ego.batch(); ++b) {
    std::vector<T> xe(ego.sample(b), ego.sample(b) + l * c), xn(nb.sample(b), nb.sample(b) + l * c);
    cm::ops::layer_norm(xe.data(), l, c, p.norm_ego_weight, p.norm_ego_bias);
    cm::ops::layer_norm(xn.data(), l, c, p.norm_nb_weight, p.norm_nb_bias);
    std::vector<T> xz(l * 2 * E), joint(2 * l * E), ue(l * E), z(l * E);
    cm::ops::linear(xe.data(), l, p.in_proj_ego_weight, static_cast<const cm::Tensor<T>*>(nullptr), xz.data());
    for (std::size_t i = 0; i < l; ++i)
      for (std::size_t e = 0; e < E; ++e) {
        joint[i * E + e] = xz[i * 2 * E + e];
        z[i * E + e] = xz[i * 2 * E + E + e];
      }
    cm::ops::linear(xn.data(), l, p.in_proj_nb_weight, static_cast<const cm::Tensor<T>*>(nullptr), &joint[l * E]);
    std::vector<std::vector<T>> dir_out(2, std::vector<T>(2 * l * E));
    for (std::size_t k = 0; k < 2; ++k) {
      std::vector<T> s(2 * l * E), conv(2 * l * E), ys(2 * l * E);
      for (std::size_t i = 0; i < 2 * l; ++i)
        for (std::size_t e = 0; e < E; ++e) s[i * E + e] = joint[(k ? 2 * l - 1 - i : i) * E + e];
      cm::ops::causal_conv1d(s.data(), 2 * l, E, p.conv_weight.data() + k * E * w, p.conv_bias.data() + k * E, w,
                             conv.data());
      for (T& v : conv) v = cm::ops::silu(v);
      cm::directional_scan(conv.data(), 2 * l, p.cfg, p.ssm, k, ys.data());
      for (std::size_t i = 0; i < 2 * l; ++i)
        for (std::size_t e = 0; e < E; ++e) dir_out[k][(k ? 2 * l - 1 - i : i) * E + e] = ys[i * E + e];
    }
    std::vector<T> acc(l * E);
    for (std::size_t i = 0; i < l * E; ++i) acc[i] = (dir_out[0][i] + dir_out[1][i]) / T(2);
    cm::ops::layer_norm(acc.data(), l, E, p.out_norm_weight, p.out_norm_bias);
    for (std::size_t i = 0; i < l * E; ++i) acc[i] *= cm::ops::silu(z[i]);
    cm::ops::linear(acc.data(), l, p.out_proj_weight, static_cast<const cm::Tensor<T>*>(nullptr), out.sample(b));
    for (std::size_t i = 0; i < l * c; ++i) out.sample(b)[i] += ego.sample(b)[i];
  }
  return out;
}

}  // namespace

TEST(Fusion, DefaultBudget) {
  EXPECT_EQ(cm::count_parameters(cm::FusionParams<float>(cm::BlockConfig{})), 100224u);
}

TEST(Fusion, MatchesFullJointScan) {
  cm::FusionParams<double> p(small_config());
  cm::initialize_parameters(p, 6, "fusion");
  const auto ego = random_sequence<double>(2, 13, 8, 1), nb = random_sequence<double>(2, 13, 8, 2);
  const auto fast = cm::fusion_block(ego, nb, p);
  const auto full = fusion_full_joint(ego, nb, p);
  EXPECT_LE(cm::max_abs_diff<double>(fast.values.values(), full.values.values()), 1e-12);
}

TEST(Fusion, ZeroedWeightsReturnEgo) {
  cm::FusionParams<float> p(small_config());
  cm::initialize_parameters(p, 6, "fusion");
  cm::zero_projections(p);
  const auto ego = random_sequence<float>(2, 9, 8, 1), nb = random_sequence<float>(2, 9, 8, 2);
  EXPECT_EQ(cm::fusion_block(ego, nb, p), ego);
}

TEST(Fusion, ShapeAndNeighbourSensitivity) {
  cm::FusionParams<double> p(small_config());
  cm::initialize_parameters(p, 6, "fusion");
  const auto ego = random_sequence<double>(1, 11, 8, 1);
  const auto y1 = cm::fusion_block(ego, random_sequence<double>(1, 11, 8, 2), p);
  const auto y2 = cm::fusion_block(ego, random_sequence<double>(1, 11, 8, 3), p);
  EXPECT_EQ(y1.values.shape(), ego.values.shape());
  EXPECT_GT(cm::max_abs_diff<double>(y1.values.values(), y2.values.values()), 1e-9);
}

TEST(Fusion, RejectsLengthMismatch) {
  cm::FusionParams<double> p(small_config());
  EXPECT_THROW(cm::fusion_block(random_sequence<double>(1, 5, 8, 1), random_sequence<double>(1, 6, 8, 2), p),
               cm::InvalidArgument);
}

TEST(Fusion, Deterministic) {
  cm::FusionParams<float> p(small_config());
  cm::initialize_parameters(p, 6, "fusion");
  const auto ego = random_sequence<float>(2, 17, 8, 1), nb = random_sequence<float>(2, 17, 8, 2);
  const auto a = cm::fusion_block(ego, nb, p);
  cm::set_num_threads(2);
  const auto b = cm::fusion_block(ego, nb, p);
  cm::set_num_threads(1);
  EXPECT_TRUE(cm::bitwise_equal(a.values, b.values));
}

// ---------------------------------------------------------------------------
// Layout

TEST(Layout, FlattenIsRowMajorAndInvertible) {
  const auto g = random_grid<float>(2, 3, 4, 5, 1);
  const auto s = cm::flatten(g);
  EXPECT_EQ(s.values.shape(), (cm::Shape{2, 12, 5}));
  EXPECT_EQ(s.values.at(1, 2 * 4 + 3, 4), g.values.at(1, 2, 3, 4));
  EXPECT_EQ(cm::unflatten(s, 3, 4).values, g.values);
  EXPECT_THROW(cm::unflatten(s, 5, 2), cm::InvalidArgument);
}
