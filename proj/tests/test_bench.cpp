#include <gtest/gtest.h>

#include <sstream>
#include <string>

#include "collamamba/bench/harness.hpp"

namespace cm = collamamba;
namespace bench = collamamba::bench;

TEST(Bench, FitLineExactOnLinearData) {
  const auto f = bench::fit_line({1, 2, 3, 4}, {5, 7, 9, 11});
  EXPECT_DOUBLE_EQ(f.slope, 2.0);
  EXPECT_DOUBLE_EQ(f.intercept, 3.0);
  EXPECT_DOUBLE_EQ(f.r2, 1.0);
}

TEST(Bench, FitLineR2BelowOneOnNoisyData) {
  const auto f = bench::fit_line({1, 2, 3, 4}, {1, 3, 2, 4});
  EXPECT_NEAR(f.slope, 0.8, 1e-12);
  EXPECT_NEAR(f.r2, 0.64, 1e-12);
}

TEST(Bench, FitLineRejectsDegenerateAxis) {
  EXPECT_THROW(bench::fit_line({2, 2}, {1, 3}), cm::InvalidArgument);
  EXPECT_THROW(bench::fit_line({1}, {1}), cm::InvalidArgument);
}

TEST(Bench, Median) {
  EXPECT_DOUBLE_EQ(bench::median({3, 1, 2}), 2.0);
  EXPECT_DOUBLE_EQ(bench::median({4, 1, 3, 2}), 2.5);
  EXPECT_THROW(bench::median({}), cm::InvalidArgument);
}

TEST(Bench, ParseAxis) {
  EXPECT_EQ(bench::parse_axis("seqlen"), bench::Axis::SeqLen);
  EXPECT_EQ(bench::parse_axis("neighbors"), bench::Axis::Neighbors);
  EXPECT_EQ(bench::parse_axis("history"), bench::Axis::History);
  EXPECT_THROW(bench::parse_axis("depth"), cm::InvalidArgument);
}

TEST(Bench, RejectsBadRanges) {
  bench::BenchOptions o;
  EXPECT_THROW(bench::run_bench(o, cm::compact_net_config()), cm::InvalidArgument);
  o.values = {4, 2};
  EXPECT_THROW(bench::run_bench(o, cm::compact_net_config()), cm::InvalidArgument);
  o.values = {2, 2};
  EXPECT_THROW(bench::run_bench(o, cm::compact_net_config()), cm::InvalidArgument);
  o.values = {2, 4};
  o.runs = 4;
  EXPECT_THROW(bench::run_bench(o, cm::compact_net_config()), cm::InvalidArgument);
}

TEST(Bench, DoublingRatiosPairOnlyDoubledValues) {
  bench::BenchReport r;
  for (auto [a, t] : {std::pair{1, 10.0}, {2, 21.0}, {3, 30.0}, {4, 40.0}}) {
    bench::BenchPoint p;
    p.axis = static_cast<std::size_t>(a);
    p.median_us = t;
    r.points.push_back(p);
  }
  const auto d = r.doubling_ratios();
  ASSERT_EQ(d.size(), 2u);
  EXPECT_DOUBLE_EQ(d[0], 2.1);
  EXPECT_DOUBLE_EQ(d[1], 40.0 / 21.0);
}

TEST(Bench, FlopsColumnExactlyLinear) {
  const cm::NetConfig cfg = cm::compact_net_config();
  for (auto axis : {bench::Axis::SeqLen, bench::Axis::Neighbors}) {
    bench::BenchOptions o;
    o.axis = axis;
    o.values = axis == bench::Axis::SeqLen ? std::vector<std::size_t>{25, 50, 100} : std::vector<std::size_t>{1, 2, 3};
    o.length = 25;
    o.warmup = 0;
    const auto r = bench::run_bench(o, cfg);
    ASSERT_EQ(r.points.size(), 3u);
    const auto f0 = r.points[0].flops_est, f1 = r.points[1].flops_est, f2 = r.points[2].flops_est;
    if (axis == bench::Axis::SeqLen) {
      EXPECT_EQ(f1, 2 * f0);
      EXPECT_EQ(f2, 2 * f1);
    } else {
      EXPECT_EQ(f1, 2 * f0);
      EXPECT_EQ(f2, 3 * f0);
    }
  }
}

TEST(Bench, SmokeRunAndCsvSchema) {
  bench::BenchOptions o;
  o.axis = bench::Axis::History;
  o.values = {2, 4};
  o.length = 16;
  const auto r = bench::run_bench(o, cm::compact_net_config());
  ASSERT_EQ(r.points.size(), 2u);
  for (const auto& p : r.points) {
    EXPECT_EQ(p.samples_us.size(), 5u);
    EXPECT_GT(p.median_us, 0);
    EXPECT_GT(p.flops_est, 0u);
  }
  std::ostringstream os;
  bench::write_csv(os, r);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "# schema=bench/1 axis=history");
  std::getline(is, line);
  EXPECT_EQ(line, "axis,median_us,flops_est");
  std::getline(is, line);
  EXPECT_EQ(line.rfind("2,", 0), 0u);
  std::getline(is, line);
  EXPECT_EQ(line.rfind("4,", 0), 0u);
  std::getline(is, line);
  EXPECT_EQ(line.rfind("# fit slope_us=", 0), 0u);
}
