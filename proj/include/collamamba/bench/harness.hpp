#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "collamamba/blocks/fusion.hpp"
#include "collamamba/blocks/layout.hpp"
#include "collamamba/blocks/mamba2d.hpp"
#include "collamamba/blocks/st_mamba.hpp"
#include "collamamba/core/error.hpp"
#include "collamamba/core/random.hpp"
#include "collamamba/net/config.hpp"
#include "collamamba/net/forward.hpp"
#include "collamamba/net/model.hpp"

namespace collamamba::bench {

struct LinearFit {
  double slope = 0, intercept = 0, r2 = 0;
};

/// Ordinary least squares y = slope * x + intercept.
inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  collamamba::detail::require(x.size() == y.size() && x.size() >= 2, "fit_line: need at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  collamamba::detail::require(sxx > 0, "fit_line: axis values must not all be equal");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

inline double median(std::vector<double> v) {
  collamamba::detail::require(!v.empty(), "median: empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Wall times in microseconds of `runs` calls after `warmup` discarded calls.
template <typename F>
std::vector<double> time_runs(F&& fn, std::size_t runs, std::size_t warmup) {
  for (std::size_t i = 0; i < warmup; ++i) fn();
  std::vector<double> us;
  us.reserve(runs);
  for (std::size_t i = 0; i < runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    us.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
  }
  return us;
}

enum class Axis { SeqLen, Neighbors, History };

inline std::string_view axis_name(Axis a) {
  switch (a) {
    case Axis::SeqLen: return "seqlen";
    case Axis::Neighbors: return "neighbors";
    case Axis::History: return "history";
  }
  return "?";
}

inline Axis parse_axis(std::string_view s) {
  if (s == "seqlen") return Axis::SeqLen;
  if (s == "neighbors") return Axis::Neighbors;
  if (s == "history") return Axis::History;
  throw InvalidArgument("unknown bench axis '" + std::string(s) + "' (expected seqlen, neighbors or history)");
}

/// Default sweep of each axis.
inline std::vector<std::size_t> default_values(Axis a) {
  switch (a) {
    case Axis::SeqLen: return {550, 1100, 2200, 4400};
    case Axis::Neighbors: return {1, 2, 3, 4, 5, 6, 7, 8};
    case Axis::History: return {2, 4, 6, 8, 10};
  }
  return {};
}

struct BenchOptions {
  Axis axis = Axis::SeqLen;
  std::vector<std::size_t> values;
  std::size_t runs = 5;
  std::size_t warmup = 1;
  std::uint64_t seed = 0;
  /// Sequence length used by the neighbors and history axes.
  std::size_t length = 2200;
};

struct BenchPoint {
  std::size_t axis = 0;
  std::vector<double> samples_us;
  double median_us = 0;
  std::uint64_t flops_est = 0;
};

struct BenchReport {
  Axis axis = Axis::SeqLen;
  std::vector<BenchPoint> points;
  LinearFit fit;

  /// median(v[i + 1]) / median(v[i]) for consecutive points.
  std::vector<double> ratios() const {
    std::vector<double> r;
    for (std::size_t i = 1; i < points.size(); ++i) r.push_back(points[i].median_us / points[i - 1].median_us);
    return r;
  }

  /// median(2v) / median(v) for every v whose double is also on the axis.
  std::vector<double> doubling_ratios() const {
    std::vector<double> r;
    for (const auto& p : points)
      for (const auto& q : points)
        if (q.axis == 2 * p.axis) r.push_back(q.median_us / p.median_us);
    return r;
  }
};

namespace detail {

/// Lays `length` tokens out as a grid with 25 rows when possible.
inline std::pair<std::size_t, std::size_t> grid_for(std::size_t length) {
  return length % 25 == 0 ? std::pair{std::size_t{25}, length / 25} : std::pair{std::size_t{1}, length};
}

template <typename T>
void fill_random(Tensor<T>& t, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& v : t.values()) v = static_cast<T>(rng.normal());
}

}  // namespace detail

/// Times the length-dependent stages on synthetic inputs:
///   seqlen    - one 2D scan block plus one fusion block at sequence length L;
///   neighbors - the full fusion stack applied for k neighbours at `length`;
///   history   - one spatial-temporal block and the temporal head over l_his
///               frames of `length` tokens.
/// Runs are interleaved across the sweep points (one run of every point per
/// round) so slow drift of the machine affects all points alike. The FLOPs
/// column uses the analytic counts of the same work.
template <typename T = float>
BenchReport run_bench(const BenchOptions& opt, const NetConfig& cfg) {
  using collamamba::detail::require;
  require(!opt.values.empty(), "bench: empty range");
  require(opt.runs >= 5, "bench: at least 5 runs per point are required");
  for (std::size_t i = 0; i < opt.values.size(); ++i) {
    require(opt.values[i] >= 1, "bench: axis values must be >= 1");
    require(i == 0 || opt.values[i] > opt.values[i - 1], "bench: axis values must be strictly increasing");
  }
  require(opt.length >= 1, "bench: length must be >= 1");
  const BlockConfig& bc = cfg.block;
  const std::size_t c = bc.dim;

  BenchReport report;
  report.axis = opt.axis;
  std::vector<std::function<void()>> work;
  for (std::size_t v : opt.values) {
    BenchPoint p;
    p.axis = v;
    if (opt.axis == Axis::SeqLen) {
      auto blk = std::make_shared<Mamba2dParams<T>>(make_mamba2d_params<T>(bc));
      auto fus = std::make_shared<FusionParams<T>>(bc);
      initialize_parameters(*blk, opt.seed, "bench.block");
      initialize_parameters(*fus, opt.seed, "bench.fusion");
      const auto [h, w] = detail::grid_for(v);
      auto grid = std::make_shared<TokenGrid<T>>(1, h, w, c);
      auto other = std::make_shared<FeatureSequence<T>>(1, v, c);
      detail::fill_random(grid->values, opt.seed + 1);
      detail::fill_random(other->values, opt.seed + 2);
      work.push_back([=] { (void)fusion_block(flatten(mamba2d_block(*grid, *blk)), *other, *fus); });
      p.flops_est = scan_block_flops(v, 4, bc) + fusion_block_flops(v, bc);
    } else if (opt.axis == Axis::Neighbors) {
      auto stack = std::make_shared<FusionStackParams<T>>(bc, cfg.fusion_depth);
      initialize_parameters(*stack, opt.seed, "bench.fusion_net");
      auto ego = std::make_shared<FeatureSequence<T>>(1, opt.length, c);
      auto nb = std::make_shared<FeatureSequence<T>>(1, opt.length, c);
      detail::fill_random(ego->values, opt.seed + 1);
      detail::fill_random(nb->values, opt.seed + 2);
      work.push_back([=] {
        FeatureSequence<T> out = *ego;
        for (std::size_t k = 0; k < v; ++k) out = collamamba::detail::run_fusion_stack(*stack, std::move(out), *nb);
      });
      p.flops_est = v * cfg.fusion_depth * fusion_block_flops(opt.length, bc);
    } else {
      auto st = std::make_shared<StMambaParams<T>>(make_st_params<T>(bc));
      auto head = std::make_shared<TemporalHeadParams<T>>(bc, v);
      initialize_parameters(*st, opt.seed, "bench.st");
      initialize_parameters(*head, opt.seed, "bench.head");
      auto frames = std::make_shared<FrameStack<T>>(1, v, 1, opt.length, c);
      detail::fill_random(frames->values, opt.seed + 1);
      const std::size_t len = opt.length;
      work.push_back([=] {
        auto x = st_mamba_block(*frames, *st);
        (void)collamamba::detail::temporal_head(*head, std::move(x.values).reshaped({1, v, len, c}));
      });
      p.flops_est = scan_block_flops(v * len, kStDirections, bc) + scan_block_flops(len * v, 4, bc) +
                    len * (2 * v * c * c + c);
    }
    report.points.push_back(std::move(p));
  }

  for (std::size_t i = 0; i < opt.warmup; ++i)
    for (auto& w : work) w();
  for (std::size_t r = 0; r < opt.runs; ++r)
    for (std::size_t i = 0; i < work.size(); ++i) report.points[i].samples_us.push_back(time_runs(work[i], 1, 0)[0]);

  std::vector<double> x, y;
  for (auto& p : report.points) {
    p.median_us = median(p.samples_us);
    x.push_back(static_cast<double>(p.axis));
    y.push_back(p.median_us);
  }
  if (report.points.size() >= 2) report.fit = fit_line(x, y);
  return report;
}

inline constexpr std::string_view kBenchSchema = "bench/1";

/// CSV with columns (axis, median_us, flops_est); schema and fit on comment lines.
inline void write_csv(std::ostream& os, const BenchReport& r) {
  os << "# schema=" << kBenchSchema << " axis=" << axis_name(r.axis) << "\n";
  os << "axis,median_us,flops_est\n";
  char buf[64];
  for (const auto& p : r.points) {
    std::snprintf(buf, sizeof buf, "%.1f", p.median_us);
    os << p.axis << ',' << buf << ',' << p.flops_est << '\n';
  }
  if (r.points.size() >= 2) {
    std::snprintf(buf, sizeof buf, "%.6g", r.fit.slope);
    os << "# fit slope_us=" << buf;
    std::snprintf(buf, sizeof buf, "%.6g", r.fit.intercept);
    os << " intercept_us=" << buf;
    std::snprintf(buf, sizeof buf, "%.6f", r.fit.r2);
    os << " r2=" << buf << '\n';
  }
}

}  // namespace collamamba::bench
