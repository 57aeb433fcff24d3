#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "collamamba/blocks/directions.hpp"
#include "collamamba/blocks/fusion.hpp"
#include "collamamba/blocks/mamba2d.hpp"
#include "collamamba/blocks/patch.hpp"
#include "collamamba/blocks/st_mamba.hpp"
#include "collamamba/core/parallel.hpp"
#include "collamamba/core/random.hpp"
#include "collamamba/kernels/flops.hpp"
#include "collamamba/kernels/selective_scan.hpp"
#include "collamamba/net/accounting.hpp"
#include "collamamba/net/forward.hpp"
#include "collamamba/net/model.hpp"
#include "collamamba/net/snapshot.hpp"
#include "collamamba/sim/protocol.hpp"
#include "collamamba/sim/runner.hpp"
#include "collamamba/sim/scenario.hpp"
#include "collamamba/verify/kernel_checks.hpp"

namespace collamamba::verify {

/// Outcome of one invariant. `observed` and `tolerance` use the check's own
/// measure (error, ratio, count); `note` carries details or an exception.
struct CheckResult {
  std::string id;
  bool passed = false;
  double observed = 0;
  double tolerance = 0;
  std::string note;
  double seconds = 0;
};

enum class Suite { Kernels, Blocks, Net, Sim, All };

inline Suite parse_suite(std::string_view s) {
  if (s == "kernels") return Suite::Kernels;
  if (s == "blocks") return Suite::Blocks;
  if (s == "net") return Suite::Net;
  if (s == "sim") return Suite::Sim;
  if (s == "all") return Suite::All;
  throw InvalidArgument("unknown suite '" + std::string(s) + "' (expected kernels, blocks, net, sim or all)");
}

/// Runs `body`, which fills observed / passed / note, and records the wall
/// time. Any exception fails the check with its message.
inline CheckResult run_check(std::string id, double tolerance, const std::function<void(CheckResult&)>& body) {
  CheckResult r;
  r.id = std::move(id);
  r.tolerance = tolerance;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.note = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

namespace detail {

inline bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

/// Zeroes every model tensor under `prefix` whose name ends in one of `suffixes`.
template <typename T>
void zero_tensors(Model<T>& m, const std::string& prefix, const std::vector<std::string>& suffixes) {
  m.visit("", [&](const std::string& name, auto& t, InitKind) {
    if (name.compare(0, prefix.size(), prefix) != 0) return;
    for (const auto& s : suffixes)
      if (ends_with(name, s)) std::fill(t.values().begin(), t.values().end(), T(0));
  });
}

template <typename T>
void fill_normal(Tensor<T>& t, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& v : t.values()) v = static_cast<T>(rng.normal());
}

inline BlockConfig small_block() {
  BlockConfig cfg;
  cfg.dim = 8;
  cfg.state = 4;
  cfg.dt_rank = 2;
  return cfg;
}

inline double rel_dev(double value, double anchor) { return std::abs(value - anchor) / anchor; }

}  // namespace detail

// ---------------------------------------------------------------------------
// kernels

/// Recurrent vs convolutional LTI scan on `instances` random instances with
/// L <= max_length, d <= max_channels and N = 16.
inline CheckResult check_scan_forms(std::uint64_t seed, std::size_t instances = 200, std::size_t max_length = 1024,
                                    std::size_t max_channels = 32) {
  return run_check("kernels.scan_forms", 1e-9, [&](CheckResult& r) {
    Rng rng(derive_seed(seed, "verify.scan_forms"));
    double worst = 0;
    for (std::size_t i = 0; i < instances; ++i) {
      const std::size_t len = 1 + rng.below(max_length);
      const std::size_t ch = 1 + rng.below(max_channels);
      worst = std::max(worst, form_equivalence_error<double>(rng, len, ch, 16));
    }
    r.observed = worst;
    r.passed = worst <= r.tolerance;
    r.note = std::to_string(instances) + " instances";
  });
}

/// One ZOH step against the quadrature oracle; `series` selects |delta a| < 1e-4.
inline CheckResult check_zoh(std::uint64_t seed, bool series, std::size_t count = 2000) {
  return run_check(series ? "kernels.zoh_series" : "kernels.zoh_step", 1e-10, [&](CheckResult& r) {
    Rng rng(derive_seed(seed, series ? "verify.zoh_series" : "verify.zoh_step"));
    r.observed = zoh_step_error(rng, count, series);
    r.passed = r.observed <= r.tolerance;
    r.note = "max relative error over " + std::to_string(count) + " entries";
  });
}

/// Backward pass against central differences (h = 1e-5) on small instances.
inline CheckResult check_gradients(std::uint64_t seed, std::size_t instances = 50) {
  return run_check("kernels.gradient", 1e-6, [&](CheckResult& r) {
    Rng rng(derive_seed(seed, "verify.gradient"));
    double worst = 0;
    for (std::size_t i = 0; i < instances; ++i) {
      const std::size_t len = 2 + rng.below(15);
      const std::size_t ch = 1 + rng.below(3);
      const std::size_t st = 1 + rng.below(4);
      worst = std::max(worst, gradient_check_error(rng, len, ch, st, 1e-5));
    }
    r.observed = worst;
    r.passed = worst <= r.tolerance;
    r.note = std::to_string(instances) + " instances";
  });
}

/// Selective scan output is bitwise identical for 1 and 4 threads.
inline CheckResult check_scan_threads(std::uint64_t seed) {
  return run_check("kernels.thread_replay", 0, [&](CheckResult& r) {
    Rng rng(derive_seed(seed, "verify.scan_threads"));
    const auto p = random_ssm<double>(rng, 12, 16);
    const auto s = random_streams<double>(rng, 300, 12, 16);
    const auto x = random_sequence<double>(rng, 300, 12);
    const int before = num_threads();
    set_num_threads(1);
    const auto a = kernels::selective_scan(p, s, x);
    set_num_threads(4);
    const auto b = kernels::selective_scan(p, s, x);
    set_num_threads(before);
    r.observed = max_abs_diff<double>(a.values, b.values);
    r.passed = a.values == b.values;
  });
}

inline std::vector<CheckResult> kernel_suite(std::uint64_t seed) {
  return {check_scan_forms(seed), check_zoh(seed, false), check_zoh(seed, true), check_gradients(seed),
          check_scan_threads(seed)};
}

// ---------------------------------------------------------------------------
// blocks

inline CheckResult check_direction_bijections() {
  return run_check("blocks.direction_bijection", 0, [&](CheckResult& r) {
    std::size_t bad = 0;
    for (std::size_t h : {1u, 3u, 25u})
      for (std::size_t w : {1u, 4u, 88u})
        for (auto d : kAllDirections) {
          const auto p = order_directions(h, w, d);
          const auto inv = invert_permutation(p);
          for (std::size_t i = 0; i < p.size(); ++i) bad += inv[p[i]] != i;
        }
    r.observed = static_cast<double>(bad);
    r.passed = bad == 0;
  });
}

/// Zeroed output projections make the 2D scan, spatial-temporal and fusion
/// blocks exact identities; a zero position table is an exact identity too.
inline std::vector<CheckResult> check_block_identities(std::uint64_t seed) {
  std::vector<CheckResult> out;
  const BlockConfig bc = detail::small_block();
  out.push_back(run_check("blocks.mamba2d_identity", 0, [&](CheckResult& r) {
    auto p = make_mamba2d_params<double>(bc);
    initialize_parameters(p, seed, "verify.m2d");
    zero_projections(p);
    TokenGrid<double> x(2, 4, 5, bc.dim);
    detail::fill_normal(x.values, seed + 1);
    const auto y = mamba2d_block(x, p);
    r.observed = max_abs_diff(y.values, x.values);
    r.passed = y.values == x.values;
  }));
  out.push_back(run_check("blocks.st_identity", 0, [&](CheckResult& r) {
    auto p = make_st_params<double>(bc);
    initialize_parameters(p, seed, "verify.st");
    zero_projections(p);
    FrameStack<double> x(2, 3, 2, 4, bc.dim);
    detail::fill_normal(x.values, seed + 2);
    const auto y = st_mamba_block(x, p);
    r.observed = max_abs_diff(y.values, x.values);
    r.passed = y.values == x.values;
  }));
  out.push_back(run_check("blocks.fusion_identity", 0, [&](CheckResult& r) {
    FusionParams<double> p(bc);
    initialize_parameters(p, seed, "verify.fusion");
    zero_projections(p);
    FeatureSequence<double> ego(2, 9, bc.dim), nb(2, 9, bc.dim);
    detail::fill_normal(ego.values, seed + 3);
    detail::fill_normal(nb.values, seed + 4);
    const auto y = fusion_block(ego, nb, p);
    r.observed = max_abs_diff(y.values, ego.values);
    r.passed = y.values == ego.values;
  }));
  out.push_back(run_check("blocks.pos_embed_identity", 0, [&](CheckResult& r) {
    TokenGrid<double> g(2, 3, 5, 4);
    detail::fill_normal(g.values, seed + 5);
    const auto before = g.values;
    add_pos_embed(g, make_spatial_embedding<double>(3, 5, 4));
    r.observed = max_abs_diff(g.values, before);
    r.passed = bitwise_equal(g.values, before);
  }));
  return out;
}

inline CheckResult check_block_threads(std::uint64_t seed) {
  return run_check("blocks.thread_replay", 0, [&](CheckResult& r) {
    const BlockConfig bc = detail::small_block();
    auto p = make_mamba2d_params<double>(bc);
    initialize_parameters(p, seed, "verify.m2d_threads");
    TokenGrid<double> x(2, 6, 7, bc.dim);
    detail::fill_normal(x.values, seed + 6);
    const int before = num_threads();
    set_num_threads(1);
    const auto a = mamba2d_block(x, p);
    set_num_threads(3);
    const auto b = mamba2d_block(x, p);
    set_num_threads(before);
    r.observed = max_abs_diff(a.values, b.values);
    r.passed = a.values == b.values;
  });
}

inline std::vector<CheckResult> block_suite(std::uint64_t seed) {
  std::vector<CheckResult> out = {check_direction_bijections()};
  for (auto& c : check_block_identities(seed)) out.push_back(std::move(c));
  out.push_back(check_block_threads(seed));
  return out;
}

// ---------------------------------------------------------------------------
// net

/// Exact shape anchors at the default geometry.
inline CheckResult check_shape_anchors() {
  return run_check("net.shape_anchors", 0, [&](CheckResult& r) {
    const std::size_t b = 2;
    const auto rows = report_shapes(NetConfig{}, Variant::ST, b);
    auto find = [&](const std::string& name) {
      for (const auto& [n, s] : rows)
        if (n == name) return s;
      return Shape{};
    };
    const std::vector<std::pair<std::string, Shape>> want = {
        {"bev_input", {b, 200, 704, 64}},
        {"pos_embed", {1, 50, 176, 96}},
        {"history_temporal_pos_embed", {1, 1, 1, 10, 96}},
        {"feature_sequence", {b, 2200, 96}},
        {"cls", {b, 100, 352, 2}},
        {"reg", {b, 100, 352, 14}},
        {"dir", {b, 100, 352, 4}},
    };
    std::size_t bad = 0;
    for (const auto& [name, shape] : want)
      if (find(name) != shape) {
        ++bad;
        r.note += name + "=" + shape_string(find(name)) + " ";
      }
    // The instantiated tables must agree with the report.
    Model<float> m(NetConfig{}, Variant::ST);
    bad += m.encoder.pos_embed.shape() != Shape{1, 50, 176, 96};
    bad += m.history_encoder->temporal_pos_embed.shape() != Shape{1, 1, 1, 10, 96};
    r.observed = static_cast<double>(bad);
    r.passed = bad == 0;
  });
}

/// Exact module anchors plus the variant budget window and ordering.
inline std::vector<CheckResult> check_param_budget() {
  std::vector<CheckResult> out;
  out.push_back(run_check("net.param_anchors", 0, [&](CheckResult& r) {
    const auto t = count_params(NetConfig{}, Variant::Simple);
    const std::vector<std::pair<std::string, std::uint64_t>> want = {{"encoder.patch_embed", 393'504},
                                                                      {"encoder.downsamples.0", 37'632},
                                                                      {"cls_head", 770},
                                                                      {"reg_head", 5'390},
                                                                      {"dir_head", 1'540}};
    std::size_t bad = 0;
    for (const auto& [path, v] : want)
      if (t.at(path) != v) {
        ++bad;
        r.note += path + "=" + std::to_string(t.at(path)) + " ";
      }
    r.observed = static_cast<double>(bad);
    r.passed = bad == 0;
  }));
  out.push_back(run_check("net.param_total", 0.10, [&](CheckResult& r) {
    const NetConfig cfg;
    const auto simple = count_params(cfg, Variant::Simple).total;
    const auto st = count_params(cfg, Variant::ST).total;
    const auto miss = count_params(cfg, Variant::Miss).total;
    r.observed = detail::rel_dev(static_cast<double>(simple), 3.92e6);
    r.passed = r.observed <= r.tolerance && st > simple && miss > st;
    r.note = "Simple " + std::to_string(simple) + ", ST " + std::to_string(st) + ", Miss " + std::to_string(miss);
  }));
  return out;
}

/// Simple total within +-40% of 79.06 GFLOPs and exact additivity of the
/// history modules.
inline std::vector<CheckResult> check_flops_budget() {
  std::vector<CheckResult> out;
  out.push_back(run_check("net.flops_window", 0.40, [&](CheckResult& r) {
    const auto t = count_flops(NetConfig{}, Variant::Simple);
    r.observed = detail::rel_dev(static_cast<double>(t.total), 79.06e9);
    r.passed = r.observed <= r.tolerance;
    std::ostringstream os;
    os << "Simple " << static_cast<double>(t.total) / 1e9 << " GFLOPs";
    r.note = os.str();
  }));
  out.push_back(run_check("net.flops_additivity", 0, [&](CheckResult& r) {
    const NetConfig cfg;
    const auto simple = count_flops(cfg, Variant::Simple);
    std::uint64_t mismatches = 0;
    for (Variant v : {Variant::ST, Variant::Miss}) {
      const auto t = count_flops(cfg, v);
      std::uint64_t extra = 0;
      for (const auto& row : t.rows)
        if (row.depth == 0 && !simple.contains(row.path)) {
          extra += row.value;
          const bool history = row.path.rfind("history_", 0) == 0 || row.path.rfind("global_predictor", 0) == 0;
          mismatches += !history;
        }
      mismatches += t.total - simple.total != extra;
      for (const auto& row : simple.rows) mismatches += t.at(row.path) != row.value;
    }
    r.observed = static_cast<double>(mismatches);
    r.passed = mismatches == 0;
  }));
  return out;
}

/// Analytic FLOPs are exactly linear in sequence length and neighbour count.
inline CheckResult check_flops_linearity() {
  return run_check("net.flops_linearity", 0, [&](CheckResult& r) {
    const NetConfig cfg;
    const BlockConfig& bc = cfg.block;
    std::size_t bad = 0;
    for (std::uint64_t l : {550u, 1100u, 2200u}) {
      bad += scan_block_flops(2 * l, 4, bc) != 2 * scan_block_flops(l, 4, bc);
      bad += fusion_block_flops(2 * l, bc) != 2 * fusion_block_flops(l, bc);
    }
    const auto f1 = count_flops(cfg, Variant::Simple, 1, 1).at("fusion_net");
    for (std::uint64_t k = 0; k <= 8; ++k) bad += count_flops(cfg, Variant::Simple, 1, k).at("fusion_net") != k * f1;
    r.observed = static_cast<double>(bad);
    r.passed = bad == 0;
  });
}

/// fuse_global without neighbours, the boosting step with zeroed fusion and
/// MLP weights, and the predictor on a constant trajectory with zeroed output
/// weights all return their input bitwise.
inline std::vector<CheckResult> check_net_identities(std::uint64_t seed) {
  std::vector<CheckResult> out;
  NetConfig cfg = compact_net_config();
  cfg.seed = seed;
  auto sequence = [&](std::size_t b, std::uint64_t s) {
    FeatureSequence<double> x(b, cfg.seq_len(), cfg.channels());
    detail::fill_normal(x.values, s);
    return x;
  };
  out.push_back(run_check("net.fuse_no_neighbors", 0, [&](CheckResult& r) {
    const auto m = make_model<double>(cfg, Variant::Simple);
    const auto ego = sequence(2, seed + 1);
    const auto y = fuse_global(m, ego, {});
    const auto mf = make_model<float>(cfg, Variant::Simple);
    FeatureSequence<float> ego_f(1, cfg.seq_len(), cfg.channels());
    detail::fill_normal(ego_f.values, seed + 2);
    r.observed = max_abs_diff(y.values, ego.values);
    r.passed = bitwise_equal(y.values, ego.values) && bitwise_equal(fuse_global(mf, ego_f, {}).values, ego_f.values);
  }));
  out.push_back(run_check("net.boost_identity", 0, [&](CheckResult& r) {
    auto m = make_model<double>(cfg, Variant::ST);
    detail::zero_tensors(m, "history_fusion_net", {"out_proj.weight"});
    detail::zero_tensors(m, "history_encoder.out_layers", {"mlp.weight", "mlp.bias"});
    const auto cur = sequence(2, seed + 3);
    HistoryFeatures<double> hist{Tensor<double>({2, cfg.st_history, cfg.seq_len(), cfg.channels()})};
    detail::fill_normal(hist.values, seed + 4);
    const auto y = boost_features(m, cur, hist);
    r.observed = max_abs_diff(y.values, cur.values);
    r.passed = y.values == cur.values;
  }));
  out.push_back(run_check("net.predict_identity", 0, [&](CheckResult& r) {
    auto m = make_model<double>(cfg, Variant::Miss);
    detail::zero_tensors(m, "global_predictor", {"out_proj.weight", "mlp.weight", "mlp.bias"});
    const auto seq = sequence(1, seed + 5);
    GlobalTrajectory<double> traj(cfg.miss_history);
    for (std::size_t f = 0; f < cfg.miss_history; ++f) traj.push(seq);
    const auto y = predict_global(m, traj);
    r.observed = max_abs_diff(y.values, seq.values);
    r.passed = y.values == seq.values;
  }));
  return out;
}

inline CheckResult check_snapshot_roundtrip(std::uint64_t seed) {
  return run_check("net.snapshot_roundtrip", 0, [&](CheckResult& r) {
    NetConfig cfg = compact_net_config();
    cfg.seed = seed;
    auto m = make_model<double>(cfg, Variant::Miss);
    std::stringstream ss;
    write_snapshot(ss, m);
    auto back = read_snapshot<double>(ss);
    std::size_t bad = 0;
    std::vector<const Tensor<double>*> a, b;
    m.visit("", [&](const std::string&, auto& t, InitKind) { a.push_back(&t); });
    back.visit("", [&](const std::string&, auto& t, InitKind) { b.push_back(&t); });
    bad += a.size() != b.size();
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) bad += !bitwise_equal(*a[i], *b[i]);
    r.observed = static_cast<double>(bad);
    r.passed = bad == 0;
  });
}

inline std::vector<CheckResult> net_suite(std::uint64_t seed) {
  std::vector<CheckResult> out = {check_shape_anchors()};
  for (auto& c : check_param_budget()) out.push_back(std::move(c));
  for (auto& c : check_flops_budget()) out.push_back(std::move(c));
  out.push_back(check_flops_linearity());
  for (auto& c : check_net_identities(seed)) out.push_back(std::move(c));
  out.push_back(check_snapshot_roundtrip(seed));
  return out;
}

// ---------------------------------------------------------------------------
// sim

/// All 8 combinations of (in time, received, history ready).
inline CheckResult check_decide_mode() {
  return run_check("sim.decide_mode", 0, [&](CheckResult& r) {
    using sim::Mode;
    std::size_t bad = 0;
    for (bool in_time : {true, false})
      for (bool recv : {true, false})
        for (bool ready : {true, false}) {
          const Mode got = sim::decide_mode(in_time ? 40.0 : 60.0, recv, 50.0, ready);
          const Mode want =
              in_time && recv ? Mode::FeatureFusion : ready ? Mode::CollaborativePrediction : Mode::EgoOnly;
          bad += got != want;
        }
    r.observed = static_cast<double>(bad);
    r.passed = bad == 0;
  });
}

/// #CV of the shared-feature payload and the dense baseline, and their byte ratio.
inline std::vector<CheckResult> check_comm_volume() {
  const NetConfig cfg;
  const std::uint64_t ours = cfg.seq_len() * cfg.channels() * 4;
  const std::uint64_t dense = cfg.decoder_out_h * cfg.decoder_out_w * 4 * cfg.channels() * 4;
  std::vector<CheckResult> out;
  out.push_back(run_check("sim.cv_payload", 0.01, [&](CheckResult& r) {
    const double cv = sim::comm_volume(ours);
    r.observed = std::abs(cv - 19.69);
    r.passed = r.observed <= r.tolerance;
    r.note = "#CV " + std::to_string(cv) + " for " + std::to_string(ours) + " bytes";
  }));
  out.push_back(run_check("sim.cv_dense", 0.01, [&](CheckResult& r) {
    const double cv = sim::comm_volume(dense);
    r.observed = std::abs(cv - 25.69);
    r.passed = r.observed <= r.tolerance;
    r.note = "#CV " + std::to_string(cv) + " for " + std::to_string(dense) + " bytes";
  }));
  out.push_back(run_check("sim.cv_ratio", 0.01, [&](CheckResult& r) {
    const double ratio = static_cast<double>(dense) / static_cast<double>(ours);
    r.observed = std::abs(ratio / 64.0 - 1.0);
    r.passed = r.observed <= r.tolerance;
    r.note = "dense / payload = " + std::to_string(ratio);
  }));
  return out;
}

inline sim::ScenarioConfig verify_scenario(std::uint64_t seed, std::size_t frames, std::size_t interval) {
  sim::ScenarioConfig c;
  c.variant = Variant::Miss;
  c.n_agents = 2;
  c.frames = frames;
  c.latency = {sim::LatencyKind::Fixed, 20.0, 0.0};
  c.tau0_ms = 50;
  c.seed = seed;
  c.n_objects = 6;
  c.miss_interval = interval;
  c.network.seed = seed;
  return c;
}

/// Post-warm-up CollaborativePrediction fraction equals 1/m exactly for each
/// interval, and 0 without misses (interval 0).
inline CheckResult check_miss_fractions(std::uint64_t seed, std::size_t frames,
                                        const std::vector<std::size_t>& intervals) {
  return run_check("sim.miss_fraction", 0, [&](CheckResult& r) {
    auto cfg = verify_scenario(seed, frames, 0);
    const auto model = make_model<double>(cfg.network, cfg.variant);
    std::size_t bad = 0;
    for (std::size_t m : intervals) {
      cfg.miss_interval = m;
      const auto log = sim::run_scenario(cfg, model);
      const auto got = sim::mode_fractions(log).at(sim::Mode::CollaborativePrediction);
      const auto want = m == sim::kNoMiss ? sim::Rational::make(0, 1) : sim::Rational::make(1, m);
      r.note += (m == sim::kNoMiss ? std::string("inf") : std::to_string(m)) + ":" + got.str() + " ";
      bad += !(got == want);
    }
    r.observed = static_cast<double>(bad);
    r.passed = bad == 0;
  });
}

/// Two runs of one scenario, with 1 and 3 threads, give equal logs and
/// byte-identical CSV.
inline CheckResult check_replay(std::uint64_t seed, std::size_t frames) {
  return run_check("sim.replay", 0, [&](CheckResult& r) {
    auto cfg = verify_scenario(seed, frames, 3);
    cfg.latency = {sim::LatencyKind::Uniform, 40, 20};
    cfg.pose_noise_std_m = 0.3;
    const auto model = make_model<double>(cfg.network, cfg.variant);
    const int before = num_threads();
    set_num_threads(1);
    const auto a = sim::run_scenario(cfg, model);
    set_num_threads(3);
    const auto b = sim::run_scenario(cfg, model);
    set_num_threads(before);
    std::ostringstream sa, sb;
    sim::write_csv(sa, a);
    sim::write_csv(sb, b);
    r.observed = sa.str() == sb.str() ? 0.0 : 1.0;
    r.passed = a == b && sa.str() == sb.str();
  });
}

inline std::vector<CheckResult> sim_suite(std::uint64_t seed) {
  std::vector<CheckResult> out = {check_decide_mode()};
  for (auto& c : check_comm_volume()) out.push_back(std::move(c));
  out.push_back(check_miss_fractions(seed, 40, {1, 2, 5, 10, sim::kNoMiss}));
  out.push_back(check_replay(seed, 30));
  return out;
}

/// Runs the selected suites in 64-bit arithmetic.
inline std::vector<CheckResult> run_suite(Suite s, std::uint64_t seed) {
  std::vector<CheckResult> out;
  auto append = [&](std::vector<CheckResult> v) {
    for (auto& c : v) out.push_back(std::move(c));
  };
  if (s == Suite::Kernels || s == Suite::All) append(kernel_suite(seed));
  if (s == Suite::Blocks || s == Suite::All) append(block_suite(seed));
  if (s == Suite::Net || s == Suite::All) append(net_suite(seed));
  if (s == Suite::Sim || s == Suite::All) append(sim_suite(seed));
  return out;
}

}  // namespace collamamba::verify
