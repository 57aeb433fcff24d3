// collamamba: verification suites, budget reports, complexity benchmarks and
// scenario simulation.
//
// Exit codes: 0 success, 1 verification or runtime failure, 2 usage error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "collamamba/bench/harness.hpp"
#include "collamamba/core/parallel.hpp"
#include "collamamba/kernels/discretize.hpp"
#include "collamamba/net/accounting.hpp"
#include "collamamba/net/config.hpp"
#include "collamamba/net/snapshot.hpp"
#include "collamamba/sim/protocol.hpp"
#include "collamamba/sim/runner.hpp"
#include "collamamba/sim/scenario.hpp"
#include "collamamba/verify/suites.hpp"

namespace cm = collamamba;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::string precision = "f32";
  std::string config_path;
  int threads = 1;
};

/// Network configuration from --config, else $COLLAMAMBA_CONFIG, else the
/// given fallback. The file holds a network object or the string "compact" /
/// "default".
std::optional<cm::NetConfig> load_config(const GlobalOptions& g) {
  std::string path = g.config_path;
  if (path.empty())
    if (const char* env = std::getenv("COLLAMAMBA_CONFIG"); env && *env) path = env;
  if (path.empty()) return std::nullopt;
  std::ifstream is(path);
  if (!is) throw cm::InvalidArgument("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw cm::InvalidArgument("config '" + path + "': " + e.what());
  }
  cm::NetConfig cfg;
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name != "compact" && name != "default")
      throw cm::InvalidArgument("config '" + path + "': expected \"compact\", \"default\" or an object");
    cfg = name == "compact" ? cm::compact_net_config() : cm::NetConfig{};
  } else {
    try {
      cfg = j.get<cm::NetConfig>();
    } catch (const nlohmann::json::exception& e) {
      throw cm::InvalidArgument("config '" + path + "': " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

std::string with_commas(std::uint64_t v) {
  std::string s = std::to_string(v);
  for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<std::size_t>(i), ",");
  return s;
}

// ---------------------------------------------------------------------------
// verify

/// Faults that perturb a kernel constant so the suites can be shown to catch it.
void inject_fault(const std::string& name) {
  if (name.empty()) return;
  if (name == "zoh-series") {
    cm::kernels::detail::zoh_series_c2().store(0.5);
    return;
  }
  throw cm::InvalidArgument("unknown fault '" + name + "' (known: zoh-series)");
}

int cmd_verify(const GlobalOptions& g, const std::string& suite_name, const std::string& fault) {
  const auto suite = cm::verify::parse_suite(suite_name);
  inject_fault(fault);
  const auto results = cm::verify::run_suite(suite, g.seed.value_or(0));
  std::size_t failed = 0;
  for (const auto& r : results) {
    std::printf("%-4s %-28s observed=%-12.4g tolerance=%-8.3g %6.2fs%s%s\n", r.passed ? "ok" : "FAIL", r.id.c_str(),
                r.observed, r.tolerance, r.seconds, r.note.empty() ? "" : "  ", r.note.c_str());
    failed += !r.passed;
  }
  std::printf("%zu/%zu invariants passed\n", results.size() - failed, results.size());
  if (failed == 0) return kExitOk;
  for (const auto& r : results)
    if (!r.passed) std::fprintf(stderr, "failed invariant %s: observed %.6g, tolerance %.3g\n", r.id.c_str(), r.observed, r.tolerance);
  return kExitFailure;
}

// ---------------------------------------------------------------------------
// report

void print_table(const cm::BudgetTable& t, bool csv, const char* unit) {
  if (csv) {
    std::printf("# schema=report/1\nmodule,%s,shape\n", unit);
    for (const auto& r : t.rows) std::printf("%s,%llu,%s\n", r.path.c_str(), static_cast<unsigned long long>(r.value), r.shape.c_str());
    std::printf("total,%llu,\n", static_cast<unsigned long long>(t.total));
    return;
  }
  for (const auto& r : t.rows) {
    const std::string name = std::string(static_cast<std::size_t>(2 * r.depth), ' ') + r.path;
    std::printf("%-48s %18s  %s\n", name.c_str(), with_commas(r.value).c_str(), r.shape.c_str());
  }
  std::printf("%-48s %18s\n", "total", with_commas(t.total).c_str());
}

int cmd_report(const GlobalOptions& g, const std::string& kind, const std::string& variant_name, bool csv,
               std::size_t batch, std::size_t neighbors) {
  const cm::NetConfig cfg = load_config(g).value_or(cm::NetConfig{});
  const cm::Variant v = cm::parse_variant(variant_name);
  if (kind == "shapes") {
    const auto rows = cm::report_shapes(cfg, v, batch);
    if (csv) std::printf("# schema=report/1\ntensor,shape\n");
    for (const auto& [name, shape] : rows) {
      std::string s = cm::shape_string(shape);
      if (csv) {
        std::printf("%s,\"%s\"\n", name.c_str(), s.c_str());
      } else {
        std::string compact;
        for (char c : s)
          if (c != ' ') compact += c;
        std::printf("%s=%s\n", name.c_str(), compact.c_str());
      }
    }
    return kExitOk;
  }
  if (kind == "params") {
    const auto t = cm::count_params(cfg, v);
    print_table(t, csv, "params");
    if (v == cm::Variant::Simple && !csv) {
      const double anchor = 3.92e6;
      const double dev = (static_cast<double>(t.total) - anchor) / anchor;
      std::printf("anchor 3.92M: %+.1f%% (%s the +-10%% window)\n", 100 * dev, std::abs(dev) <= 0.10 ? "within" : "outside");
    }
    return kExitOk;
  }
  if (kind == "flops") {
    const auto t = cm::count_flops(cfg, v, batch, neighbors);
    print_table(t, csv, "flops");
    if (!csv) {
      std::printf("convention: 1 multiply-add = 2 FLOPs; scan 6 multiply-adds per state element and token\n");
      std::printf("total %.2f GFLOPs\n", static_cast<double>(t.total) / 1e9);
      if (v == cm::Variant::Simple) {
        const double dev = (static_cast<double>(t.total) - 79.06e9) / 79.06e9;
        std::printf("anchor 79.06G: %+.1f%% (%s the +-40%% window)\n", 100 * dev, std::abs(dev) <= 0.40 ? "within" : "outside");
      }
    }
    return kExitOk;
  }
  throw cm::InvalidArgument("unknown report '" + kind + "' (expected shapes, params or flops)");
}

// ---------------------------------------------------------------------------
// bench

int cmd_bench(const GlobalOptions& g, const std::string& axis, std::vector<std::size_t> values, std::size_t runs,
              std::size_t warmup, std::size_t length, const std::string& out_path, bool values_given) {
  cm::bench::BenchOptions o;
  o.axis = cm::bench::parse_axis(axis);
  o.values = values_given ? std::move(values) : cm::bench::default_values(o.axis);
  o.runs = runs;
  o.warmup = warmup;
  o.length = length;
  o.seed = g.seed.value_or(0);
  const cm::NetConfig cfg = load_config(g).value_or(cm::NetConfig{});
  const auto report = g.precision == "f64" ? cm::bench::run_bench<double>(o, cfg) : cm::bench::run_bench<float>(o, cfg);
  if (out_path.empty()) {
    cm::bench::write_csv(std::cout, report);
  } else {
    std::ofstream os(out_path);
    if (!os) throw cm::Error("cannot open '" + out_path + "' for writing");
    cm::bench::write_csv(os, report);
    std::printf("wrote %s (slope %.4g us per unit, R^2 %.4f)\n", out_path.c_str(), report.fit.slope, report.fit.r2);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate

template <typename T>
cm::sim::CommLog simulate(const cm::sim::ScenarioConfig& sc, const std::string& weights) {
  if (weights.empty()) return cm::sim::run_scenario(sc, cm::make_model<T>(sc.network, sc.variant));
  auto m = cm::load_snapshot<T>(weights);
  return cm::sim::run_scenario(sc, m);
}

int cmd_simulate(const GlobalOptions& g, const std::string& scenario_path, const std::string& out_dir,
                 const std::string& weights) {
  cm::sim::ScenarioConfig sc = cm::sim::load_scenario(scenario_path);
  if (g.seed) sc.seed = *g.seed;
  if (auto cfg = load_config(g)) {
    const auto seed = sc.network.seed;
    sc.network = *cfg;
    sc.network.seed = seed;
  }
  sc.validate();
  const auto log = g.precision == "f64" ? simulate<double>(sc, weights) : simulate<float>(sc, weights);

  fs::create_directories(out_dir);
  const fs::path csv_path = fs::path(out_dir) / "commlog.csv";
  {
    std::ofstream os(csv_path, std::ios::binary);
    if (!os) throw cm::Error("cannot open '" + csv_path.string() + "' for writing");
    cm::sim::write_csv(os, log);
  }

  nlohmann::json fractions = nlohmann::json::object();
  const bool any_post = log.warmup_frames < sc.frames;
  if (any_post)
    for (const auto& [mode, q] : cm::sim::mode_fractions(log))
      fractions[std::string(cm::sim::mode_name(mode))] = {{"fraction", q.str()}, {"value", q.value()}};
  std::uint64_t bytes = 0;
  for (const auto& r : log.records) bytes += r.bytes;
  nlohmann::json summary = {{"schema", "summary/1"},
                            {"scenario", sc},
                            {"precision", g.precision},
                            {"warmup_frames", log.warmup_frames},
                            {"records", log.records.size()},
                            {"mode_fractions_post_warmup", fractions},
                            {"mean_cv_log2", cm::sim::mean_comm_volume(log)},
                            {"total_bytes_received", bytes}};
  const fs::path summary_path = fs::path(out_dir) / "summary.json";
  std::ofstream os(summary_path);
  if (!os) throw cm::Error("cannot open '" + summary_path.string() + "' for writing");
  os << summary.dump(2) << "\n";

  std::printf("wrote %s and %s\n", csv_path.string().c_str(), summary_path.string().c_str());
  for (const auto& [name, f] : fractions.items())
    std::printf("  %-24s %s\n", name.c_str(), f.at("fraction").get<std::string>().c_str());
  std::printf("  mean #CV %.4f\n", cm::sim::mean_comm_volume(log));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"collamamba: verification, reports, benchmarks and simulation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "collamamba 0.1.0");

  GlobalOptions g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Seed for verification instances, bench inputs and simulate")->capture_default_str();
  app.add_option("--precision", g.precision, "Arithmetic for bench and simulate (verify always uses f64)")
      ->check(CLI::IsMember({"f32", "f64"}))
      ->capture_default_str();
  app.add_option("--config", g.config_path, "Network config JSON (fallback: $COLLAMAMBA_CONFIG)");
  app.add_option("--threads", g.threads, "Worker threads for the deterministic parallel paths")
      ->check(CLI::Range(1, 256))
      ->capture_default_str();

  auto* verify = app.add_subcommand("verify", "Run invariant suites in 64-bit arithmetic");
  std::string suite = "all", fault;
  verify->add_option("suite", suite, "kernels, blocks, net, sim or all")->capture_default_str();
  verify->add_option("--inject-fault", fault)->group("");

  auto* report = app.add_subcommand("report", "Print shape, parameter or FLOPs breakdowns");
  std::string kind, variant = "Simple";
  bool csv = false;
  std::size_t batch = 1, neighbors = 1;
  report->add_option("kind", kind, "shapes, params or flops")->required();
  report->add_option("variant", variant, "Simple, ST or Miss")->capture_default_str();
  report->add_flag("--csv", csv, "Emit CSV instead of a table");
  report->add_option("--batch", batch, "Batch size for shapes and FLOPs")->check(CLI::PositiveNumber)->capture_default_str();
  report->add_option("--neighbors", neighbors, "Neighbours fused by the ego (FLOPs)")->check(CLI::NonNegativeNumber)->capture_default_str();

  auto* bench = app.add_subcommand("bench", "Time forward stages along one axis and fit a line");
  std::string axis;
  std::vector<std::size_t> values;
  std::size_t runs = 5, warmup = 1, length = 2200;
  std::string out_path;
  bench->add_option("axis", axis, "seqlen, neighbors or history")->required();
  auto* values_opt = bench->add_option("--values", values, "Axis values, strictly increasing (comma separated)")->delimiter(',');
  bench->add_option("--runs", runs, "Timed runs per point (>= 5)")->capture_default_str();
  bench->add_option("--warmup", warmup, "Discarded warm-up runs per point")->capture_default_str();
  bench->add_option("--length", length, "Sequence length for the neighbors and history axes")->capture_default_str();
  bench->add_option("--out", out_path, "CSV output path (default stdout)");

  auto* simulate_cmd = app.add_subcommand("simulate", "Run a scenario and write commlog.csv and summary.json");
  std::string scenario_path, out_dir, weights;
  simulate_cmd->add_option("scenario", scenario_path, "Scenario JSON")->required();
  simulate_cmd->add_option("out_dir", out_dir, "Output directory")->required();
  simulate_cmd->add_option("--weights", weights, "Weight snapshot (default: seeded initialization)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (seed_opt->count() > 0) g.seed = seed;
  cm::set_num_threads(g.threads);

  try {
    if (*verify) return cmd_verify(g, suite, fault);
    if (*report) return cmd_report(g, kind, variant, csv, batch, neighbors);
    if (*bench) return cmd_bench(g, axis, values, runs, warmup, length, out_path, values_opt->count() > 0);
    if (*simulate_cmd) return cmd_simulate(g, scenario_path, out_dir, weights);
  } catch (const cm::InvalidArgument& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
  return kExitUsage;
}
