#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "collamamba/core/error.hpp"

namespace collamamba::sim {

enum class Mode { FeatureFusion, CollaborativePrediction, EgoOnly };

inline std::string_view mode_name(Mode m) {
  switch (m) {
    case Mode::FeatureFusion: return "FeatureFusion";
    case Mode::CollaborativePrediction: return "CollaborativePrediction";
    case Mode::EgoOnly: return "EgoOnly";
  }
  return "?";
}

/// Mode switch. `delta_tau_ms` is the delay of the first neighbour message
/// (infinity if none arrives) and `received` whether a message was accepted.
///
///   delta_tau <= tau0 | received | history_ready | mode
///   yes               | yes      | any           | FeatureFusion
///   yes               | no       | yes / no      | CollaborativePrediction / EgoOnly
///   no                | yes      | yes / no      | CollaborativePrediction / EgoOnly
///   no                | no       | yes / no      | CollaborativePrediction / EgoOnly
///
/// The runner evaluates at the earlier of first arrival and tau0, so only the
/// first and last rows occur there; the middle rows make the function total.
inline Mode decide_mode(double delta_tau_ms, bool received, double tau0_ms, bool history_ready) {
  if (delta_tau_ms <= tau0_ms && received) return Mode::FeatureFusion;
  return history_ready ? Mode::CollaborativePrediction : Mode::EgoOnly;
}

/// A broadcast feature sequence in flight. Times are in ms from scenario
/// start; a dropped message has an infinite arrival time.
struct AgentMessage {
  int sender = 0;
  std::size_t frame = 0;
  std::size_t length = 0, channels = 0;
  std::size_t bytes_per_element = 4;
  double send_ms = 0;
  double arrival_ms = std::numeric_limits<double>::infinity();

  std::uint64_t payload_bytes() const { return static_cast<std::uint64_t>(length) * channels * bytes_per_element; }
  bool dropped() const { return std::isinf(arrival_ms); }
};

/// #CV: base-2 log of the payload size in bytes. Headers are not counted.
inline double comm_volume(std::uint64_t payload_bytes) {
  collamamba::detail::require(payload_bytes > 0, "comm_volume: empty payload");
  return std::log2(static_cast<double>(payload_bytes));
}

inline double comm_volume(const AgentMessage& msg) { return comm_volume(msg.payload_bytes()); }

/// Exact non-negative fraction.
struct Rational {
  std::uint64_t num = 0, den = 1;

  static Rational make(std::uint64_t n, std::uint64_t d) {
    collamamba::detail::require(d > 0, "Rational: zero denominator");
    const std::uint64_t g = std::gcd(n, d);
    return g ? Rational{n / g, d / g} : Rational{0, 1};
  }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }
  friend Rational operator+(Rational a, Rational b) { return make(a.num * b.den + b.num * a.den, a.den * b.den); }
  friend bool operator==(const Rational&, const Rational&) = default;
};

/// One agent-frame of a run.
struct CommRecord {
  std::size_t frame = 0;
  int agent_id = 0;
  Mode mode = Mode::EgoOnly;
  double delta_tau_ms = std::numeric_limits<double>::infinity();
  std::uint64_t bytes = 0;         // accepted payload bytes
  std::size_t messages = 0;        // accepted messages
  double cv_log2 = 0;              // #CV of the message this agent broadcast
  std::int64_t wall_us = 0;        // simulated time at which the agent stopped waiting
  std::uint64_t output_digest = 0; // hash of the detection output, not exported
  double score = std::numeric_limits<double>::quiet_NaN();

  friend bool operator==(const CommRecord& a, const CommRecord& b) {
    auto same = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
    return a.frame == b.frame && a.agent_id == b.agent_id && a.mode == b.mode &&
           same(a.delta_tau_ms, b.delta_tau_ms) && a.bytes == b.bytes && a.messages == b.messages &&
           a.cv_log2 == b.cv_log2 && a.wall_us == b.wall_us && a.output_digest == b.output_digest &&
           same(a.score, b.score);
  }
};

/// Append-only log. Rows are ordered by (frame, agent).
struct CommLog {
  std::size_t warmup_frames = 0;
  std::vector<CommRecord> records;

  void append(CommRecord r) {
    collamamba::detail::require(records.empty() || r.frame > records.back().frame ||
                        (r.frame == records.back().frame && r.agent_id > records.back().agent_id),
                    "CommLog: records must be appended in (frame, agent) order");
    records.push_back(r);
  }
  friend bool operator==(const CommLog&, const CommLog&) = default;
};

inline constexpr std::string_view kCommLogSchema = "commlog/1";

namespace detail {
inline std::string fixed(double v, int digits) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}
}  // namespace detail

/// CSV export. The first line carries the schema version.
inline void write_csv(std::ostream& os, const CommLog& log) {
  os << "# schema=" << kCommLogSchema << " warmup_frames=" << log.warmup_frames << "\n";
  os << "frame,agent_id,mode,delta_tau_ms,bytes,cv_log2,wall_us\n";
  for (const auto& r : log.records)
    os << r.frame << ',' << r.agent_id << ',' << mode_name(r.mode) << ',' << detail::fixed(r.delta_tau_ms, 3) << ','
       << r.bytes << ',' << detail::fixed(r.cv_log2, 4) << ',' << r.wall_us << '\n';
}

/// Fraction of post-warm-up agent-frames spent in each mode. The fractions
/// sum to exactly 1.
inline std::map<Mode, Rational> mode_fractions(const CommLog& log) {
  std::map<Mode, std::uint64_t> counts{{Mode::FeatureFusion, 0}, {Mode::CollaborativePrediction, 0}, {Mode::EgoOnly, 0}};
  std::uint64_t total = 0;
  for (const auto& r : log.records)
    if (r.frame >= log.warmup_frames) {
      ++counts[r.mode];
      ++total;
    }
  collamamba::detail::require(total > 0, "mode_fractions: no post-warm-up frames in the log");
  std::map<Mode, Rational> out;
  for (const auto& [m, n] : counts) out[m] = Rational::make(n, total);
  return out;
}

/// Mean #CV over all rows.
inline double mean_comm_volume(const CommLog& log) {
  collamamba::detail::require(!log.records.empty(), "mean_comm_volume: empty log");
  double s = 0;
  for (const auto& r : log.records) s += r.cv_log2;
  return s / static_cast<double>(log.records.size());
}

}  // namespace collamamba::sim
