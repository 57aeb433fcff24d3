#pragma once

#include <cstdint>

namespace collamamba::kernels {

/// FLOP counting convention used throughout the library: one multiply-add
/// counts as 2 FLOPs. A selective scan step costs kScanMacsPerState
/// multiply-adds per state element (discretization, state update, output
/// contraction).
inline constexpr std::uint64_t kFlopsPerMac = 2;
inline constexpr std::uint64_t kScanMacsPerState = 6;

/// Analytic FLOPs of one scan over `length` steps, `channels` channels and
/// `state` state entries: kScanMacsPerState * 2 * L * d * N. Exactly linear in L.
constexpr std::uint64_t scan_flops(std::uint64_t length, std::uint64_t channels, std::uint64_t state) {
  return kScanMacsPerState * kFlopsPerMac * length * channels * state;
}

}  // namespace collamamba::kernels
