#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "collamamba/core/error.hpp"

namespace collamamba::kernels {

/// A length x channels sequence stored time-major (row t holds all channels
/// of step t). Unlike Tensor, a zero-length sequence is valid.
template <typename T>
struct Sequence {
  std::size_t length = 0;
  std::size_t channels = 0;
  std::vector<T> values;

  Sequence() = default;
  Sequence(std::size_t l, std::size_t d, T fill = T(0)) : length(l), channels(d), values(l * d, fill) {}
  Sequence(std::size_t l, std::size_t d, std::vector<T> v) : length(l), channels(d), values(std::move(v)) {
    detail::require(values.size() == l * d, "sequence data length mismatch");
  }

  T& at(std::size_t t, std::size_t c) { return values[t * channels + c]; }
  const T& at(std::size_t t, std::size_t c) const { return values[t * channels + c]; }
};

/// Continuous diagonal SSM over `channels` independent channels with `state`
/// entries each. Per-channel arrays are channel-major: entry (c, n) lives at
/// c * state + n.
template <typename T>
struct SsmParams {
  std::size_t channels = 0;
  std::size_t state = 0;
  std::vector<T> A;  // diagonal of the evolution matrix, channels x state
  std::vector<T> B;  // channels x state
  std::vector<T> C;  // channels x state
  std::vector<T> D;  // channels

  /// A_nn = -(n + 1) for every channel, B = C = 1, D = 0.
  static SsmParams stable_default(std::size_t channels, std::size_t state) {
    SsmParams p;
    p.channels = channels;
    p.state = state;
    p.A.resize(channels * state);
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t n = 0; n < state; ++n) p.A[c * state + n] = -static_cast<T>(n + 1);
    p.B.assign(channels * state, T(1));
    p.C.assign(channels * state, T(1));
    p.D.assign(channels, T(0));
    return p;
  }

  void validate() const {
    const std::size_t cs = channels * state;
    detail::require(channels >= 1 && state >= 1, "ssm params: channels and state must be >= 1");
    detail::require(A.size() == cs && B.size() == cs && C.size() == cs && D.size() == channels,
                    "ssm params: array sizes do not match channels x state");
    for (const auto* v : {&A, &B, &C, &D})
      for (T x : *v) detail::require(std::isfinite(x), "ssm params: non-finite entry");
  }
};

/// Zero-order-hold discretized parameters, same layout as SsmParams.
template <typename T>
struct DiscreteSsmParams {
  std::size_t channels = 0;
  std::size_t state = 0;
  std::vector<T> A_bar;
  std::vector<T> B_bar;
  std::vector<T> C;
  std::vector<T> D;

  void validate() const {
    const std::size_t cs = channels * state;
    detail::require(A_bar.size() == cs && B_bar.size() == cs && C.size() == cs && D.size() == channels,
                    "discrete ssm params: array sizes do not match channels x state");
  }
};

/// Per-step parameter streams of an input-dependent scan. The timescale is
/// per step and channel; B and C are per step and shared by all channels.
template <typename T>
struct SelectiveInputs {
  std::size_t length = 0;
  std::size_t channels = 0;
  std::size_t state = 0;
  std::vector<T> delta;  // length x channels
  std::vector<T> B;      // length x state
  std::vector<T> C;      // length x state

  SelectiveInputs() = default;
  SelectiveInputs(std::size_t l, std::size_t d, std::size_t n)
      : length(l), channels(d), state(n), delta(l * d), B(l * n), C(l * n) {}
};

}  // namespace collamamba::kernels
