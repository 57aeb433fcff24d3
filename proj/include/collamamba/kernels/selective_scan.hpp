#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "collamamba/core/error.hpp"
#include "collamamba/core/parallel.hpp"
#include "collamamba/kernels/discretize.hpp"
#include "collamamba/kernels/types.hpp"

namespace collamamba::kernels {

/// Raw input-dependent scan over time-major buffers:
///   x, delta, y : length x channels
///   B, C        : length x state (shared by all channels)
///   A           : channels x state, D : channels
/// Each step discretizes (A, B_t) with delta_t by zero-order hold and applies
/// the recurrence. Channel ranges run on separate workers; a channel's
/// arithmetic is the same for any thread count. A nonzero `segment` splits
/// the sequence into independent scans of that many steps (state reset to 0
/// at each boundary).
template <typename T>
void selective_scan_raw(std::size_t length, std::size_t channels, std::size_t state, const T* x,
                        const T* delta, const T* B, const T* C, const T* A, const T* D, T* y,
                        std::size_t segment = 0) {
  if (length == 0) return;
  parallel_for(0, channels, [&](std::size_t c0, std::size_t c1) {
    const std::size_t width = c1 - c0;
    std::vector<T> h(width * state, T(0));
    for (std::size_t t = 0; t < length; ++t) {
      if (segment && t && t % segment == 0) std::fill(h.begin(), h.end(), T(0));
      const T* bt = B + t * state;
      const T* ct = C + t * state;
      for (std::size_t c = c0; c < c1; ++c) {
        const T dt = delta[t * channels + c];
        const T xt = x[t * channels + c];
        const T* a = A + c * state;
        T* hc = &h[(c - c0) * state];
        T acc = T(0);
        for (std::size_t n = 0; n < state; ++n) {
          T a_bar, b_bar;
          zoh_scalar(a[n], bt[n], dt, a_bar, b_bar);
          hc[n] = a_bar * hc[n] + b_bar * xt;
          acc += ct[n] * hc[n];
        }
        y[t * channels + c] = acc + D[c] * xt;
      }
    }
  });
}

namespace detail {
template <typename T>
void check_selective(const SsmParams<T>& p, const SelectiveInputs<T>& s, const Sequence<T>& x,
                     const char* who) {
  using collamamba::detail::require;
  const std::string w(who);
  require(p.channels >= 1 && p.state >= 1, w + ": empty parameter set");
  require(p.A.size() == p.channels * p.state && p.D.size() == p.channels,
          w + ": A must be channels x state and D one per channel");
  require(x.channels == p.channels || x.length == 0, w + ": input channels do not match parameters");
  require(s.length == x.length, w + ": stream length " + std::to_string(s.length) +
                                    " does not match input length " + std::to_string(x.length));
  require(s.delta.size() == x.length * p.channels, w + ": delta stream must be length x channels");
  require(s.B.size() == x.length * p.state && s.C.size() == x.length * p.state,
          w + ": B and C streams must be length x state");
  for (T v : p.A) require(std::isfinite(v), w + ": non-finite A");
  for (T v : p.D) require(std::isfinite(v), w + ": non-finite D");
  for (T v : s.delta) require(std::isfinite(v) && v >= T(0), w + ": delta must be finite and >= 0");
}
}  // namespace detail

/// Input-dependent scan using p.A and p.D; p.B and p.C are ignored in favour
/// of the per-step streams. With constant streams this is bit-identical to
/// scan_recurrent(discretize_zoh(...)).
template <typename T>
Sequence<T> selective_scan(const SsmParams<T>& p, const SelectiveInputs<T>& s, const Sequence<T>& x) {
  detail::check_selective(p, s, x, "selective_scan");
  Sequence<T> y(x.length, p.channels);
  selective_scan_raw(x.length, p.channels, p.state, x.values.data(), s.delta.data(), s.B.data(),
                     s.C.data(), p.A.data(), p.D.data(), y.values.data());
  return y;
}

template <typename T>
struct SelectiveScanGrads {
  std::vector<T> dx;      // length x channels
  std::vector<T> ddelta;  // length x channels
  std::vector<T> dB;      // length x state
  std::vector<T> dC;      // length x state
  std::vector<T> dA;      // channels x state
  std::vector<T> dD;      // channels
};

namespace detail {
/// Derivative of (e^z - 1)/z, i.e. (z e^z - e^z + 1) / z^2.
template <typename T>
T zoh_gain_slope(T z, T em1) {
  if (std::abs(z) < T(1e-3)) return T(0.5) + z * (T(1) / 3 + z * (T(1) / 8 + z * (T(1) / 30)));
  return (z * (em1 + T(1)) - em1) / (z * z);
}
}  // namespace detail

/// Adjoint of selective_scan for the scalar loss sum(dy * y). Runs the
/// forward pass to cache states, then a reverse-time recurrence.
template <typename T>
SelectiveScanGrads<T> selective_scan_backward(const SsmParams<T>& p, const SelectiveInputs<T>& s,
                                              const Sequence<T>& x, const Sequence<T>& dy) {
  detail::check_selective(p, s, x, "selective_scan_backward");
  collamamba::detail::require(dy.length == x.length && dy.channels == x.channels &&
                                  dy.values.size() == x.values.size(),
                              "selective_scan_backward: dy must have the shape of y");
  const std::size_t L = x.length, Dc = p.channels, N = p.state;
  SelectiveScanGrads<T> g;
  g.dx.assign(L * Dc, T(0));
  g.ddelta.assign(L * Dc, T(0));
  g.dB.assign(L * N, T(0));
  g.dC.assign(L * N, T(0));
  g.dA.assign(Dc * N, T(0));
  g.dD.assign(Dc, T(0));
  if (L == 0) return g;

  // Forward states h_t, t = 0..L-1.
  std::vector<T> H(L * Dc * N, T(0));
  for (std::size_t t = 0; t < L; ++t)
    for (std::size_t c = 0; c < Dc; ++c)
      for (std::size_t n = 0; n < N; ++n) {
        T a_bar, b_bar;
        zoh_scalar(p.A[c * N + n], s.B[t * N + n], s.delta[t * Dc + c], a_bar, b_bar);
        const T prev = t ? H[((t - 1) * Dc + c) * N + n] : T(0);
        H[(t * Dc + c) * N + n] = a_bar * prev + b_bar * x.at(t, c);
      }

  std::vector<T> carry(Dc * N, T(0));  // A_bar_{t+1} * dL/dh_{t+1}
  for (std::size_t t = L; t-- > 0;) {
    for (std::size_t c = 0; c < Dc; ++c) {
      const T gy = dy.at(t, c);
      const T xt = x.at(t, c);
      const T dt = s.delta[t * Dc + c];
      for (std::size_t n = 0; n < N; ++n) {
        const T a = p.A[c * N + n];
        const T b = s.B[t * N + n];
        const T z = dt * a;
        T a_bar, em1;
        exp_pair(z, a_bar, em1);
        const T gain = zoh_gain(z, em1);
        const T b_bar = gain * dt * b;

        const T h = H[(t * Dc + c) * N + n];
        const T h_prev = t ? H[((t - 1) * Dc + c) * N + n] : T(0);
        const T gh = s.C[t * N + n] * gy + carry[c * N + n];

        g.dC[t * N + n] += gy * h;
        const T d_abar = gh * h_prev;
        const T d_bbar = gh * xt;
        g.dx[t * Dc + c] += gh * b_bar;
        // a_bar = e^{dt a};  b_bar = b (e^{dt a} - 1) / a
        g.ddelta[t * Dc + c] += d_abar * a * a_bar + d_bbar * b * a_bar;
        g.dA[c * N + n] += d_abar * dt * a_bar + d_bbar * b * dt * dt * detail::zoh_gain_slope(z, em1);
        g.dB[t * N + n] += d_bbar * dt * gain;
        carry[c * N + n] = a_bar * gh;
      }
      g.dx[t * Dc + c] += p.D[c] * gy;
      g.dD[c] += gy * xt;
    }
  }
  return g;
}

}  // namespace collamamba::kernels
