#pragma once

#include <cstddef>
#include <vector>

#include "collamamba/core/error.hpp"
#include "collamamba/core/parallel.hpp"
#include "collamamba/kernels/types.hpp"

namespace collamamba::kernels {

namespace detail {
template <typename T>
void check_sequence(const DiscreteSsmParams<T>& p, const Sequence<T>& x, const char* who) {
  p.validate();
  collamamba::detail::require(x.channels == p.channels || x.length == 0,
                              std::string(who) + ": sequence channels do not match parameters");
  collamamba::detail::require(x.values.size() == x.length * x.channels,
                              std::string(who) + ": malformed sequence");
}
}  // namespace detail

/// Left-to-right recurrence with h_0 = 0:
///   h_t = A_bar h_{t-1} + B_bar x_t,  y_t = C h_t + D x_t.
/// Channels are independent and split across workers without changing the
/// per-channel operation order.
template <typename T>
Sequence<T> scan_recurrent(const DiscreteSsmParams<T>& p, const Sequence<T>& x) {
  detail::check_sequence(p, x, "scan_recurrent");
  Sequence<T> y(x.length, p.channels);
  if (x.length == 0) return y;
  const std::size_t N = p.state;
  parallel_for(0, p.channels, [&](std::size_t c0, std::size_t c1) {
    std::vector<T> h(N);
    for (std::size_t c = c0; c < c1; ++c) {
      std::fill(h.begin(), h.end(), T(0));
      const T* a = &p.A_bar[c * N];
      const T* b = &p.B_bar[c * N];
      const T* cc = &p.C[c * N];
      for (std::size_t t = 0; t < x.length; ++t) {
        const T xt = x.at(t, c);
        T acc = T(0);
        for (std::size_t n = 0; n < N; ++n) {
          h[n] = a[n] * h[n] + b[n] * xt;
          acc += cc[n] * h[n];
        }
        y.at(t, c) = acc + p.D[c] * xt;
      }
    }
  });
  return y;
}

/// K_bar[c][k] = sum_n C[c,n] A_bar[c,n]^k B_bar[c,n] for k < length,
/// returned channel-major (channels x length).
template <typename T>
std::vector<T> conv_kernel(const DiscreteSsmParams<T>& p, std::size_t length) {
  p.validate();
  const std::size_t N = p.state;
  std::vector<T> K(p.channels * length, T(0));
  for (std::size_t c = 0; c < p.channels; ++c) {
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t i = c * N + n;
      T power = p.C[i] * p.B_bar[i];
      for (std::size_t k = 0; k < length; ++k) {
        K[c * length + k] += power;
        power *= p.A_bar[i];
      }
    }
  }
  return K;
}

/// Convolutional form: y = x * K_bar (causal) + D x. Only valid for
/// time-invariant parameters.
template <typename T>
Sequence<T> scan_conv(const DiscreteSsmParams<T>& p, const Sequence<T>& x) {
  detail::check_sequence(p, x, "scan_conv");
  Sequence<T> y(x.length, p.channels);
  if (x.length == 0) return y;
  const std::size_t L = x.length;
  const std::vector<T> K = conv_kernel(p, L);
  parallel_for(0, p.channels, [&](std::size_t c0, std::size_t c1) {
    for (std::size_t c = c0; c < c1; ++c) {
      const T* k = &K[c * L];
      for (std::size_t t = 0; t < L; ++t) {
        T acc = T(0);
        for (std::size_t j = 0; j <= t; ++j) acc += k[j] * x.at(t - j, c);
        y.at(t, c) = acc + p.D[c] * x.at(t, c);
      }
    }
  });
  return y;
}

/// The convolutional form has no meaning for per-step parameters.
template <typename T>
[[noreturn]] Sequence<T> scan_conv(const SsmParams<T>&, const SelectiveInputs<T>&, const Sequence<T>&) {
  throw UnsupportedMode("scan_conv: per-step selective inputs require selective_scan");
}

}  // namespace collamamba::kernels
