#pragma once

#include <atomic>
#include <cmath>
#include <span>
#include <type_traits>
#include <utility>

#include "collamamba/core/error.hpp"
#include "collamamba/kernels/types.hpp"

namespace collamamba::kernels {

/// Below this |delta * a| the input gain uses a Taylor series instead of
/// expm1(z) / z.
inline constexpr double kZohSeriesThreshold = 1e-4;

namespace detail {

/// Quadratic coefficient of the (e^z - 1) / z series. Mutable only so the
/// verification tooling can inject a fault and prove the suites catch it.
inline std::atomic<double>& zoh_series_c2() {
  static std::atomic<double> c2{1.0 / 6.0};
  return c2;
}

}  // namespace detail

/// (e^z - 1) / z given em1 = expm1(z).
template <typename T>
inline T zoh_gain(T z, T em1) {
  if (std::abs(z) < T(kZohSeriesThreshold)) {
    static_assert(std::is_floating_point_v<T>);
    const T c2 = static_cast<T>(detail::zoh_series_c2().load(std::memory_order_relaxed));
    return T(1) + z * (T(0.5) + z * c2);
  }
  return em1 / z;
}

/// e^z and e^z - 1, each to full relative precision.
template <typename T>
inline void exp_pair(T z, T& e, T& em1) {
  // Below -1, 1 + expm1(z) cancels; exp(z) - 1 does not.
  if (z < T(-1)) {
    e = std::exp(z);
    em1 = e - T(1);
  } else {
    em1 = std::expm1(z);
    e = em1 + T(1);
  }
}

/// One scalar ZOH step: a_bar = exp(delta a), b_bar = (delta a)^-1 (exp(delta a) - 1) delta b.
/// No argument checks; the public entry points validate.
template <typename T>
inline void zoh_scalar(T a, T b, T delta, T& a_bar, T& b_bar) {
  const T z = delta * a;
  T em1;
  exp_pair(z, a_bar, em1);
  b_bar = zoh_gain(z, em1) * delta * b;
}

/// Discretizes a single diagonal entry. Requires delta > 0 and finite inputs.
template <typename T>
std::pair<T, T> discretize_zoh(T a, T b, T delta) {
  if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(delta))
    collamamba::detail::invalid("discretize_zoh: non-finite input");
  collamamba::detail::require(delta > T(0), "discretize_zoh: delta must be > 0");
  T a_bar, b_bar;
  zoh_scalar(a, b, delta, a_bar, b_bar);
  return {a_bar, b_bar};
}

/// Discretizes every channel of `p` with its own timescale.
template <typename T>
DiscreteSsmParams<T> discretize_zoh(const SsmParams<T>& p, std::span<const T> delta) {
  p.validate();
  collamamba::detail::require(delta.size() == p.channels, "discretize_zoh: one delta per channel required");
  DiscreteSsmParams<T> out;
  out.channels = p.channels;
  out.state = p.state;
  out.A_bar.resize(p.A.size());
  out.B_bar.resize(p.B.size());
  out.C = p.C;
  out.D = p.D;
  for (std::size_t c = 0; c < p.channels; ++c) {
    const T dt = delta[c];
    if (!std::isfinite(dt)) collamamba::detail::invalid("discretize_zoh: non-finite delta");
    collamamba::detail::require(dt > T(0), "discretize_zoh: delta must be > 0");
    for (std::size_t n = 0; n < p.state; ++n) {
      const std::size_t i = c * p.state + n;
      zoh_scalar(p.A[i], p.B[i], dt, out.A_bar[i], out.B_bar[i]);
    }
  }
  return out;
}

template <typename T>
DiscreteSsmParams<T> discretize_zoh(const SsmParams<T>& p, T delta) {
  std::vector<T> d(p.channels, delta);
  return discretize_zoh(p, std::span<const T>(d));
}

}  // namespace collamamba::kernels
