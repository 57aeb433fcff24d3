#pragma once

// Reference implementations used only by the verification suites and tests.
// They avoid the library's kernel code paths so they stay independent checks.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "collamamba/kernels/types.hpp"

namespace collamamba::reference {

/// Exact propagation of h' = a h + b u over [0, dt] with constant input u,
/// starting from h0. The homogeneous part uses exp directly; the forced part
/// integrates e^{a (dt - s)} b u over s with composite 8-point Gauss-Legendre
/// quadrature in long double.
inline long double zoh_propagate(long double a, long double b, long double dt, long double h0,
                                 long double u, int panels = 64) {
  static const long double nodes[8] = {-0.9602898564975362316835609L, -0.7966664774136267395915539L,
                                       -0.5255324099163289858177390L, -0.1834346424956498049394761L,
                                       0.1834346424956498049394761L,  0.5255324099163289858177390L,
                                       0.7966664774136267395915539L,  0.9602898564975362316835609L};
  static const long double weights[8] = {0.1012285362903762591525314L, 0.2223810344533744705443560L,
                                         0.3137066458778872873379622L, 0.3626837833783619829651504L,
                                         0.3626837833783619829651504L, 0.3137066458778872873379622L,
                                         0.2223810344533744705443560L, 0.1012285362903762591525314L};
  long double integral = 0.0L;
  const long double w = dt / panels;
  for (int p = 0; p < panels; ++p) {
    const long double lo = p * w;
    for (int k = 0; k < 8; ++k) {
      const long double s = lo + 0.5L * w * (nodes[k] + 1.0L);
      integral += 0.5L * w * weights[k] * std::exp(a * (dt - s));
    }
  }
  return std::exp(a * dt) * h0 + integral * b * u;
}

/// Naive per-element selective scan: channel-outer loop, discretization
/// written out from the closed form in long double.
template <typename T>
std::vector<T> naive_selective_scan(const kernels::SsmParams<T>& p, const kernels::SelectiveInputs<T>& s,
                                    const kernels::Sequence<T>& x) {
  const std::size_t L = x.length, D = p.channels, N = p.state;
  std::vector<T> y(L * D, T(0));
  for (std::size_t c = 0; c < D; ++c) {
    std::vector<long double> h(N, 0.0L);
    for (std::size_t t = 0; t < L; ++t) {
      long double out = 0.0L;
      const long double dt = s.delta[t * D + c];
      const long double xt = x.values[t * D + c];
      for (std::size_t n = 0; n < N; ++n) {
        const long double a = p.A[c * N + n];
        const long double za = dt * a;
        const long double a_bar = std::exp(za);
        const long double b_bar =
            za == 0.0L ? dt * s.B[t * N + n] : (a_bar - 1.0L) / za * dt * s.B[t * N + n];
        h[n] = a_bar * h[n] + b_bar * xt;
        out += s.C[t * N + n] * h[n];
      }
      y[t * D + c] = static_cast<T>(out + p.D[c] * xt);
    }
  }
  return y;
}

/// Central difference of f at x along coordinate `i` of the vector `v`.
inline double central_difference(std::vector<double>& v, std::size_t i, double h,
                                 const std::function<double()>& f) {
  const double saved = v[i];
  v[i] = saved + h;
  const double fp = f();
  v[i] = saved - h;
  const double fm = f();
  v[i] = saved;
  return (fp - fm) / (2.0 * h);
}

}  // namespace collamamba::reference
