#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "collamamba/core/random.hpp"
#include "collamamba/core/tensor.hpp"
#include "collamamba/kernels/discretize.hpp"
#include "collamamba/kernels/scan.hpp"
#include "collamamba/kernels/selective_scan.hpp"
#include "collamamba/verify/instances.hpp"
#include "collamamba/verify/reference.hpp"

namespace collamamba::verify {

/// Relative error with a floor on the denominator; below |floor| the measure
/// degrades to absolute error scaled by 1/floor.
inline double relative_error(double a, double b, double floor = 1e-3) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Worst relative error of one ZOH step against the quadrature oracle, over
/// `count` random diagonal entries. A_bar (h0 = 1, u = 0), B_bar (h0 = 0,
/// u = 1) and a mixed step are scored separately so a small B_bar cannot hide
/// behind A_bar h0. When `series_branch` is set, |delta a| < 1e-4.
inline double zoh_step_error(Rng& rng, std::size_t count, bool series_branch) {
  double worst = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double a = -rng.uniform(0.05, 17.0);
    const double b = rng.uniform(-1.0, 1.0);
    const double dt = series_branch ? rng.uniform(1e-9, 0.99e-4) / std::abs(a) : rng.uniform(1e-3, 1.0);
    const double h0 = rng.uniform(-1.0, 1.0);
    const double u = rng.uniform(-1.0, 1.0);
    const auto [a_bar, b_bar] = kernels::discretize_zoh(a, b, dt);
    auto err = [&](double got, double hh, double uu) {
      const auto exact = static_cast<double>(reference::zoh_propagate(a, b, dt, hh, uu));
      return std::abs(got - exact) / std::abs(exact);
    };
    worst = std::max({worst, err(a_bar, 1.0, 0.0), err(b_bar, 0.0, 1.0),
                      relative_error(a_bar * h0 + b_bar * u,
                                     static_cast<double>(reference::zoh_propagate(a, b, dt, h0, u)), 1e-6)});
  }
  return worst;
}

/// max |scan_recurrent - scan_conv| for one random LTI instance.
template <typename T>
T form_equivalence_error(Rng& rng, std::size_t length, std::size_t channels, std::size_t state) {
  const auto p = random_discrete<T>(rng, channels, state);
  const auto x = random_sequence<T>(rng, length, channels);
  const auto yr = kernels::scan_recurrent(p, x);
  const auto yc = kernels::scan_conv(p, x);
  return max_abs_diff<T>(yr.values, yc.values);
}

/// Worst relative error between selective_scan_backward and central finite
/// differences of sum(dy * y) over every input and parameter coordinate.
inline double gradient_check_error(Rng& rng, std::size_t length, std::size_t channels, std::size_t state,
                                   double h = 1e-5) {
  auto p = random_ssm<double>(rng, channels, state);
  auto s = random_streams<double>(rng, length, channels, state);
  auto x = random_sequence<double>(rng, length, channels);
  const auto dy = random_sequence<double>(rng, length, channels);
  const auto g = kernels::selective_scan_backward(p, s, x, dy);

  auto loss = [&] {
    const auto y = kernels::selective_scan(p, s, x);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.values.size(); ++i) acc += dy.values[i] * y.values[i];
    return acc;
  };
  double worst = 0.0;
  auto check = [&](std::vector<double>& v, const std::vector<double>& analytic) {
    for (std::size_t i = 0; i < v.size(); ++i)
      worst = std::max(worst, relative_error(analytic[i], reference::central_difference(v, i, h, loss)));
  };
  check(x.values, g.dx);
  check(s.delta, g.ddelta);
  check(s.B, g.dB);
  check(s.C, g.dC);
  check(p.A, g.dA);
  check(p.D, g.dD);
  return worst;
}

}  // namespace collamamba::verify
