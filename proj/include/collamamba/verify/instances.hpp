#pragma once

#include <cstddef>
#include <vector>

#include "collamamba/core/random.hpp"
#include "collamamba/kernels/discretize.hpp"
#include "collamamba/kernels/types.hpp"

namespace collamamba::verify {

/// Random stable continuous parameters: A in [-N-1, -0.05], B, C, D in [-1, 1].
template <typename T>
kernels::SsmParams<T> random_ssm(Rng& rng, std::size_t channels, std::size_t state) {
  kernels::SsmParams<T> p;
  p.channels = channels;
  p.state = state;
  const std::size_t cs = channels * state;
  p.A.resize(cs);
  p.B.resize(cs);
  p.C.resize(cs);
  p.D.resize(channels);
  for (auto& v : p.A) v = static_cast<T>(-rng.uniform(0.05, static_cast<double>(state) + 1.0));
  for (auto& v : p.B) v = static_cast<T>(rng.uniform(-1.0, 1.0));
  for (auto& v : p.C) v = static_cast<T>(rng.uniform(-1.0, 1.0));
  for (auto& v : p.D) v = static_cast<T>(rng.uniform(-1.0, 1.0));
  return p;
}

template <typename T>
kernels::Sequence<T> random_sequence(Rng& rng, std::size_t length, std::size_t channels) {
  kernels::Sequence<T> x(length, channels);
  for (auto& v : x.values) v = static_cast<T>(rng.uniform(-1.0, 1.0));
  return x;
}

/// Random LTI discretized instance with per-channel timescales in (0.001, 1).
template <typename T>
kernels::DiscreteSsmParams<T> random_discrete(Rng& rng, std::size_t channels, std::size_t state) {
  const auto p = random_ssm<T>(rng, channels, state);
  std::vector<T> delta(channels);
  for (auto& d : delta) d = static_cast<T>(rng.uniform(0.001, 1.0));
  return kernels::discretize_zoh(p, std::span<const T>(delta));
}

template <typename T>
kernels::SelectiveInputs<T> random_streams(Rng& rng, std::size_t length, std::size_t channels,
                                           std::size_t state) {
  kernels::SelectiveInputs<T> s(length, channels, state);
  for (auto& v : s.delta) v = static_cast<T>(rng.uniform(0.01, 1.0));
  for (auto& v : s.B) v = static_cast<T>(rng.uniform(-1.0, 1.0));
  for (auto& v : s.C) v = static_cast<T>(rng.uniform(-1.0, 1.0));
  return s;
}

}  // namespace collamamba::verify
