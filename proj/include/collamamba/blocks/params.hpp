#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "collamamba/core/random.hpp"
#include "collamamba/core/tensor.hpp"

namespace collamamba {

/// How a learnable tensor is filled at construction.
enum class InitKind {
  Zeros,
  Ones,
  FanIn,      // uniform(+-1/sqrt(fan_in)), fan_in = product of all but the leading extent
  Embedding,  // uniform with standard deviation 0.02
  ALog,       // log(n + 1) along the state axis, so A_n = -(n + 1)
  DtBias,     // inverse softplus of a log-uniform timescale in [1e-3, 1e-1]
};

/// Hyper-parameters shared by every Mamba-style block.
struct BlockConfig {
  std::size_t dim = 96;        // model width c
  std::size_t expand = 2;      // inner width = expand * dim
  std::size_t state = 16;      // N
  std::size_t dt_rank = 6;     // rank of the timescale projection
  std::size_t conv2d_kernel = 3;
  std::size_t conv1d_width = 4;

  std::size_t inner() const { return expand * dim; }
  std::size_t xproj_out() const { return dt_rank + 2 * state; }
};

/// Fills `t` according to `kind` from a stream seeded by (seed, name). The
/// name-derived seed keeps a tensor's initial value independent of which other
/// modules are present in the model.
template <typename T>
void initialize_tensor(Tensor<T>& t, InitKind kind, std::uint64_t seed, std::string_view name) {
  Rng rng(derive_seed(seed, name));
  switch (kind) {
    case InitKind::Zeros:
      t.fill(T(0));
      break;
    case InitKind::Ones:
      t.fill(T(1));
      break;
    case InitKind::FanIn: {
      const double fan_in = static_cast<double>(t.size() / t.dim(0));
      const double bound = 1.0 / std::sqrt(fan_in);
      for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-bound, bound));
      break;
    }
    case InitKind::Embedding: {
      const double bound = 0.02 * std::sqrt(3.0);
      for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-bound, bound));
      break;
    }
    case InitKind::ALog: {
      const std::size_t n_state = t.dim(t.rank() - 1);
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(std::log(static_cast<double>(i % n_state + 1)));
      break;
    }
    case InitKind::DtBias: {
      for (auto& v : t.values()) {
        const double dt = std::exp(rng.uniform(std::log(1e-3), std::log(1e-1)));
        v = static_cast<T>(dt + std::log(-std::expm1(-dt)));
      }
      break;
    }
  }
}

/// Visitor adapters over any parameter struct exposing
///   template <class F> void visit(const std::string& prefix, F&& f)
/// with f(name, tensor, kind).
template <typename P>
std::size_t count_parameters(const P& params) {
  std::size_t n = 0;
  const_cast<P&>(params).visit("", [&](const std::string&, auto& t, InitKind) { n += t.size(); });
  return n;
}

template <typename P>
void initialize_parameters(P& params, std::uint64_t seed, const std::string& prefix = "") {
  params.visit(prefix, [&](const std::string& name, auto& t, InitKind kind) { initialize_tensor(t, kind, seed, name); });
}

/// Zeros every projection and convolution weight (FanIn tensors). Biases,
/// norms and SSM constants keep their values.
template <typename P>
void zero_projections(P& params) {
  params.visit("", [](const std::string&, auto& t, InitKind kind) {
    if (kind == InitKind::FanIn) t.fill(0);
  });
}

inline std::string join_name(const std::string& prefix, std::string_view leaf) {
  return prefix.empty() ? std::string(leaf) : prefix + "." + std::string(leaf);
}

}  // namespace collamamba
