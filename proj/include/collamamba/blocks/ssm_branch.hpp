#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "collamamba/blocks/params.hpp"
#include "collamamba/core/ops.hpp"
#include "collamamba/core/tensor.hpp"
#include "collamamba/kernels/flops.hpp"
#include "collamamba/kernels/selective_scan.hpp"

namespace collamamba {

/// Input-dependent SSM parameters for K scan directions, stacked along the
/// leading axis:
///   x_proj_weight   (K, dt_rank + 2N, inner)
///   dt_projs_weight (K, inner, dt_rank)
///   dt_projs_bias   (K, inner)
///   A_logs          (K * inner, N)     A = -exp(A_logs)
///   Ds              (K * inner)
template <typename T>
struct SsmBranchParams {
  Tensor<T> x_proj_weight;
  Tensor<T> dt_projs_weight;
  Tensor<T> dt_projs_bias;
  Tensor<T> A_logs;
  Tensor<T> Ds;

  SsmBranchParams() = default;
  SsmBranchParams(const BlockConfig& cfg, std::size_t directions)
      : x_proj_weight({directions, cfg.xproj_out(), cfg.inner()}),
        dt_projs_weight({directions, cfg.inner(), cfg.dt_rank}),
        dt_projs_bias({directions, cfg.inner()}),
        A_logs({directions * cfg.inner(), cfg.state}),
        Ds({directions * cfg.inner()}) {}

  std::size_t directions() const { return x_proj_weight.dim(0); }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(join_name(prefix, "x_proj_weight"), x_proj_weight, InitKind::FanIn);
    f(join_name(prefix, "dt_projs_weight"), dt_projs_weight, InitKind::FanIn);
    f(join_name(prefix, "dt_projs_bias"), dt_projs_bias, InitKind::DtBias);
    f(join_name(prefix, "A_logs"), A_logs, InitKind::ALog);
    f(join_name(prefix, "Ds"), Ds, InitKind::Ones);
  }
};

/// Runs direction `k` of the branch over `seq` (length x inner, already in
/// that direction's visiting order) and writes length x inner outputs to `y`.
/// A nonzero `segment` restarts the state every `segment` steps.
template <typename T>
void directional_scan(const T* seq, std::size_t length, const BlockConfig& cfg, const SsmBranchParams<T>& p,
                      std::size_t k, T* y, std::size_t segment = 0) {
  if (length == 0) return;
  const std::size_t E = cfg.inner(), N = cfg.state, R = cfg.dt_rank, P = cfg.xproj_out();
  const auto L = static_cast<Eigen::Index>(length);

  // (L, R + 2N) = seq * W_x^T
  std::vector<T> dbl(length * P);
  {
    Eigen::Map<const ops::RowMatrix<T>> x(seq, L, static_cast<Eigen::Index>(E));
    Eigen::Map<const ops::RowMatrix<T>> w(p.x_proj_weight.data() + k * P * E, static_cast<Eigen::Index>(P),
                                          static_cast<Eigen::Index>(E));
    Eigen::Map<ops::RowMatrix<T>> out(dbl.data(), L, static_cast<Eigen::Index>(P));
    out.noalias() = x * w.transpose();
  }

  // delta = softplus(dt_low * W_dt^T + b_dt), (L, E)
  std::vector<T> delta(length * E);
  {
    using Strided = Eigen::Map<const ops::RowMatrix<T>, 0, Eigen::OuterStride<>>;
    Strided dt_low(dbl.data(), L, static_cast<Eigen::Index>(R), Eigen::OuterStride<>(static_cast<Eigen::Index>(P)));
    Eigen::Map<const ops::RowMatrix<T>> w(p.dt_projs_weight.data() + k * E * R, static_cast<Eigen::Index>(E),
                                          static_cast<Eigen::Index>(R));
    Eigen::Map<ops::RowMatrix<T>> out(delta.data(), L, static_cast<Eigen::Index>(E));
    out.noalias() = dt_low * w.transpose();
    const T* bias = p.dt_projs_bias.data() + k * E;
    for (std::size_t t = 0; t < length; ++t)
      for (std::size_t e = 0; e < E; ++e) delta[t * E + e] = ops::softplus(delta[t * E + e] + bias[e]);
  }

  std::vector<T> B(length * N), C(length * N);
  for (std::size_t t = 0; t < length; ++t)
    for (std::size_t n = 0; n < N; ++n) {
      B[t * N + n] = dbl[t * P + R + n];
      C[t * N + n] = dbl[t * P + R + N + n];
    }

  std::vector<T> A(E * N);
  const T* a_log = p.A_logs.data() + k * E * N;
  for (std::size_t i = 0; i < E * N; ++i) A[i] = -std::exp(a_log[i]);

  kernels::selective_scan_raw(length, E, N, seq, delta.data(), B.data(), C.data(), A.data(),
                              p.Ds.data() + k * E, y, segment);
}

/// Block-internal FLOPs of one directional scan over `length` tokens:
/// x_proj, dt_proj, softplus and the scan itself.
inline std::uint64_t directional_scan_flops(std::uint64_t length, const BlockConfig& cfg) {
  const std::uint64_t E = cfg.inner(), N = cfg.state, R = cfg.dt_rank;
  return length * (2 * E * cfg.xproj_out() + 2 * R * E + E + 3 * E) + kernels::scan_flops(length, E, N);
}

}  // namespace collamamba
