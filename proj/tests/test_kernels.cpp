#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "collamamba/kernels/discretize.hpp"
#include "collamamba/kernels/flops.hpp"
#include "collamamba/kernels/scan.hpp"
#include "collamamba/kernels/selective_scan.hpp"
#include "collamamba/verify/instances.hpp"
#include "collamamba/verify/kernel_checks.hpp"
#include "collamamba/verify/reference.hpp"

namespace cm = collamamba;
namespace k = collamamba::kernels;

namespace {

k::DiscreteSsmParams<double> scalar_discrete(double a_bar, double b_bar, double c, double d) {
  k::DiscreteSsmParams<double> p;
  p.channels = 1;
  p.state = 1;
  p.A_bar = {a_bar};
  p.B_bar = {b_bar};
  p.C = {c};
  p.D = {d};
  return p;
}

}  // namespace

TEST(Zoh, HalfLifeClosedForm) {
  const auto [a_bar, b_bar] = k::discretize_zoh(-1.0, 1.0, std::numbers::ln2);
  EXPECT_NEAR(a_bar, 0.5, 1e-15);
  EXPECT_NEAR(b_bar, 0.5, 1e-15);
}

TEST(Zoh, ZeroEvolutionIsTaylorLimit) {
  const auto [a_bar, b_bar] = k::discretize_zoh(0.0, 3.0, 0.25);
  EXPECT_EQ(a_bar, 1.0);
  EXPECT_DOUBLE_EQ(b_bar, 0.75);
}

TEST(Zoh, RejectsBadInputs) {
  EXPECT_THROW(k::discretize_zoh(std::nan(""), 1.0, 0.1), cm::InvalidArgument);
  EXPECT_THROW(k::discretize_zoh(-1.0, std::numeric_limits<double>::infinity(), 0.1), cm::InvalidArgument);
  EXPECT_THROW(k::discretize_zoh(-1.0, 1.0, 0.0), cm::InvalidArgument);
  EXPECT_THROW(k::discretize_zoh(-1.0, 1.0, -0.5), cm::InvalidArgument);
}

TEST(Zoh, MatchesQuadratureOracle) {
  cm::Rng rng(7);
  EXPECT_LE(cm::verify::zoh_step_error(rng, 500, false), 1e-10);
  EXPECT_LE(cm::verify::zoh_step_error(rng, 500, true), 1e-10);
}

TEST(Zoh, StrongDecayKeepsRelativePrecision) {
  for (double z : {-1.5, -8.0, -17.0, -40.0}) {
    const auto [a_bar, b_bar] = k::discretize_zoh(z, 1.0, 1.0);
    EXPECT_LE(std::abs(a_bar - std::exp(z)) / std::exp(z), 1e-15) << z;
    EXPECT_LE(std::abs(b_bar - std::expm1(z) / z) / std::abs(std::expm1(z) / z), 1e-15) << z;
  }
}

TEST(Zoh, SixteenStateStepMatchesOracle) {
  // N = 16 random diagonal, one step from a random state.
  cm::Rng rng(11);
  auto p = cm::verify::random_ssm<double>(rng, 1, 16);
  const double dt = 0.37;
  const auto d = k::discretize_zoh(p, dt);
  const double u = 0.8;
  for (std::size_t n = 0; n < 16; ++n) {
    const double h0 = rng.uniform(-1, 1);
    const double step = d.A_bar[n] * h0 + d.B_bar[n] * u;
    const double exact = static_cast<double>(cm::reference::zoh_propagate(p.A[n], p.B[n], dt, h0, u));
    EXPECT_LE(cm::verify::relative_error(step, exact, 1e-6), 1e-10) << "state " << n;
  }
}

TEST(Zoh, StableEntriesContract) {
  cm::Rng rng(3);
  const auto p = cm::verify::random_ssm<double>(rng, 8, 16);
  const auto d = k::discretize_zoh(p, 0.5);
  for (double a : d.A_bar) {
    EXPECT_GT(a, 0.0);
    EXPECT_LT(a, 1.0);
  }
}

TEST(ScanRecurrent, CumulativeSum) {
  const auto p = scalar_discrete(1, 1, 1, 0);
  const auto y = k::scan_recurrent(p, k::Sequence<double>(3, 1, {1, 2, 3}));
  EXPECT_EQ(y.values, (std::vector<double>{1, 3, 6}));
}

TEST(ScanRecurrent, MemorylessWhenABarZero) {
  const auto p = scalar_discrete(0, 2, 1.5, 0.25);
  const std::vector<double> x{1, -2, 3, 0.5};
  const auto y = k::scan_recurrent(p, k::Sequence<double>(4, 1, x));
  for (std::size_t t = 0; t < 4; ++t) EXPECT_DOUBLE_EQ(y.values[t], (1.5 * 2 + 0.25) * x[t]);
}

TEST(ScanRecurrent, EmptyInputGivesEmptyOutput) {
  const auto p = scalar_discrete(0.5, 1, 1, 0);
  const auto y = k::scan_recurrent(p, k::Sequence<double>(0, 1));
  EXPECT_EQ(y.length, 0u);
  EXPECT_TRUE(y.values.empty());
}

TEST(ScanConv, KernelPowers) {
  const auto p = scalar_discrete(0.5, 1, 1, 0);
  EXPECT_EQ(k::conv_kernel(p, 3), (std::vector<double>{1, 0.5, 0.25}));
}

TEST(ScanConv, LengthOne) {
  const auto p = scalar_discrete(0.5, 2, 3, 0.5);
  const auto y = k::scan_conv(p, k::Sequence<double>(1, 1, {2.0}));
  EXPECT_DOUBLE_EQ(y.values[0], (3 * 2 + 0.5) * 2.0);
}

TEST(ScanConv, RejectsSelectiveInputs) {
  auto p = k::SsmParams<double>::stable_default(2, 4);
  k::SelectiveInputs<double> s(3, 2, 4);
  EXPECT_THROW(k::scan_conv(p, s, k::Sequence<double>(3, 2)), cm::UnsupportedMode);
}

TEST(ScanForms, AgreeOnRandomInstances) {
  cm::Rng rng(21);
  EXPECT_LE(cm::verify::form_equivalence_error<double>(rng, 64, 4, 16), 1e-9);
  EXPECT_LE(cm::verify::form_equivalence_error<double>(rng, 256, 3, 16), 1e-9);
  EXPECT_LE(cm::verify::form_equivalence_error<float>(rng, 256, 3, 16), 1e-4f);
}

TEST(ScanForms, LinearInInput) {
  cm::Rng rng(5);
  const auto p = cm::verify::random_discrete<double>(rng, 3, 16);
  const auto x = cm::verify::random_sequence<double>(rng, 128, 3);
  const auto z = cm::verify::random_sequence<double>(rng, 128, 3);
  const double alpha = 0.7, beta = -1.3;
  k::Sequence<double> mix(128, 3);
  for (std::size_t i = 0; i < mix.values.size(); ++i) mix.values[i] = alpha * x.values[i] + beta * z.values[i];
  const auto ym = k::scan_recurrent(p, mix);
  const auto yx = k::scan_recurrent(p, x);
  const auto yz = k::scan_recurrent(p, z);
  for (std::size_t i = 0; i < ym.values.size(); ++i)
    EXPECT_NEAR(ym.values[i], alpha * yx.values[i] + beta * yz.values[i], 1e-12);
}

TEST(ScanForms, BoundedOutputForStableSystem) {
  cm::Rng rng(8);
  const auto p = cm::verify::random_discrete<double>(rng, 2, 16);
  k::Sequence<double> x(2000, 2, 1.0);  // |x| <= 1
  const auto y = k::scan_recurrent(p, x);
  // |h_n| <= |B_bar_n| / (1 - |A_bar_n|) for unit-bounded input.
  for (std::size_t c = 0; c < 2; ++c) {
    double bound = std::abs(p.D[c]);
    for (std::size_t n = 0; n < 16; ++n)
      bound += std::abs(p.C[c * 16 + n]) * std::abs(p.B_bar[c * 16 + n]) / (1 - std::abs(p.A_bar[c * 16 + n]));
    for (std::size_t t = 0; t < 2000; ++t) EXPECT_LE(std::abs(y.at(t, c)), bound + 1e-12);
  }
}

TEST(SelectiveScan, ConstantStreamsReduceToRecurrentBitwise) {
  cm::Rng rng(13);
  const std::size_t L = 40, D = 4, N = 8;
  auto p = cm::verify::random_ssm<double>(rng, D, N);
  // Channel-uniform B and C so the LTI form has the same parameters.
  std::vector<double> b(N), c(N);
  for (auto& v : b) v = rng.uniform(-1, 1);
  for (auto& v : c) v = rng.uniform(-1, 1);
  for (std::size_t ch = 0; ch < D; ++ch)
    for (std::size_t n = 0; n < N; ++n) {
      p.B[ch * N + n] = b[n];
      p.C[ch * N + n] = c[n];
    }
  std::vector<double> delta(D);
  for (auto& v : delta) v = rng.uniform(0.01, 1);
  k::SelectiveInputs<double> s(L, D, N);
  for (std::size_t t = 0; t < L; ++t) {
    for (std::size_t ch = 0; ch < D; ++ch) s.delta[t * D + ch] = delta[ch];
    for (std::size_t n = 0; n < N; ++n) {
      s.B[t * N + n] = b[n];
      s.C[t * N + n] = c[n];
    }
  }
  const auto x = cm::verify::random_sequence<double>(rng, L, D);
  const auto ys = k::selective_scan(p, s, x);
  const auto yr = k::scan_recurrent(k::discretize_zoh(p, std::span<const double>(delta)), x);
  EXPECT_EQ(ys.values, yr.values);
}

TEST(SelectiveScan, VanishingTimescaleLeavesSkipOnly) {
  cm::Rng rng(17);
  const auto p = cm::verify::random_ssm<double>(rng, 3, 4);
  auto s = cm::verify::random_streams<double>(rng, 10, 3, 4);
  std::fill(s.delta.begin(), s.delta.end(), 0.0);
  const auto x = cm::verify::random_sequence<double>(rng, 10, 3);
  const auto y = k::selective_scan(p, s, x);
  for (std::size_t t = 0; t < 10; ++t)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(y.at(t, c), p.D[c] * x.at(t, c));
}

TEST(SelectiveScan, MatchesNaiveReference) {
  cm::Rng rng(19);
  const auto p = cm::verify::random_ssm<double>(rng, 4, 8);
  const auto s = cm::verify::random_streams<double>(rng, 32, 4, 8);
  const auto x = cm::verify::random_sequence<double>(rng, 32, 4);
  const auto y = k::selective_scan(p, s, x);
  const auto ref = cm::reference::naive_selective_scan(p, s, x);
  EXPECT_LE(cm::max_abs_diff<double>(y.values, ref), 1e-12);
}

TEST(SelectiveScan, RejectsMismatchedStreams) {
  const auto p = k::SsmParams<double>::stable_default(2, 4);
  k::SelectiveInputs<double> s(5, 2, 4);
  EXPECT_THROW(k::selective_scan(p, s, k::Sequence<double>(6, 2)), cm::InvalidArgument);
  s.delta.pop_back();
  EXPECT_THROW(k::selective_scan(p, s, k::Sequence<double>(5, 2)), cm::InvalidArgument);
}

TEST(SelectiveScan, ThreadCountDoesNotChangeBits) {
  cm::Rng rng(23);
  const auto p = cm::verify::random_ssm<double>(rng, 7, 16);
  const auto s = cm::verify::random_streams<double>(rng, 50, 7, 16);
  const auto x = cm::verify::random_sequence<double>(rng, 50, 7);
  const auto y1 = k::selective_scan(p, s, x);
  cm::set_num_threads(3);
  const auto y3 = k::selective_scan(p, s, x);
  cm::set_num_threads(1);
  EXPECT_EQ(y1.values, y3.values);
}

TEST(SelectiveScanBackward, ZeroCotangentGivesZeroGradients) {
  cm::Rng rng(29);
  const auto p = cm::verify::random_ssm<double>(rng, 2, 4);
  const auto s = cm::verify::random_streams<double>(rng, 8, 2, 4);
  const auto x = cm::verify::random_sequence<double>(rng, 8, 2);
  const auto g = k::selective_scan_backward(p, s, x, k::Sequence<double>(8, 2));
  for (const auto* v : {&g.dx, &g.ddelta, &g.dB, &g.dC, &g.dA, &g.dD})
    for (double e : *v) EXPECT_EQ(e, 0.0);
}

TEST(SelectiveScanBackward, SkipGradientIsInputCorrelation) {
  cm::Rng rng(31);
  const auto p = cm::verify::random_ssm<double>(rng, 3, 4);
  const auto s = cm::verify::random_streams<double>(rng, 12, 3, 4);
  const auto x = cm::verify::random_sequence<double>(rng, 12, 3);
  const auto dy = cm::verify::random_sequence<double>(rng, 12, 3);
  const auto g = k::selective_scan_backward(p, s, x, dy);
  for (std::size_t c = 0; c < 3; ++c) {
    double expect = 0;
    for (std::size_t t = 0; t < 12; ++t) expect += dy.at(t, c) * x.at(t, c);
    EXPECT_NEAR(g.dD[c], expect, 1e-14);
  }
}

TEST(SelectiveScanBackward, MatchesFiniteDifferences) {
  cm::Rng rng(37);
  for (int i = 0; i < 5; ++i) EXPECT_LE(cm::verify::gradient_check_error(rng, 16, 2, 4), 1e-6);
}

TEST(SelectiveScanBackward, RejectsShapeMismatch) {
  const auto p = k::SsmParams<double>::stable_default(2, 4);
  k::SelectiveInputs<double> s(5, 2, 4);
  std::fill(s.delta.begin(), s.delta.end(), 0.1);
  EXPECT_THROW(k::selective_scan_backward(p, s, k::Sequence<double>(5, 2), k::Sequence<double>(4, 2)),
               cm::InvalidArgument);
}

TEST(ScanFlops, ConventionAndLinearity) {
  EXPECT_EQ(k::scan_flops(100, 8, 16), 6u * 2u * 100u * 8u * 16u);
  EXPECT_EQ(k::scan_flops(2 * 2200, 192, 16), 2 * k::scan_flops(2200, 192, 16));
}
