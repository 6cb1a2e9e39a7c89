#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "lnn/error.hpp"
#include "lnn/ltc_cell.hpp"
#include "lnn/ncp_wiring.hpp"
#include "lnn/rng.hpp"

namespace lnn {
namespace {

LiquidCellParams dense_cell(std::size_t n, std::size_t inputs, std::uint64_t seed) {
  Rng rng(seed);
  LiquidCellParams p = LiquidCellParams::zeros(n, inputs);
  for (std::size_t i = 0; i < n; ++i) {
    p.tau[i] = rng.uniform(0.5, 2.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      p.mask_rec(i, j) = 1.0;
      p.w_rec(i, j) = rng.uniform(0.01, 0.5);
      p.gamma_rec(i, j) = rng.uniform(0.5, 1.5);
      p.mu_rec(i, j) = rng.uniform(-0.3, 0.3);
      p.a_rec(i, j) = rng.uniform(-1.0, 1.0);
    }
    for (std::size_t k = 0; k < inputs; ++k) {
      p.mask_in(i, k) = 1.0;
      p.w_in(i, k) = rng.uniform(0.01, 0.5);
      p.gamma_in(i, k) = rng.uniform(0.5, 1.5);
      p.mu_in(i, k) = rng.uniform(-0.3, 0.3);
      p.a_in(i, k) = rng.uniform(-1.0, 1.0);
    }
  }
  return p;
}

LiquidCellParams leak_only(std::size_t n, double tau) {
  LiquidCellParams p = LiquidCellParams::zeros(n, 1);
  p.tau.fill(tau);
  return p;
}

double max_gap(const LiquidState& a, const LiquidState& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a.x[i] - b.x[i]));
  return m;
}

TEST(SynapticDrive, ZeroWeightsGiveZeroDrive) {
  LiquidCellParams p = dense_cell(5, 2, 3);
  p.w_rec.fill(0.0);
  p.w_in.fill(0.0);
  const std::vector<double> u = {0.4, -1.0};
  const SynapticDrive d = synaptic_drive(LiquidState{{0.1, 0.2, 0.3, 0.4, 0.5}}, u, p);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(d.s[i], 0.0);
    EXPECT_EQ(d.g[i], 0.0);
  }
}

TEST(SynapticDrive, SingleSynapseAtSigmoidMidpoint) {
  LiquidCellParams p = LiquidCellParams::zeros(2, 1);
  p.tau.fill(1.0);
  p.mask_rec(0, 1) = 1.0;
  p.w_rec(0, 1) = 2.0;
  p.a_rec(0, 1) = 1.0;
  for (double x : {-3.0, 0.0, 7.5}) {
    const std::vector<double> u = {0.0};
    const SynapticDrive d = synaptic_drive(LiquidState{{0.0, x}}, u, p);
    EXPECT_DOUBLE_EQ(d.s[0], 1.0);
    EXPECT_DOUBLE_EQ(d.g[0], 1.0);
    EXPECT_EQ(d.s[1], 0.0);
  }
}

TEST(SynapticDrive, MatchesDoubleLoopOracle) {
  const LiquidCellParams p = dense_cell(8, 3, 11);
  Rng rng(12);
  LiquidState x{std::vector<double>(8)};
  for (double& v : x.x) v = rng.uniform(-1.0, 1.0);
  const std::vector<double> u = {0.3, -0.7, 1.2};
  const SynapticDrive d = synaptic_drive(x, u, p);
  for (std::size_t i = 0; i < 8; ++i) {
    double s = 0.0, g = 0.0;
    for (std::size_t j = 0; j < 8; ++j) {
      const double f = p.mask_rec(i, j) * p.w_rec(i, j) /
                       (1.0 + std::exp(-(p.gamma_rec(i, j) * x.x[j] + p.mu_rec(i, j))));
      s += f;
      g += f * p.a_rec(i, j);
    }
    for (std::size_t k = 0; k < 3; ++k) {
      const double f = p.mask_in(i, k) * p.w_in(i, k) /
                       (1.0 + std::exp(-(p.gamma_in(i, k) * u[k] + p.mu_in(i, k))));
      s += f;
      g += f * p.a_in(i, k);
    }
    EXPECT_NEAR(d.s[i], s, 1e-12);
    EXPECT_NEAR(d.g[i], g, 1e-12);
  }
}

TEST(SynapticDrive, RejectsBadShapesAndNonFiniteInput) {
  const LiquidCellParams p = dense_cell(4, 2, 1);
  const std::vector<double> short_u = {0.0};
  EXPECT_THROW(synaptic_drive(LiquidState{std::vector<double>(4)}, short_u, p), DimensionError);
  const std::vector<double> u = {0.0, 0.0};
  EXPECT_THROW(synaptic_drive(LiquidState{std::vector<double>(3)}, u, p), DimensionError);
  const std::vector<double> nan_u = {0.0, std::nan("")};
  EXPECT_THROW(synaptic_drive(LiquidState{std::vector<double>(4)}, nan_u, p), NumericError);
}

TEST(FusedStep, PureLeak) {
  const LiquidCellParams p = leak_only(1, 1.0);
  const std::vector<double> u = {0.0};
  EXPECT_DOUBLE_EQ(fused_step(LiquidState{{1.0}}, u, p, 0.1).x[0], 1.0 / 1.1);
  EXPECT_EQ(fused_step(LiquidState{{0.0}}, u, p, 0.1).x[0], 0.0);
}

TEST(FusedStep, RejectsNonPositiveStep) {
  const LiquidCellParams p = leak_only(2, 1.0);
  const std::vector<double> u = {0.0};
  EXPECT_THROW(fused_step(LiquidState{{0.0, 0.0}}, u, p, 0.0), ParameterError);
  EXPECT_THROW(fused_step(LiquidState{{0.0, 0.0}}, u, p, -0.1), ParameterError);
  EXPECT_THROW(reference_step_rk4(LiquidState{{0.0, 0.0}}, u, p, 0.0), ParameterError);
}

TEST(FusedStep, StaysWithinStateAndReversalBound) {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(9);
    const LiquidCellParams p = dense_cell(n, 2, 1000 + static_cast<std::uint64_t>(trial));
    LiquidState x{std::vector<double>(n)};
    for (double& v : x.x) v = rng.uniform(-3.0, 3.0);
    const std::vector<double> u = {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
    const double dt = rng.uniform(0.001, 2.0);
    const LiquidState next = fused_step(x, u, p, dt);
    for (std::size_t i = 0; i < n; ++i) {
      double bound = std::fabs(x.x[i]);
      for (std::size_t j = 0; j < n; ++j) {
        if (p.mask_rec(i, j) != 0.0) bound = std::max(bound, std::fabs(p.a_rec(i, j)));
      }
      for (std::size_t k = 0; k < 2; ++k) {
        if (p.mask_in(i, k) != 0.0) bound = std::max(bound, std::fabs(p.a_in(i, k)));
      }
      EXPECT_LE(std::fabs(next.x[i]), bound);
    }
  }
}

TEST(ReferenceStep, MatchesClosedFormLeak) {
  const LiquidCellParams p = leak_only(1, 1.0);
  const std::vector<double> u = {0.0};
  EXPECT_NEAR(reference_step_rk4(LiquidState{{1.0}}, u, p, 0.1).x[0], std::exp(-0.1), 1e-6);
  EXPECT_EQ(reference_step_rk4(LiquidState{{0.0}}, u, p, 0.1).x[0], 0.0);
}

TEST(ReferenceStep, SelfConvergesUnderHalvedStep) {
  const LiquidCellParams p = dense_cell(8, 2, 5);
  const std::vector<double> u = {0.5, -0.2};
  LiquidState coarse{std::vector<double>(8, 0.1)};
  LiquidState fine = coarse;
  for (int i = 0; i < 1000; ++i) coarse = reference_step_rk4(coarse, u, p, 1e-3);
  for (int i = 0; i < 2000; ++i) fine = reference_step_rk4(fine, u, p, 5e-4);
  EXPECT_LE(max_gap(coarse, fine), 1e-9);
}

// Global error of the fused step against RK4 after a fixed horizon.
double fused_gap(const LiquidCellParams& p, const std::vector<double>& u, double dt,
                 std::size_t steps) {
  LiquidState a{std::vector<double>(p.n_neurons, 0.2)};
  LiquidState b = a;
  for (std::size_t i = 0; i < steps; ++i) {
    a = fused_step(a, u, p, dt);
    b = reference_step_rk4(b, u, p, dt);
  }
  return max_gap(a, b);
}

TEST(FusedStep, FirstOrderAgainstRk4) {
  const LiquidCellParams p = dense_cell(8, 2, 21);
  const std::vector<double> u = {0.8, -0.4};
  const double gap = fused_gap(p, u, 0.01, 100);
  const double half = fused_gap(p, u, 0.005, 200);
  EXPECT_LE(gap, 0.05);
  EXPECT_GE(gap / half, 1.5);
  EXPECT_LE(gap / half, 3.0);
}

TEST(Unfold, SingleStepMatchesFusedStep) {
  const LiquidCellParams p = dense_cell(4, 2, 8);
  const std::vector<std::vector<double>> seq = {{0.1, 0.9}};
  const LiquidState x0{{0.1, -0.1, 0.2, 0.0}};
  const Trajectory t = unfold(x0, seq, p, 0.1, 1);
  ASSERT_EQ(t.states.size(), 1u);
  EXPECT_EQ(t.final_state, fused_step(x0, seq[0], p, 0.1));
}

TEST(Unfold, TrajectoryLengthAndLeakDecay) {
  const LiquidCellParams p = leak_only(3, 0.7);
  const std::vector<std::vector<double>> seq(4, std::vector<double>{0.0});
  const Trajectory t = unfold(LiquidState{{1.0, -2.0, 0.5}}, seq, p, 0.1, 3);
  ASSERT_EQ(t.states.size(), 12u);
  double prev = 1e300;
  for (const LiquidState& s : t.states) {
    double norm = 0.0;
    for (double v : s.x) norm += v * v;
    EXPECT_LT(norm, prev);
    prev = norm;
  }
  EXPECT_THROW(unfold(LiquidState{{0.0, 0.0, 0.0}}, {}, p, 0.1, 1), ParameterError);
}

TEST(Unfold, NcpCellStaysBoundedAlongTrajectory) {
  WiringSpec spec;
  spec.n_sensory = 16;
  spec.n_inter = 8;
  spec.n_command = 7;
  spec.n_motor = 4;
  spec.fanout_sensory = 3;
  spec.fanout_inter = 2;
  spec.recurrent_command = 4;
  const WiringMasks m = masks(build_ncp(spec));
  Rng rng(4);
  const LiquidCellParams p = init_liquid_params(m, rng);
  ASSERT_EQ(p.n_neurons, 19u);
  std::vector<double> feature(16);
  for (double& v : feature) v = rng.uniform(0.0, 2.0);
  const Trajectory t = unfold(LiquidState{std::vector<double>(19)}, {feature}, p, 0.1, 6);
  LiquidState prev{std::vector<double>(19)};
  for (const LiquidState& s : t.states) {
    for (std::size_t i = 0; i < 19; ++i) {
      double bound = std::fabs(prev.x[i]);
      for (std::size_t j = 0; j < 19; ++j) {
        if (p.mask_rec(i, j) != 0.0) bound = std::max(bound, std::fabs(p.a_rec(i, j)));
      }
      for (std::size_t k = 0; k < 16; ++k) {
        if (p.mask_in(i, k) != 0.0) bound = std::max(bound, std::fabs(p.a_in(i, k)));
      }
      EXPECT_LE(std::fabs(s.x[i]), bound);
    }
    prev = s;
  }
}

TEST(InitLiquidParams, RespectsRangesMasksAndPolarity) {
  WiringSpec spec;
  const Wiring w = build_ncp(spec);
  const WiringMasks m = masks(w);
  Rng rng(9);
  const LiquidInit init;
  const LiquidCellParams p = init_liquid_params(m, rng, init);
  EXPECT_NO_THROW(p.validate());
  for (std::size_t i = 0; i < p.n_neurons; ++i) {
    EXPECT_GE(p.tau[i], init.tau_lo);
    EXPECT_LE(p.tau[i], init.tau_hi);
    for (std::size_t j = 0; j < p.n_neurons; ++j) {
      if (m.mask_rec(i, j) == 0.0) {
        EXPECT_EQ(p.w_rec(i, j), 0.0);
        continue;
      }
      EXPECT_GE(p.w_rec(i, j), init.w_lo);
      EXPECT_LE(p.w_rec(i, j), init.w_hi);
      EXPECT_EQ(p.a_rec(i, j) > 0.0, m.sign_rec(i, j) > 0.0);
      EXPECT_GE(std::fabs(p.a_rec(i, j)), init.a_lo);
      EXPECT_LE(std::fabs(p.a_rec(i, j)), init.a_hi);
    }
  }
}

TEST(InitLiquidParams, RejectsEmptyRanges) {
  LiquidInit bad;
  bad.tau_lo = 0.0;
  EXPECT_THROW(bad.validate(), ParameterError);
  bad = LiquidInit{};
  bad.w_lo = 1.0;
  bad.w_hi = 0.5;
  EXPECT_THROW(bad.validate(), ParameterError);
}

TEST(LiquidCellParams, ProjectClampsWeightsAndTau) {
  LiquidCellParams p = dense_cell(3, 1, 2);
  p.w_rec(0, 1) = -0.2;
  p.tau[2] = 0.001;
  p.project(0.05);
  EXPECT_EQ(p.w_rec(0, 1), 0.0);
  EXPECT_EQ(p.tau[2], 0.05);
  EXPECT_NO_THROW(p.validate());
}

}  // namespace
}  // namespace lnn
