#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "sipov/errors.hpp"
#include "sipov/fluid.hpp"
#include "sipov/random.hpp"
#include "sipov/scenario.hpp"
#include "sipov/sip.hpp"

using namespace sipov;

TEST(FluidDerivatives, Substitution) {
  FluidRates r;
  r.lambda2 = 400;
  r.nu2 = 100;
  r.mu2 = 300;
  EXPECT_DOUBLE_EQ(derivatives({5, 5}, r).second, 200.0);
}

TEST(FluidDerivatives, ReflectionAtZero) {
  FluidRates r;
  r.lambda2 = 100;
  r.mu2 = 300;
  EXPECT_EQ(derivatives({0, 0}, r).second, 0.0);
  EXPECT_EQ(derivatives({0, 10}, r).second, -200.0);
}

TEST(FluidDerivatives, Equilibrium) {
  FluidRates r{100, 200, 10, 20, 5, 30, 40, 145, 260};
  const auto [d1, d2] = derivatives({3, 3}, r);
  EXPECT_DOUBLE_EQ(d1, 0.0);
  EXPECT_DOUBLE_EQ(d2, 0.0);
}

TEST(FluidDerivatives, NegativeRate) {
  FluidRates r;
  r.nu1 = -1;
  EXPECT_THROW(derivatives({0, 0}, r), ParameterError);
}

TEST(FluidIntegrate, LinearGrowth) {
  FluidRates r;
  r.lambda2 = 200;
  const auto traj = integrate({0, 0}, [&](double, const FluidState&) { return r; }, 0.01, 1.0, 0.5);
  EXPECT_NEAR(traj.back().t, 1.0, 1e-12);
  EXPECT_NEAR(traj.back().q2, 200.0, 1e-6);
  EXPECT_EQ(traj.back().q1, 0.0);
}

TEST(FluidIntegrate, EquilibriumIsFlat) {
  FluidRates r{100, 100, 0, 0, 0, 0, 0, 100, 100};
  const auto traj = integrate({7, 9}, [&](double, const FluidState&) { return r; }, 0.05, 10.0, 0.5);
  for (const auto& p : traj) {
    EXPECT_DOUBLE_EQ(p.q1, 7.0);
    EXPECT_DOUBLE_EQ(p.q2, 9.0);
  }
}

TEST(FluidIntegrate, StepTooLarge) {
  auto r = [](double, const FluidState&) { return FluidRates{}; };
  EXPECT_THROW(integrate({}, r, 0.06, 1.0, 0.5), ParameterError);
  EXPECT_THROW(integrate({}, r, 0.0, 1.0, 0.5), ParameterError);
  EXPECT_NO_THROW(integrate({}, r, 0.05, 1.0, 0.5));
}

TEST(FluidIntegrate, NeverNegative) {
  Substream rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = rng.uniform() * 500, b = rng.uniform() * 500, w = 0.5 + rng.uniform() * 5;
    auto r = [&](double t, const FluidState&) {
      FluidRates x;
      x.lambda1 = a * (1 + std::sin(w * t));
      x.lambda2 = b * (1 + std::cos(w * t));
      x.mu1 = 300;
      x.mu2 = 300;
      return x;
    };
    for (const auto& p : integrate({rng.uniform() * 10, 0}, r, 0.01, 10.0, 0.5)) {
      ASSERT_GE(p.q1, 0.0);
      ASSERT_GE(p.q2, 0.0);
    }
  }
}

TEST(FluidRetransmissions, NothingBeforeFirstOffset) {
  const auto offs = retransmission_schedule(TimerKind::HopByHop, 0.5, 4.0).offsets;
  auto rate = [](double) { return 100.0; };
  auto fast = [](double sent, double now) { return now - sent >= 0.01; };
  for (double t = 0; t < 40; t += 0.1) EXPECT_EQ(retransmission_rate_fluid(t, offs, rate, fast), 0.0);
  auto never = [](double, double) { return false; };
  EXPECT_EQ(retransmission_rate_fluid(0.4, offs, rate, never), 0.0);
  EXPECT_EQ(retransmission_rate_fluid(0.5, offs, rate, never), 100.0);
  EXPECT_EQ(retransmission_rate_fluid(1.6, offs, rate, never), 200.0);
}

TEST(FluidRetransmissions, OnsetNoEarlierThanT1AfterOverload) {
  const double t0 = 30.0;
  const auto offs = retransmission_schedule(TimerKind::HopByHop, 0.5, 4.0).offsets;
  auto rate = [](double) { return 100.0; };
  // Sojourn grows linearly after t0 and reaches T1 at t0 + 2.
  auto answered = [&](double sent, double now) {
    const double sojourn = sent < t0 ? 0.01 : 0.01 + 0.25 * (sent - t0);
    return sent + sojourn <= now;
  };
  double first = -1;
  for (double t = 0; t < 64; t += 0.01) {
    if (retransmission_rate_fluid(t, offs, rate, answered) > 0) {
      first = t;
      break;
    }
  }
  ASSERT_GT(first, 0);
  EXPECT_GE(first, t0 + 0.5);
}

TEST(FluidTandem, PropagationOrder) {
  auto cfg = parse_scenario(
      "topology.proxies = 2\nserver.mu = 2000\nlink.loss = 0\n"
      "workload.segments = 0:64:228.5714285714286\nworkload.slowdown = p2:30:90:0.5\n"
      "run.duration = 64\nrun.seed = 1\nrun.sample = 0.2\nfluid.dt = 0.005\n");
  const auto pts = run_fluid(cfg);
  double q2_at_29 = 0, q2_end = 0, q1_pre = 0, q1_end = 0;
  for (const auto& p : pts) {
    if (std::fabs(p.t - 29.0) < 1e-9) { q2_at_29 = p.q2; q1_pre = p.q1; }
    q2_end = p.q2;
    q1_end = p.q1;
  }
  EXPECT_LT(q2_at_29, 1.0);
  EXPECT_LT(q1_pre, 1.0);
  EXPECT_GT(q2_end, 1000.0);
  EXPECT_GT(q1_end, 10.0);
  double first_r = -1;
  for (const auto& p : pts)
    if (p.r2_prime > 0) { first_r = p.t; break; }
  EXPECT_GE(first_r, 30.5);
}

TEST(FluidTandem, CsvHeader) {
  std::ostringstream os;
  write_fluid_csv(os, {{0, 1, 2, 3}});
  EXPECT_EQ(os.str().substr(0, 17), "t,q1,q2,r2_prime\n");
}
