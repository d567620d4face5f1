#pragma once

// Fluid approximation of a two-proxy tandem. q2 is fed by forwarded
// requests, retransmissions and responses; q1 additionally receives the
// retransmissions that P1 itself generates for requests stuck at P2.

#include <functional>
#include <ostream>
#include <utility>
#include <vector>

#include "sipov/scenario.hpp"

namespace sipov {

struct FluidState {
  double q1 = 0.0;
  double q2 = 0.0;
};

/// Instantaneous rates in messages/second.
struct FluidRates {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
  double r2_prime = 0.0;
  double nu1 = 0.0;
  double nu2 = 0.0;
  double mu1 = 0.0;
  double mu2 = 0.0;
};

/// (dq1/dt, dq2/dt), reflected at zero: an empty queue never drains below 0.
std::pair<double, double> derivatives(const FluidState& state, const FluidRates& rates);

using RateFunction = std::function<FluidRates(double t, const FluidState& state)>;

struct FluidPoint {
  double t = 0.0;
  double q1 = 0.0;
  double q2 = 0.0;
  double r2_prime = 0.0;
};

/// Fixed-step RK4 from t = 0. Requires 0 < dt <= t1 / 10.
std::vector<FluidPoint> integrate(FluidState state0, const RateFunction& rates, double dt,
                                  double t_end, double t1);

/// Delayed copies of unanswered sends: sum over offsets o of
/// send_rate(t - o) when the message sent at t - o is still unanswered at t.
/// Sends before time 0 contribute nothing.
double retransmission_rate_fluid(double t, const std::vector<double>& offsets,
                                 const std::function<double(double)>& send_rate,
                                 const std::function<bool(double sent, double now)>& answered);

/// Integrates the tandem described by `cfg` (2 proxies, call-level workload,
/// slowdown windows) with cfg.fluid_dt, sampled every cfg.sample seconds.
std::vector<FluidPoint> run_fluid(const ScenarioConfig& cfg);

/// Same, with an explicit step.
std::vector<FluidPoint> run_fluid(const ScenarioConfig& cfg, double dt);

void write_fluid_csv(std::ostream& os, const std::vector<FluidPoint>& points);

}  // namespace sipov
