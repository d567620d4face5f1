#include "sipov/fluid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "sipov/errors.hpp"
#include "sipov/metrics.hpp"
#include "sipov/server.hpp"
#include "sipov/sip.hpp"

namespace sipov {

std::pair<double, double> derivatives(const FluidState& s, const FluidRates& r) {
  for (double v : {r.lambda1, r.lambda2, r.r1, r.r2, r.r2_prime, r.nu1, r.nu2, r.mu1, r.mu2}) {
    if (!(v >= 0.0)) throw ParameterError("fluid rates must be non-negative");
  }
  double dq2 = r.lambda2 + r.r2 + r.nu2 - r.mu2;
  double dq1 = r.lambda1 + r.r1 + r.r2_prime + r.nu1 - r.mu1;
  if (s.q1 <= 0.0) dq1 = std::max(0.0, dq1);
  if (s.q2 <= 0.0) dq2 = std::max(0.0, dq2);
  return {dq1, dq2};
}

namespace {

void check_step(double dt, double t1) {
  if (!(dt > 0.0)) throw ParameterError("fluid step must be positive");
  if (dt > t1 / 10.0 * (1.0 + 1e-12)) throw ParameterError("fluid step must not exceed T1/10");
}

}  // namespace

std::vector<FluidPoint> integrate(FluidState state0, const RateFunction& rates, double dt,
                                  double t_end, double t1) {
  check_step(dt, t1);
  auto clamp = [](FluidState s) {
    s.q1 = std::max(0.0, s.q1);
    s.q2 = std::max(0.0, s.q2);
    return s;
  };
  auto f = [&](double t, const FluidState& s) { return derivatives(s, rates(t, s)); };

  std::vector<FluidPoint> out;
  FluidState s = clamp(state0);
  const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
  out.push_back({0.0, s.q1, s.q2, rates(0.0, s).r2_prime});
  for (std::size_t n = 0; n < steps; ++n) {
    const double t = static_cast<double>(n) * dt;
    const auto k1 = f(t, s);
    const auto k2 = f(t + dt / 2, clamp({s.q1 + dt / 2 * k1.first, s.q2 + dt / 2 * k1.second}));
    const auto k3 = f(t + dt / 2, clamp({s.q1 + dt / 2 * k2.first, s.q2 + dt / 2 * k2.second}));
    const auto k4 = f(t + dt, clamp({s.q1 + dt * k3.first, s.q2 + dt * k3.second}));
    s.q1 += dt / 6 * (k1.first + 2 * k2.first + 2 * k3.first + k4.first);
    s.q2 += dt / 6 * (k1.second + 2 * k2.second + 2 * k3.second + k4.second);
    s = clamp(s);
    const double tn = static_cast<double>(n + 1) * dt;
    out.push_back({tn, s.q1, s.q2, rates(tn, s).r2_prime});
  }
  return out;
}

double retransmission_rate_fluid(double t, const std::vector<double>& offsets,
                                 const std::function<double(double)>& send_rate,
                                 const std::function<bool(double, double)>& answered) {
  double r = 0.0;
  for (double o : offsets) {
    const double sent = t - o;
    if (sent < 0.0) continue;
    if (!answered(sent, t)) r += send_rate(sent);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Two-proxy tandem with per-class flow tracking.
//
// State is the cumulative arrival/departure curves A1, D1, A2, D2. Both
// queues are FIFO, so a message that arrived at tau leaves once D reaches
// A(tau); that gives the class mix of departures and lets the model decide
// when each request gets answered.

namespace {

enum Q1 { kInvO, kInvC, kTry, kRing, kOkI, kOkIC, kOkB, kP1C, kAck, kBye, kByeC, kN1 };
enum Q2 { kInvO2, kInvC2, kAck2, kBye2, kByeC2, kUTry, kURing, kUOk, kUOkC, kUOkB, kN2 };

using V1 = std::array<double, kN1>;
using V2 = std::array<double, kN2>;

struct Y {
  double a1 = 0, d1 = 0, a2 = 0, d2 = 0;
};

struct Eval {
  V1 a1{}, d1{};
  V2 a2{}, d2{};
  double in1 = 0, out1 = 0, in2 = 0, out2 = 0;
};

template <std::size_t N>
double sum(const std::array<double, N>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s;
}

class Tandem {
 public:
  Tandem(const ScenarioConfig& cfg, double dt)
      : cfg_(cfg), dt_(dt),
        hbh_(retransmission_schedule(TimerKind::HopByHop, cfg.t1, cfg.t2).offsets),
        e2e_(retransmission_schedule(TimerKind::EndToEnd, cfg.t1, cfg.t2).offsets) {
    std::vector<SlowdownWindow> w1, w2;
    for (const auto& sd : cfg.workload.slowdowns) {
      if (sd.server == "p1") w1.push_back(sd.window);
      if (sd.server == "p2") w2.push_back(sd.window);
    }
    mu1_ = CapacityProfile(cfg.mu_of("p1"), w1);
    mu2_ = CapacityProfile(cfg.mu_of("p2"), w2);
  }

  std::vector<FluidPoint> run();

 private:
  double lambda(double t) const {
    if (t < 0.0 || t >= cfg_.duration) return 0.0;
    for (const auto& s : cfg_.workload.segments) {
      if (t >= s.start && t < s.end) return s.rate;
    }
    return 0.0;
  }

  // Cumulative curve value at u <= t, extending the grid with the current point.
  double value(const std::vector<double>& grid, double u, double cur) const {
    if (u <= 0.0) return grid.front();
    const double last = static_cast<double>(grid.size() - 1) * dt_;
    if (u >= last) {
      if (t_ <= last) return grid.back();
      return grid.back() + (cur - grid.back()) * std::min(1.0, (u - last) / (t_ - last));
    }
    const double x = u / dt_;
    const auto i = static_cast<std::size_t>(x);
    const double w = x - static_cast<double>(i);
    return grid[i] + w * (grid[i + 1] - grid[i]);
  }

  // Earliest u with curve(u) >= x; +inf if not reached by t_.
  double inverse(const std::vector<double>& grid, double x, double cur) const {
    if (grid.front() >= x) return 0.0;
    const auto it = std::lower_bound(grid.begin(), grid.end(), x);
    const double last = static_cast<double>(grid.size() - 1) * dt_;
    if (it == grid.end()) {
      if (cur < x || t_ <= last) return std::numeric_limits<double>::infinity();
      return last + (t_ - last) * (x - grid.back()) / (cur - grid.back());
    }
    const auto i = static_cast<std::size_t>(it - grid.begin());
    const double lo = grid[i - 1];
    const double hi = grid[i];
    return (static_cast<double>(i - 1) + (hi > lo ? (x - lo) / (hi - lo) : 1.0)) * dt_;
  }

  template <std::size_t N>
  double rate(const std::vector<std::array<double, N>>& hist, double u, std::size_t c) const {
    if (u < 0.0 || hist.empty()) return 0.0;
    const double x = u / dt_;
    const auto i = static_cast<std::size_t>(x);
    if (i + 1 >= hist.size()) return hist.back()[c];
    const double w = x - static_cast<double>(i);
    return hist[i][c] + w * (hist[i + 1][c] - hist[i][c]);
  }

  template <std::size_t N>
  bool mix_at(const std::vector<std::array<double, N>>& hist, double tau, std::array<double, N>& mix) const {
    const double last = static_cast<double>(hist.size() - 1) * dt_;
    if (!(tau < last)) return false;
    double total = 0;
    for (std::size_t c = 0; c < N; ++c) {
      mix[c] = rate(hist, tau, c);
      total += mix[c];
    }
    if (!(total > 0)) return false;
    for (auto& m : mix) m /= total;
    return true;
  }

  // Pass through queue i entered at u: the instant it leaves, or +inf.
  double leave1(double u) const {
    const double x = value(A1_, u, y_.a1);
    return y_.d1 + 1e-9 >= x ? inverse(D1_, x, y_.d1) : std::numeric_limits<double>::infinity();
  }
  double leave2(double u) const {
    const double x = value(A2_, u, y_.a2);
    return y_.d2 + 1e-9 >= x ? inverse(D2_, x, y_.d2) : std::numeric_limits<double>::infinity();
  }

  bool ok_answered(double sent) const {  // Ok at the UAS, answered by the Ack
    double u = leave2(sent);   // Ok through P2
    if (u > t_) return false;
    u = leave1(u);             // Ok through P1, UAC acks at once
    if (u > t_) return false;
    u = leave1(u);             // Ack through P1
    if (u > t_) return false;
    return leave2(u) <= t_;    // Ack through P2
  }

  bool bye_answered(double sent) const {  // Bye at the UAC, answered by its Ok
    double u = leave1(sent);
    if (u > t_) return false;
    u = leave2(u);
    if (u > t_) return false;
    u = leave2(u);
    if (u > t_) return false;
    return leave1(u) <= t_;
  }

  Eval evaluate(double t, const Y& y, const Eval& guess);

  const ScenarioConfig& cfg_;
  double dt_;
  std::vector<double> hbh_;
  std::vector<double> e2e_;
  CapacityProfile mu1_;
  CapacityProfile mu2_;

  std::vector<double> A1_{0.0}, D1_{0.0}, A2_{0.0}, D2_{0.0};
  std::vector<V1> a1h_, d1h_;
  std::vector<V2> a2h_, d2h_;

  // point being evaluated
  double t_ = 0.0;
  Y y_;
};

Eval Tandem::evaluate(double t, const Y& y, const Eval& guess) {
  t_ = t;
  y_ = y;
  const bool red = cfg_.fluid_redundant_responses;

  const double lam = lambda(t);
  const double inv_copies = retransmission_rate_fluid(
      t, hbh_, [&](double s) { return lambda(s); },
      [&](double s, double) { return y.d1 + 1e-9 >= value(A1_, s, y.a1); });
  const double p1_copies = retransmission_rate_fluid(
      t, hbh_, [&](double s) { return rate(d1h_, s, kInvO); },
      [&](double s, double) { return y.d2 + 1e-9 >= value(A2_, s, y.a2); });
  const double bye = rate(d1h_, t - cfg_.hold, kOkI);
  const double bye_copies = retransmission_rate_fluid(
      t, e2e_, [&](double s) { return rate(d1h_, s - cfg_.hold, kOkI); },
      [&](double s, double) { return bye_answered(s); });
  const double ok_copies = retransmission_rate_fluid(
      t, e2e_, [&](double s) { return rate(d2h_, s, kInvO2); },
      [&](double s, double) { return ok_answered(s); });

  const double q1 = y.a1 - y.d1;
  const double q2 = y.a2 - y.d2;
  const double mu1 = mu1_.rate_at(t);
  const double mu2 = mu2_.rate_at(t);
  V1 hist1{};
  V2 hist2{};
  const bool busy1 = q1 > 1e-9 && mix_at(a1h_, inverse(A1_, y.d1, y.a1), hist1);
  const bool busy2 = q2 > 1e-9 && mix_at(a2h_, inverse(A2_, y.d2, y.a2), hist2);

  Eval e = guess;
  for (int it = 0; it < 8; ++it) {
    const double copy_trying = red ? e.d2[kInvC2] : 0.0;
    e.a1 = {lam,
            inv_copies,
            e.d2[kInvO2] + copy_trying,
            e.d2[kURing],
            e.d2[kUOk],
            e.d2[kUOkC],
            e.d2[kUOkB],
            p1_copies,
            e.d1[kOkI] + e.d1[kOkIC],
            bye,
            bye_copies};
    e.a2 = {e.d1[kInvO],
            e.d1[kP1C],
            e.d1[kAck],
            e.d1[kBye],
            e.d1[kByeC],
            e.d2[kInvO2],  // P2 absorbs Invite copies, so only originals reach the UAS
            e.d2[kInvO2],
            e.d2[kInvO2],
            ok_copies,
            e.d2[kBye2] + e.d2[kByeC2]};
    e.in1 = sum(e.a1);
    e.in2 = sum(e.a2);
    e.out1 = q1 > 1e-9 ? mu1 : std::min(e.in1, mu1);
    e.out2 = q2 > 1e-9 ? mu2 : std::min(e.in2, mu2);
    for (std::size_t c = 0; c < kN1; ++c) {
      const double frac = busy1 ? hist1[c] : (e.in1 > 0 ? e.a1[c] / e.in1 : 0.0);
      e.d1[c] = e.out1 * frac;
    }
    for (std::size_t c = 0; c < kN2; ++c) {
      const double frac = busy2 ? hist2[c] : (e.in2 > 0 ? e.a2[c] / e.in2 : 0.0);
      e.d2[c] = e.out2 * frac;
    }
  }
  return e;
}

std::vector<FluidPoint> Tandem::run() {
  const auto steps = static_cast<std::size_t>(std::llround(cfg_.duration / dt_));
  const auto every = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg_.sample / dt_)));
  Y y;
  Eval e = evaluate(0.0, y, Eval{});
  a1h_.push_back(e.a1);
  d1h_.push_back(e.d1);
  a2h_.push_back(e.a2);
  d2h_.push_back(e.d2);

  std::vector<FluidPoint> out;
  out.push_back({0.0, 0.0, 0.0, e.a1[kP1C]});
  auto deriv = [](const Eval& ev) { return Y{ev.in1, ev.out1, ev.in2, ev.out2}; };
  auto add = [](const Y& a, const Y& k, double h) {
    return Y{a.a1 + h * k.a1, a.d1 + h * k.d1, a.a2 + h * k.a2, a.d2 + h * k.d2};
  };
  for (std::size_t n = 0; n < steps; ++n) {
    const double t = static_cast<double>(n) * dt_;
    const Eval e1 = evaluate(t, y, e);
    const Y k1 = deriv(e1);
    const Eval e2 = evaluate(t + dt_ / 2, add(y, k1, dt_ / 2), e1);
    const Y k2 = deriv(e2);
    const Eval e3 = evaluate(t + dt_ / 2, add(y, k2, dt_ / 2), e2);
    const Y k3 = deriv(e3);
    const Eval e4 = evaluate(t + dt_, add(y, k3, dt_), e3);
    const Y k4 = deriv(e4);
    y.a1 += dt_ / 6 * (k1.a1 + 2 * k2.a1 + 2 * k3.a1 + k4.a1);
    y.d1 += dt_ / 6 * (k1.d1 + 2 * k2.d1 + 2 * k3.d1 + k4.d1);
    y.a2 += dt_ / 6 * (k1.a2 + 2 * k2.a2 + 2 * k3.a2 + k4.a2);
    y.d2 += dt_ / 6 * (k1.d2 + 2 * k2.d2 + 2 * k3.d2 + k4.d2);
    // Reflection at zero, and the curves stay monotone.
    y.d1 = std::clamp(y.d1, D1_.back(), y.a1);
    y.d2 = std::clamp(y.d2, D2_.back(), y.a2);

    const double tn = static_cast<double>(n + 1) * dt_;
    e = evaluate(tn, y, e4);
    A1_.push_back(y.a1);
    D1_.push_back(y.d1);
    A2_.push_back(y.a2);
    D2_.push_back(y.d2);
    a1h_.push_back(e.a1);
    d1h_.push_back(e.d1);
    a2h_.push_back(e.a2);
    d2h_.push_back(e.d2);
    if ((n + 1) % every == 0) out.push_back({tn, y.a1 - y.d1, y.a2 - y.d2, e.a1[kP1C]});
  }
  return out;
}

}  // namespace

std::vector<FluidPoint> run_fluid(const ScenarioConfig& cfg, double dt) {
  check_step(dt, cfg.t1);
  if (cfg.proxies != 2 || cfg.cluster != 0) {
    throw ParameterError("the fluid model covers a two-proxy tandem without a cluster");
  }
  Tandem model(cfg, dt);
  return model.run();
}

std::vector<FluidPoint> run_fluid(const ScenarioConfig& cfg) { return run_fluid(cfg, cfg.fluid_dt); }

void write_fluid_csv(std::ostream& os, const std::vector<FluidPoint>& points) {
  os << "t,q1,q2,r2_prime\n";
  for (const auto& p : points) {
    os << format_number(p.t) << ',' << format_number(p.q1) << ',' << format_number(p.q2) << ','
       << format_number(p.r2_prime) << '\n';
  }
}

}  // namespace sipov
