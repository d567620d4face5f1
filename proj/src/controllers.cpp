#include "sipov/controllers.hpp"

#include <algorithm>
#include <cmath>

#include "sipov/errors.hpp"

namespace sipov {

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Accept: return "Accept";
    case Verdict::Reject: return "Reject";
    case Verdict::Forward: return "Forward";
    case Verdict::Hold: return "Hold";
  }
  return "?";
}

Verdict bangbang_decide(BangBangState& state, std::size_t queue_size, MessageKind kind,
                        bool new_call) {
  if (!(state.low_threshold < state.high_threshold)) {
    throw ParameterError("bang-bang low threshold must be below the high threshold");
  }
  const double q = static_cast<double>(queue_size);
  if (state.mode == BangBangState::Mode::Underload && q > state.high_threshold) {
    state.mode = BangBangState::Mode::Overload;
  } else if (state.mode == BangBangState::Mode::Overload && q < state.low_threshold) {
    state.mode = BangBangState::Mode::Underload;
  }
  if (state.mode == BangBangState::Mode::Overload && kind == MessageKind::Invite && new_call) {
    return Verdict::Reject;
  }
  return Verdict::Accept;
}

double occupancy_update(double p, double rho_measured, double rho_target, double gain) {
  if (!(gain > 0.0)) throw ParameterError("occupancy gain must be positive");
  return std::clamp(p + gain * (rho_measured - rho_target), 0.0, 1.0);
}

PriorityClass priority_class(MessageKind kind) {
  return kind == MessageKind::Invite ? PriorityClass::Low : PriorityClass::High;
}

void validate(const PriorityThresholds& th) {
  if (!(th.low >= 0.0) || !(th.low < th.high)) {
    throw ParameterError("priority thresholds need 0 <= th_low < th_high");
  }
}

double priority_reject_probability(std::size_t low_queue_size, const PriorityThresholds& th) {
  validate(th);
  const double q = static_cast<double>(low_queue_size);
  if (q < th.low) return 0.0;
  if (q >= th.high) return 1.0;
  return (q - th.low) / (th.high - th.low);
}

Verdict window_decide(WindowState& state, WindowEvent event) {
  if (state.window < 0) throw ParameterError("window size must be >= 0");
  if (event == WindowEvent::NewCall) {
    if (state.outstanding < state.window) {
      ++state.outstanding;
      return Verdict::Forward;
    }
    return Verdict::Reject;
  }
  if (state.outstanding <= 0) throw ConsistencyError("window released below zero");
  --state.outstanding;
  return Verdict::Accept;
}

namespace {

double clamp_rate(double r, double max_rate) { return std::clamp(r, 0.0, max_rate); }

}  // namespace

double rate_target_from_occupancy(double lambda_measured, double rho_measured, double rho_target,
                                  double max_rate) {
  if (rho_measured <= 0.0) return max_rate;
  return clamp_rate(lambda_measured * rho_target / rho_measured, max_rate);
}

double rate_target_from_delay(double lambda_measured, double delay_measured, double delay_target,
                              double max_rate) {
  if (delay_measured <= 0.0) return max_rate;
  return clamp_rate(lambda_measured * delay_target / delay_measured, max_rate);
}

double retry_after_duration(double queue_size, double q_target, double mu) {
  if (!(mu > 0.0)) throw ParameterError("service rate must be positive");
  return std::max(0.0, (queue_size - q_target) / mu);
}

void RateLimiter::refill(double now) {
  if (now > last_) {
    tokens_ = std::min(burst_, tokens_ + (now - last_) * rate_);
    last_ = now;
  }
}

void RateLimiter::set_rate(double rate, double now) {
  refill(now);
  rate_ = std::max(0.0, rate);
}

bool RateLimiter::admit(double now) {
  refill(now);
  if (tokens_ >= 1.0) {
    tokens_ -= 1.0;
    return true;
  }
  return false;
}

void validate(const RtqcConfig& cfg) {
  if (!(cfg.p_min > 0.0 && cfg.p_min <= 1.0)) throw ParameterError("p_min must lie in (0, 1]");
  if (!(cfg.q_rmin >= 0.0) || !(cfg.q_rmin <= cfg.q_rmax)) {
    throw ParameterError("RTQC thresholds need 0 <= q_rmin <= q_rmax");
  }
  if (!(cfg.tuning_gain > 0.0 && cfg.tuning_gain <= 1.0)) {
    throw ParameterError("RTQC tuning gain must lie in (0, 1]");
  }
}

double rtqc_probability(double timer_queue_size, const RtqcConfig& cfg) {
  if (timer_queue_size <= cfg.q_rmin) return 1.0;
  if (timer_queue_size >= cfg.q_rmax) return cfg.p_min;
  const double frac = (timer_queue_size - cfg.q_rmin) / (cfg.q_rmax - cfg.q_rmin);
  return 1.0 - frac * (1.0 - cfg.p_min);
}

std::pair<double, double> rtqc_tune_thresholds(double avg_departure_rate, const RtqcConfig& cfg,
                                               double t1, double horizon) {
  (void)cfg;
  if (!(avg_departure_rate >= 0.0)) throw ParameterError("departure rate must be >= 0");
  return {avg_departure_rate * t1, avg_departure_rate * horizon};
}

double pi_update(PiControllerState& ctrl, double measurement, double dt) {
  if (!(dt > 0.0)) throw ParameterError("PI step must be positive");
  if (!std::isfinite(measurement)) {
    ++ctrl.flagged_samples;
    return ctrl.output;
  }
  const double error = ctrl.setpoint - measurement;
  const double integral_step = ctrl.ki * error * dt;
  const double candidate = ctrl.output + ctrl.kp * (error - ctrl.last_error) + integral_step;
  const double clamped = std::clamp(candidate, ctrl.lower, ctrl.upper);
  ctrl.saturated = clamped != candidate;
  if (!ctrl.saturated) ctrl.integral += integral_step;
  ctrl.output = clamped;
  ctrl.last_error = error;
  return ctrl.output;
}

DelayEstimate estimate_round_trip_delay(std::span<const DelaySample> samples, double alpha,
                                        std::optional<double> prev) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ParameterError("alpha must lie in (0, 1]");
  DelayEstimate est{prev, 0};
  for (const auto& s : samples) {
    const double d = s.answered - s.sent;
    if (d < 0.0 || !std::isfinite(d)) {
      ++est.discarded;
      continue;
    }
    est.value = est.value ? (1.0 - alpha) * *est.value + alpha * d : d;
  }
  return est;
}

}  // namespace sipov
