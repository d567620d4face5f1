#pragma once

// Overload-control decision functions. Each is pure over its state argument;
// the hosting server owns the state and calls these from event handlers.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <utility>

#include "sipov/sip.hpp"

namespace sipov {

enum class Verdict : std::uint8_t { Accept, Reject, Forward, Hold };

std::string_view to_string(Verdict v);

// ---------------------------------------------------------------------------
// Local rejection

struct BangBangState {
  enum class Mode : std::uint8_t { Underload, Overload };
  Mode mode = Mode::Underload;
  double high_threshold = 0.0;
  double low_threshold = 0.0;
};

/// Two-threshold hysteresis on the message queue. In Overload only new
/// INVITEs are rejected; everything else is accepted.
Verdict bangbang_decide(BangBangState& state, std::size_t queue_size, MessageKind kind,
                        bool new_call = true);

/// p' = clamp(p + gain * (rho_meas - rho_target), 0, 1).
double occupancy_update(double p, double rho_measured, double rho_target, double gain);

// ---------------------------------------------------------------------------
// Priority enqueueing

enum class PriorityClass : std::uint8_t { High, Low };

struct PriorityThresholds {
  double low = 0.0;
  double high = 0.0;
};

/// INVITEs go to the low-priority queue, every other kind to the high one.
PriorityClass priority_class(MessageKind kind);

/// Rejection probability for a new INVITE given the low-queue size: 0 below
/// `low`, rising linearly across [low, high), 1 at or above `high`.
double priority_reject_probability(std::size_t low_queue_size, const PriorityThresholds& th);

void validate(const PriorityThresholds& th);

// ---------------------------------------------------------------------------
// Window-based admission at the edge proxy

struct WindowState {
  int window = 0;
  int outstanding = 0;
};

enum class WindowEvent : std::uint8_t { NewCall, CallAnswered };

/// NewCall forwards iff outstanding < window. CallAnswered releases one slot
/// and throws ConsistencyError on underflow.
Verdict window_decide(WindowState& state, WindowEvent event);

// ---------------------------------------------------------------------------
// Push-back rate targets

/// lambda * rho_target / rho_meas clamped to [0, max_rate]; max_rate if rho_meas is 0.
double rate_target_from_occupancy(double lambda_measured, double rho_measured, double rho_target,
                                  double max_rate);

/// lambda * d_target / d_meas clamped to [0, max_rate]; max_rate if d_meas is 0.
double rate_target_from_delay(double lambda_measured, double delay_measured, double delay_target,
                              double max_rate);

/// Time for the server to drain its queue to `q_target` at rate `mu`.
double retry_after_duration(double queue_size, double q_target, double mu);

/// Token bucket that thins new calls to a target rate.
class RateLimiter {
 public:
  explicit RateLimiter(double rate = 0.0, double burst = 1.0) : rate_(rate), burst_(burst), tokens_(burst) {}

  void set_rate(double rate, double now);
  double rate() const { return rate_; }
  /// Takes a token if one is available at `now`.
  bool admit(double now);

 private:
  void refill(double now);

  double rate_;
  double burst_;
  double tokens_;
  double last_ = 0.0;
};

// ---------------------------------------------------------------------------
// Retransmission-rate control

struct RtqcConfig {
  double q_rmin = 0.0;
  double q_rmax = 1.0;
  double p_min = 0.2;
  /// Weight of the newest sample in the averaged departure rate that tunes
  /// the thresholds.
  double tuning_gain = 0.25;
};

void validate(const RtqcConfig& cfg);

/// 1 up to q_rmin, p_min from q_rmax on, linear in between.
double rtqc_probability(double timer_queue_size, const RtqcConfig& cfg);

/// q_rmin' = rate * T1, q_rmax' = rate * horizon.
std::pair<double, double> rtqc_tune_thresholds(double avg_departure_rate, const RtqcConfig& cfg,
                                               double t1, double horizon);

struct PiControllerState {
  double setpoint = 0.0;
  double kp = 0.1;
  double ki = 0.05;
  double integral = 0.0;  // accumulated Ki * e * dt
  double lower = 0.2;
  double upper = 1.0;
  double output = 1.0;
  double last_error = 0.0;
  bool saturated = false;
  std::size_t flagged_samples = 0;  // non-finite measurements held over
};

/// Incremental PI step: output += Kp*(e - e_prev) + Ki*e*dt with
/// e = setpoint - measurement, clamped to [lower, upper]. The integral is
/// frozen while the output sits at a bound.
double pi_update(PiControllerState& ctrl, double measurement, double dt);

struct DelaySample {
  double sent;
  double answered;
};

struct DelayEstimate {
  std::optional<double> value;
  std::size_t discarded = 0;
};

/// EWMA of (answered - sent) over `samples`, starting from `prev`; the first
/// sample seeds an empty estimate.
DelayEstimate estimate_round_trip_delay(std::span<const DelaySample> samples, double alpha,
                                        std::optional<double> prev);

}  // namespace sipov
