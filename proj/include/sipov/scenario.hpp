#pragma once

// Scenario documents: line-oriented `key = value` with dotted section keys.
// Unknown keys, duplicates and constraint violations are errors naming the key.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sipov/balancer.hpp"
#include "sipov/controllers.hpp"
#include "sipov/server.hpp"
#include "sipov/workload.hpp"

namespace sipov {

enum class ControllerName : std::uint8_t {
  None,
  BangBang,
  Occupancy,
  Priority,
  Window,
  RetryAfter,
  RateOccupancy,
  RateDelay,
  Rtqc,
  Rrrc,
  Rtdc,
};

std::string_view to_string(ControllerName n);
std::optional<ControllerName> controller_from_string(std::string_view s);

/// True for the controllers that gate retransmissions at every timer owner.
constexpr bool is_retransmission_control(ControllerName n) {
  return n == ControllerName::Rtqc || n == ControllerName::Rrrc || n == ControllerName::Rtdc;
}

enum class RatioDenominator : std::uint8_t { Retransmissions, Messages };

struct ControllerConfig {
  ControllerName name = ControllerName::None;
  std::string server;  // host; empty = last proxy (edge proxy for window)
  double tick = 0.0;   // 0 = T1

  // bang-bang and retry-after
  double high = 200.0;
  double low = 100.0;
  double q_target = 50.0;

  // occupancy and occupancy-derived rate targets
  double rho_target = 0.8;
  double gain = 0.5;
  double meter_window = 1.0;

  // priority
  bool thresholds = true;
  double th_low = 100.0;
  double th_high = 300.0;

  // window
  int window = 20;

  // delay-derived rate targets and RTDC
  double d_target = 0.2;

  // RTQC
  double p_min = 0.2;
  double horizon = 0.0;  // 0 = 64 * T1
  double tuning_gain = 0.25;

  // RRRC / RTDC
  double setpoint = 0.1;
  double kp = 0.1;
  double ki = 0.05;
  double alpha = 0.2;
  double ratio_window = 2.0;
  RatioDenominator denominator = RatioDenominator::Retransmissions;

  bool operator==(const ControllerConfig&) const = default;
};

struct ServerOverride {
  std::optional<double> mu;
  std::optional<std::size_t> buffer;  // ServerQueue::kUnlimited = unlimited

  bool operator==(const ServerOverride&) const = default;
};

struct ScenarioConfig {
  // topology
  int uacs = 1;
  int proxies = 1;
  int cluster = 0;
  bool alternate = false;

  // servers
  double mu = 1000.0;  // messages per second
  std::size_t buffer = ServerQueue::kUnlimited;
  ServiceDistribution service = ServiceDistribution::Exponential;
  double reject_cost = 0.5;
  bool reroute = true;
  std::map<std::string, ServerOverride> overrides;

  // timers and link
  double t1 = 0.5;
  double t2 = 4.0;
  double loss = 0.08;
  double link_delay = 0.0;

  // workload
  WorkloadProfile workload;
  double hold = 1.0;
  bool teardown = true;

  ControllerConfig controller;

  std::optional<BalancerAlgorithm> balancer;
  CostTable costs;

  bool fluid = false;
  double fluid_dt = 0.01;
  bool fluid_redundant_responses = true;

  double duration = 0.0;
  std::uint64_t seed = 0;
  double sample = 0.1;
  bool drain = true;
  std::string out = "out";

  bool operator==(const ScenarioConfig&) const = default;

  /// Names of every server node ("p1", "p2", "alt", "c1", ...).
  std::vector<std::string> server_names() const;
  double mu_of(const std::string& server) const;
  std::size_t buffer_of(const std::string& server) const;
  std::string controller_host() const;
};

ScenarioConfig parse_scenario(std::string_view text);
ScenarioConfig load_scenario(const std::string& path);

/// Canonical document for `cfg`; parse_scenario(emit_scenario(cfg)) == cfg.
std::string emit_scenario(const ScenarioConfig& cfg);

/// Throws ConfigError naming the first offending key.
void validate(const ScenarioConfig& cfg);

}  // namespace sipov
