#pragma once

// Discrete-event model of a SIP signaling network: UACs, a proxy chain
// (optionally an alternate last hop or a balanced cluster) and one UAS,
// connected by lossy UDP links.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sipov/balancer.hpp"
#include "sipov/metrics.hpp"
#include "sipov/scenario.hpp"
#include "sipov/sip.hpp"

namespace sipov {

struct TraceOptions {
  bool forwarding = false;
  bool retransmissions = false;
  bool dispatch = false;
  std::string sojourn_server;  // empty: no sojourn records
};

struct ForwardRecord {
  double t;
  NodeId from;
  NodeId to;
  CallId call;
  MessageKind kind;
  Method method;
  std::uint8_t copy;
};

/// A node stopped sending requests on `route` from t until `until`.
struct SuppressionRecord {
  double t;
  NodeId node;
  NodeId route;
  double until;
};

struct RetransmissionRecord {
  double fired_at;  // timer instant that produced the copy
  double sent_at;   // instant the copy went onto the link
  NodeId node;
  CallId call;
  MessageKind kind;
  std::uint8_t copy;
  RetransmissionClass cls;
};

struct DispatchRecord {
  double t;
  CallId call;
  BalancerAlgorithm algorithm;
  std::size_t chosen;
  std::vector<double> metric;  // per-server value the pick minimized
};

struct SojournRecord {
  double arrived;
  double departed;
  MessageKind kind;
  std::uint8_t copy;
};

struct SimulationResult {
  MetricsReport report;
  std::vector<std::string> node_names;  // indexed by NodeId
  std::vector<ForwardRecord> forwarding;
  std::vector<SuppressionRecord> suppressions;  // recorded with the forwarding trace
  std::vector<RetransmissionRecord> retransmissions;
  std::vector<DispatchRecord> dispatches;
  std::vector<SojournRecord> sojourns;
  std::uint64_t event_hash = 0;
  std::uint64_t events = 0;

  NodeId node(const std::string& name) const;
};

SimulationResult simulate(const ScenarioConfig& cfg, const TraceOptions& traces = {});

/// Simulates `cfg` and writes series.csv, calls.csv, summary.csv (and
/// fluid.csv when the fluid model is enabled) into `out`.
MetricsReport run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& out);

}  // namespace sipov
