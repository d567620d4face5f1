#pragma once

// Scenario documents shared by the simulation tests and the acceptance run.

#include <string>

#include "sipov/scenario.hpp"

namespace sipov::fixtures {

inline ScenarioConfig scenario(const std::string& text, std::uint64_t seed = 1) {
  auto c = parse_scenario(text + "run.seed = " + std::to_string(seed) + "\n");
  return c;
}

// Two proxies at 1000 msg/s, 50 calls/s, lossless: well under half capacity.
inline const std::string kLightLoad =
    "topology.proxies = 2\n"
    "server.mu = 1000\n"
    "link.loss = 0\n"
    "workload.segments = 0:60:50\n"
    "run.duration = 60\n";

// One proxy at 1000 msg/s; 7 messages per call, so 214.3 calls/s is 150%.
inline std::string overload(const std::string& controller, double duration = 120,
                            const std::string& extra = "") {
  return "topology.proxies = 1\n"
         "server.mu = 1000\n"
         "workload.segments = 0:" + std::to_string(duration) + ":214.3\n"
         "controller.name = " + controller + "\n"
         "run.duration = " + std::to_string(duration) + "\n"
         "run.drain = false\n" + extra;
}

// Tandem at 80% of p2's capacity; p2 halves at t = 30 for 60 s.
inline std::string propagation(const std::string& extra = "") {
  return "topology.proxies = 2\n"
         "server.mu = 2000\n"
         "link.loss = 0\n"
         "workload.segments = 0:64:228.5714285714286\n"
         "workload.slowdown = p2:30:90:0.5\n"
         "run.duration = 64\n"
         "run.sample = 0.2\n"
         "run.drain = false\n" + extra;
}

// p2 answers overload with Retry-After; p1 holds requests meanwhile.
inline const std::string kRetryAfter =
    "topology.proxies = 2\n"
    "server.mu = 1000\n"
    "server.p2.mu = 500\n"
    "workload.segments = 0:30:120\n"
    "controller.name = retry_after\n"
    "controller.server = p2\n"
    "controller.high = 60\n"
    "controller.low = 20\n"
    "controller.q_target = 10\n"
    "run.duration = 30\n";

inline const std::string kCluster =
    "topology.proxies = 1\n"
    "topology.cluster = 3\n"
    "balancer.name = cjsq\n"
    "server.mu = 1000\n"
    "workload.segments = 0:20:60\n"
    "run.duration = 20\n";

}  // namespace sipov::fixtures
