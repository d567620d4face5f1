#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sipov/random.hpp"
#include "sipov/server.hpp"

namespace sipov {

enum class ArrivalProcess : std::uint8_t { Poisson, Deterministic };

struct RateSegment {
  double start = 0.0;
  double end = 0.0;
  double rate = 0.0;  // calls per second

  bool operator==(const RateSegment&) const = default;
};

struct ServerSlowdown {
  std::string server;
  SlowdownWindow window;

  bool operator==(const ServerSlowdown& o) const {
    return server == o.server && window.start == o.window.start && window.end == o.window.end &&
           window.multiplier == o.window.multiplier;
  }
};

struct WorkloadProfile {
  std::vector<RateSegment> segments;
  ArrivalProcess process = ArrivalProcess::Poisson;
  std::vector<ServerSlowdown> slowdowns;

  bool operator==(const WorkloadProfile&) const = default;
};

/// Throws ParameterError on overlapping/unordered segments, negative rates
/// or non-positive slowdown multipliers.
void validate(const WorkloadProfile& profile);

/// Call arrival instants over all segments, in increasing order.
std::vector<double> generate_calls(const WorkloadProfile& profile, Substream& stream);

}  // namespace sipov
