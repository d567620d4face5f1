#include "sipov/workload.hpp"

#include <cmath>

#include "sipov/errors.hpp"

namespace sipov {

void validate(const WorkloadProfile& profile) {
  double last_end = -std::numeric_limits<double>::infinity();
  for (const auto& s : profile.segments) {
    if (!(s.rate >= 0.0) || !std::isfinite(s.rate)) throw ParameterError("negative arrival rate");
    if (!(s.end > s.start)) throw ParameterError("workload segment must have end > start");
    if (s.start < last_end) throw ParameterError("workload segments overlap or are unordered");
    last_end = s.end;
  }
  for (const auto& sd : profile.slowdowns) {
    if (!(sd.window.multiplier > 0.0)) throw ParameterError("slowdown multiplier must be > 0");
    if (!(sd.window.end > sd.window.start)) throw ParameterError("slowdown must have end > start");
  }
}

std::vector<double> generate_calls(const WorkloadProfile& profile, Substream& stream) {
  validate(profile);
  std::vector<double> arrivals;
  for (const auto& seg : profile.segments) {
    if (seg.rate == 0.0) continue;
    if (profile.process == ArrivalProcess::Deterministic) {
      for (std::uint64_t k = 0;; ++k) {
        const double t = seg.start + static_cast<double>(k) / seg.rate;
        if (t >= seg.end) break;
        arrivals.push_back(t);
      }
    } else {
      double t = seg.start;
      for (;;) {
        t += stream.exponential(seg.rate);
        if (t >= seg.end) break;
        arrivals.push_back(t);
      }
    }
  }
  return arrivals;
}

}  // namespace sipov
