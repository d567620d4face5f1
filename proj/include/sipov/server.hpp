#pragma once

// Building blocks of a SIP server node: time-varying capacity, busy-time
// metering, route suppression after 503/Retry-After and the (optionally
// two-class) bounded message queue. The simulator composes these into
// proxies; the event handlers live in simulation.cpp.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "sipov/controllers.hpp"
#include "sipov/sip.hpp"

namespace sipov {

enum class EnqueueResult : std::uint8_t { Accepted, DroppedBufferFull, RejectedByControl };

std::string_view to_string(EnqueueResult r);

enum class ServiceDistribution : std::uint8_t { Exponential, Deterministic };

struct SlowdownWindow {
  double start = 0.0;
  double end = 0.0;
  double multiplier = 1.0;
};

/// Piecewise-constant service rate: base rate scaled inside slowdown windows.
class CapacityProfile {
 public:
  explicit CapacityProfile(double base_rate = 1.0, std::vector<SlowdownWindow> windows = {});

  double base_rate() const { return base_; }
  double rate_at(double t) const;
  const std::vector<SlowdownWindow>& windows() const { return windows_; }

 private:
  double base_;
  std::vector<SlowdownWindow> windows_;
};

/// Fraction of a trailing window the processor spent busy.
class OccupancyMeter {
 public:
  explicit OccupancyMeter(double horizon = 10.0) : horizon_(horizon) {}

  /// Registers busy time [start, end); end may lie in the future.
  void add_busy(double start, double end);
  double occupancy(double now, double window) const;
  void prune(double now);

 private:
  std::deque<std::pair<double, double>> intervals_;
  double horizon_;
};

/// Per-route "do not send before" instants.
class SuppressionTable {
 public:
  void suppress(NodeId route, double until);
  bool suppressed(NodeId route, double now) const;
  std::optional<double> until(NodeId route) const;

 private:
  std::map<NodeId, double> until_;
};

/// Entry of a server queue. `ref` is an opaque handle owned by the caller.
struct QueueEntry {
  std::uint64_t ref = 0;
  bool counted = true;  // false for rejection work, which is not a queued message
  PriorityClass lane = PriorityClass::High;
};

/// FIFO, or two FIFOs served high-first when priority scheduling is on.
/// `size()` counts messages only; rejection work is tracked separately.
class ServerQueue {
 public:
  static constexpr std::size_t kUnlimited = std::numeric_limits<std::size_t>::max();

  ServerQueue(std::size_t buffer_limit = kUnlimited, bool priority = false)
      : limit_(buffer_limit), priority_(priority) {}

  bool has_room() const { return limit_ == kUnlimited || messages_ < limit_; }
  std::size_t buffer_limit() const { return limit_; }
  bool priority() const { return priority_; }

  void push(QueueEntry e);
  bool empty() const { return high_.empty() && low_.empty(); }
  QueueEntry pop();

  std::size_t size() const { return messages_; }
  std::size_t low_size() const { return low_messages_; }
  std::size_t pending_rejections() const { return rejections_; }

  /// The message being served still counts toward size() until it finishes.
  void finish_counted(const QueueEntry& e);

 private:
  std::size_t limit_;
  bool priority_;
  std::deque<QueueEntry> high_;
  std::deque<QueueEntry> low_;
  std::size_t messages_ = 0;
  std::size_t low_messages_ = 0;
  std::size_t rejections_ = 0;
};

}  // namespace sipov
