#pragma once

// Deterministic discrete-event scheduler. Events fire in (fire_at, sequence)
// order; equal timestamps resolve by insertion order.

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

namespace sipov {

enum class EventKind : std::uint8_t {
  MessageArrival,
  ServiceCompletion,
  TimerFire,
  ControlTick,
  WorkloadChange,
  SampleTick,
  CallArrival,
  SessionTimer,
  HoldRelease,
  WindowGuard,
};

using EventId = std::uint64_t;

struct SimEvent {
  double fire_at = 0.0;
  std::uint64_t sequence = 0;
  EventKind kind = EventKind::MessageArrival;
  std::uint32_t target = 0;  // node or component index
  std::uint64_t ref = 0;     // payload handle owned by the caller
};

class Engine {
 public:
  using Handler = std::function<void(const SimEvent&)>;

  double now() const { return clock_; }

  /// Enqueues an event and returns its sequence number, usable with cancel().
  /// Throws SchedulingError if fire_at precedes the clock.
  EventId schedule(double fire_at, EventKind kind, std::uint32_t target = 0, std::uint64_t ref = 0);

  /// Withdraws a pending event. Cancelled events are skipped, not delivered.
  void cancel(EventId id);
  bool is_pending(EventId id) const;

  /// Processes every event with fire_at <= t_end (inclusive) and leaves the
  /// clock at t_end. Returns the number of events delivered.
  std::size_t run_until(double t_end, const Handler& handler);

  /// Delivers the next pending event, if any.
  bool step(const Handler& handler);

  bool empty() const { return pending_ == 0; }
  std::size_t pending() const { return pending_; }
  std::uint64_t processed() const { return processed_; }

  /// FNV-1a digest over every delivered (fire_at, sequence, kind, target, ref).
  std::uint64_t trace_hash() const { return trace_hash_; }

 private:
  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
      if (a.fire_at != b.fire_at) return a.fire_at > b.fire_at;
      return a.sequence > b.sequence;
    }
  };

  bool pop_live(SimEvent& out);
  void deliver(const SimEvent& ev, const Handler& handler);

  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> queue_;
  std::vector<bool> cancelled_;
  std::vector<bool> done_;
  double clock_ = 0.0;
  std::uint64_t next_sequence_ = 0;
  std::size_t pending_ = 0;
  std::uint64_t processed_ = 0;
  std::uint64_t trace_hash_ = 1469598103934665603ull;
};

}  // namespace sipov
