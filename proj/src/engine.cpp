#include "sipov/engine.hpp"

#include <cstring>
#include <string>

#include "sipov/errors.hpp"

namespace sipov {

namespace {

void mix(std::uint64_t& h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffu;
    h *= 1099511628211ull;
  }
}

}  // namespace

EventId Engine::schedule(double fire_at, EventKind kind, std::uint32_t target, std::uint64_t ref) {
  if (!(fire_at >= clock_)) {
    throw SchedulingError("event at t=" + std::to_string(fire_at) +
                          " precedes clock t=" + std::to_string(clock_));
  }
  const std::uint64_t seq = next_sequence_++;
  queue_.push(SimEvent{fire_at, seq, kind, target, ref});
  cancelled_.push_back(false);
  done_.push_back(false);
  ++pending_;
  return seq;
}

void Engine::cancel(EventId id) {
  if (id >= next_sequence_ || done_[id] || cancelled_[id]) return;
  cancelled_[id] = true;
  --pending_;
}

bool Engine::is_pending(EventId id) const {
  return id < next_sequence_ && !done_[id] && !cancelled_[id];
}

bool Engine::pop_live(SimEvent& out) {
  while (!queue_.empty()) {
    out = queue_.top();
    queue_.pop();
    if (!cancelled_[out.sequence]) return true;
  }
  return false;
}

void Engine::deliver(const SimEvent& ev, const Handler& handler) {
  clock_ = ev.fire_at;
  done_[ev.sequence] = true;
  --pending_;
  ++processed_;
  std::uint64_t bits;
  std::memcpy(&bits, &ev.fire_at, sizeof bits);
  mix(trace_hash_, bits);
  mix(trace_hash_, ev.sequence);
  mix(trace_hash_, static_cast<std::uint64_t>(ev.kind));
  mix(trace_hash_, ev.target);
  mix(trace_hash_, ev.ref);
  handler(ev);
}

std::size_t Engine::run_until(double t_end, const Handler& handler) {
  if (!(t_end >= clock_)) {
    throw SchedulingError("run_until target precedes clock");
  }
  std::size_t count = 0;
  SimEvent ev;
  while (!queue_.empty()) {
    // Skip cancelled heads without disturbing order.
    while (!queue_.empty() && cancelled_[queue_.top().sequence]) queue_.pop();
    if (queue_.empty() || queue_.top().fire_at > t_end) break;
    ev = queue_.top();
    queue_.pop();
    deliver(ev, handler);
    ++count;
  }
  clock_ = t_end;
  return count;
}

bool Engine::step(const Handler& handler) {
  SimEvent ev;
  if (!pop_live(ev)) return false;
  deliver(ev, handler);
  return true;
}

}  // namespace sipov
