#include "sipov/server.hpp"

#include <algorithm>

#include "sipov/errors.hpp"

namespace sipov {

std::string_view to_string(EnqueueResult r) {
  switch (r) {
    case EnqueueResult::Accepted: return "Accepted";
    case EnqueueResult::DroppedBufferFull: return "DroppedBufferFull";
    case EnqueueResult::RejectedByControl: return "RejectedByControl";
  }
  return "?";
}

CapacityProfile::CapacityProfile(double base_rate, std::vector<SlowdownWindow> windows)
    : base_(base_rate), windows_(std::move(windows)) {
  if (!(base_rate > 0.0)) throw ParameterError("service rate must be positive");
  for (const auto& w : windows_) {
    if (!(w.multiplier > 0.0)) throw ParameterError("slowdown multiplier must be positive");
    if (!(w.end > w.start)) throw ParameterError("slowdown window must have end > start");
  }
  std::sort(windows_.begin(), windows_.end(),
            [](const SlowdownWindow& a, const SlowdownWindow& b) { return a.start < b.start; });
}

double CapacityProfile::rate_at(double t) const {
  double rate = base_;
  for (const auto& w : windows_) {
    if (t >= w.start && t < w.end) rate *= w.multiplier;
  }
  return rate;
}

void OccupancyMeter::add_busy(double start, double end) {
  if (end <= start) return;
  if (!intervals_.empty() && intervals_.back().second >= start) {
    intervals_.back().second = std::max(intervals_.back().second, end);
  } else {
    intervals_.emplace_back(start, end);
  }
}

void OccupancyMeter::prune(double now) {
  while (!intervals_.empty() && intervals_.front().second < now - horizon_) intervals_.pop_front();
}

double OccupancyMeter::occupancy(double now, double window) const {
  if (!(window > 0.0)) throw ParameterError("occupancy window must be positive");
  const double lo = now - window;
  double busy = 0.0;
  for (auto it = intervals_.rbegin(); it != intervals_.rend(); ++it) {
    if (it->second <= lo) break;
    const double a = std::max(it->first, lo);
    const double b = std::min(it->second, now);
    if (b > a) busy += b - a;
  }
  return std::clamp(busy / window, 0.0, 1.0);
}

void SuppressionTable::suppress(NodeId route, double until) {
  auto& u = until_[route];
  u = std::max(u, until);
}

bool SuppressionTable::suppressed(NodeId route, double now) const {
  auto it = until_.find(route);
  return it != until_.end() && now < it->second;
}

std::optional<double> SuppressionTable::until(NodeId route) const {
  auto it = until_.find(route);
  if (it == until_.end()) return std::nullopt;
  return it->second;
}

void ServerQueue::push(QueueEntry e) {
  if (e.counted) {
    ++messages_;
    if (priority_ && e.lane == PriorityClass::Low) ++low_messages_;
  } else {
    ++rejections_;
  }
  if (priority_ && e.lane == PriorityClass::Low) {
    low_.push_back(e);
  } else {
    high_.push_back(e);
  }
}

QueueEntry ServerQueue::pop() {
  if (empty()) throw ConsistencyError("pop from empty server queue");
  std::deque<QueueEntry>& q = high_.empty() ? low_ : high_;
  QueueEntry e = q.front();
  q.pop_front();
  if (!e.counted) --rejections_;
  return e;
}

void ServerQueue::finish_counted(const QueueEntry& e) {
  if (!e.counted) return;
  if (messages_ == 0) throw ConsistencyError("server queue size underflow");
  --messages_;
  if (priority_ && e.lane == PriorityClass::Low) --low_messages_;
}

}  // namespace sipov
