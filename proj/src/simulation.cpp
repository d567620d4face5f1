#include "sipov/simulation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <fstream>

#include "sipov/controllers.hpp"
#include "sipov/engine.hpp"
#include "sipov/errors.hpp"
#include "sipov/fluid.hpp"
#include "sipov/random.hpp"
#include "sipov/server.hpp"
#include "sipov/workload.hpp"

namespace sipov {

NodeId SimulationResult::node(const std::string& name) const {
  for (std::size_t i = 0; i < node_names.size(); ++i) {
    if (node_names[i] == name) return static_cast<NodeId>(i);
  }
  throw ParameterError("no node named " + name);
}

namespace {

enum class Role : std::uint8_t { Uac, Proxy, Uas };

constexpr int kMaxRoute = 5;

// Retransmission-rate control state kept by every timer owner.
struct RetxControl {
  RtqcConfig rtqc;
  bool tuned = false;
  double departure_rate = 0.0;
  std::uint64_t originals_in_tick = 0;

  PiControllerState pi;
  std::deque<std::pair<double, bool>> copies;  // (sent, redundant)
  std::deque<double> sends;
  std::vector<DelaySample> delay_samples;
  std::optional<double> delay;
};

struct Node {
  std::string name;
  Role role = Role::Proxy;

  CapacityProfile capacity;
  ServerQueue queue;
  OccupancyMeter meter{30.0};
  Substream* service = nullptr;
  bool busy = false;
  QueueEntry current;
  std::uint64_t arrivals = 0;
  std::uint64_t served = 0;
  std::uint64_t rejected = 0;
  std::uint64_t dropped = 0;

  BangBangState bangbang;
  double reject_p = 0.0;
  WindowState window;
  std::uint64_t new_calls_in_tick = 0;
  double sojourn_sum = 0.0;
  std::uint64_t sojourn_n = 0;

  SuppressionTable suppression;
  std::size_t armed_timers = 0;
  RetxControl retx;
};

struct Packet {
  SipMessage msg;
  std::uint8_t from_pos = 0;
  std::uint8_t to_pos = 0;  // position the packet is heading to, or sits at
  std::int32_t timer = -1;  // timer guarding this hop, for the delivery record
  bool self_copy = false;   // proxy retransmission waiting for service
  bool reject_job = false;  // rejection work that ends in a 503
  double fired_at = 0.0;
  double enqueued_at = 0.0;
};

struct Timer {
  CallId call = 0;
  NodeId owner = kNoNode;
  NodeId to = kNoNode;
  std::uint8_t pos = 0;
  std::uint8_t to_pos = 0;
  MessageKind kind = MessageKind::Invite;
  Method method = Method::Invite;
  TimerKind type = TimerKind::HopByHop;
  bool armed = false;
  int refs = 0;
  int fired = 0;
  double first_sent = 0.0;
  EventId event = 0;
  DeliveryRecord record;
};

struct Hop {
  bool seen = false;
  bool admitted = false;
  bool rejected = false;
  bool window_slot = false;
  std::int32_t timer = -1;
};

struct Call {
  CallId id = 0;
  CallSession session;
  std::array<NodeId, kMaxRoute> route{};
  std::array<Hop, kMaxRoute> hop{};
  std::uint8_t len = 0;
  std::int32_t invite_timer = -1;
  std::int32_t bye_timer = -1;
  std::int32_t ok_timer = -1;
  bool uas_seen = false;
  bool had_drop = false;
  bool member_ended = false;
  int member = -1;
  std::optional<double> ok_at;
  std::optional<EventId> deadline;
};

class Simulator {
 public:
  Simulator(const ScenarioConfig& cfg, const TraceOptions& traces)
      : cfg_(cfg), traces_(traces), rng_(cfg.seed),
        hbh_(retransmission_schedule(TimerKind::HopByHop, cfg.t1, cfg.t2)),
        e2e_(retransmission_schedule(TimerKind::EndToEnd, cfg.t1, cfg.t2)) {
    build_topology();
  }

  SimulationResult run();

 private:
  // topology
  void build_topology();
  std::uint8_t uas_pos(const Call& c) const { return static_cast<std::uint8_t>(c.len - 1); }

  // packets and timers
  std::int32_t new_packet(Call& c, MessageKind kind, Method method, int from_pos, int to_pos,
                          int copy, bool redundant);
  void free_packet(std::int32_t i);
  void attach_timer(std::int32_t pkt, std::int32_t timer);
  std::int32_t arm_timer(Call& c, int pos, int to_pos, MessageKind kind, Method method);
  void disarm(std::int32_t& slot);
  void release_timer(std::int32_t t);
  std::int32_t& owner_slot(const Timer& t);
  void readdress(std::int32_t i, Call& c, int from_pos, int to_pos);

  // events
  void handle(const SimEvent& ev);
  void call_arrival(CallId id);
  void send_link(std::int32_t i);
  void deliver(NodeId n, std::int32_t i);
  void timer_fire(std::int32_t t);
  void emit_copy(std::int32_t t, int copy);
  void session_timer(std::uint64_t ref);
  void control_tick();
  void sample_tick();

  // endpoints
  void uac_receive(Call& c, std::int32_t i);
  void apply_session_step(Call& c, const SessionStep& step);
  void uac_send_request(Call& c, MessageKind kind, Method method);
  void uas_receive(Call& c, std::int32_t i);
  void uas_respond(Call& c, MessageKind kind, Method method, bool redundant, bool arm);
  void finish_call(Call& c);

  // servers
  void proxy_arrival(NodeId n, std::int32_t i);
  void enqueue(NodeId n, std::int32_t i);
  bool admit_new_call(NodeId n, Call& c, int pos, std::optional<double>& retry_after);
  void start_service(NodeId n);
  void service_done(NodeId n);
  void proxy_serve(NodeId n, std::int32_t i);
  void forward_invite(Call& c, int pos);
  void forward_request(Call& c, int pos, std::int32_t i);
  void forward_up(Call& c, int pos, std::int32_t i);
  void reject_upstream(Call& c, int pos, std::optional<double> retry_after, bool redundant);
  void release_window(Call& c);
  void handle_503(Call& c, int pos, std::int32_t i);

  double retx_probability(const Node& n) const;
  double service_time(Node& s);
  void suppress(NodeId n, NodeId route, double d) {
    const double until = engine_.now() + d;
    nodes_[n].suppression.suppress(route, until);
    if (traces_.forwarding) result_.suppressions.push_back({engine_.now(), n, route, until});
  }
  void log(const std::string& node, const char* var, double v) {
    result_.report.controller_log.push_back({engine_.now(), node, var, v});
  }

  const ScenarioConfig& cfg_;
  TraceOptions traces_;
  Engine engine_;
  RandomStream rng_;
  RetransmissionSchedule hbh_;
  RetransmissionSchedule e2e_;
  Substream* loss_ = nullptr;
  Substream* control_ = nullptr;

  std::vector<Node> nodes_;
  std::vector<NodeId> uacs_;
  std::vector<NodeId> proxies_;
  std::vector<NodeId> members_;
  NodeId alt_ = kNoNode;
  NodeId uas_ = kNoNode;
  int last_proxy_pos_ = 0;
  int cluster_pos_ = -1;
  std::optional<Balancer> balancer_;

  ControllerName ctl_ = ControllerName::None;
  NodeId host_ = kNoNode;
  int host_pos_ = -1;
  double tick_ = 0.0;
  // push-back rate limit: applied at the UACs or at an upstream proxy
  std::optional<RateLimiter> limiter_;
  NodeId limited_node_ = kNoNode;
  bool limit_at_uac_ = false;
  NodeId sojourn_node_ = kNoNode;

  std::vector<Call> calls_;
  std::vector<Packet> packets_;
  std::vector<std::int32_t> free_packets_;
  std::vector<Timer> timers_;
  std::vector<std::int32_t> free_timers_;
  InstanceId next_instance_ = 1;
  std::size_t terminal_ = 0;

  SimulationResult result_;
};

void Simulator::build_topology() {
  auto add = [&](std::string name, Role role) {
    Node n;
    n.name = std::move(name);
    n.role = role;
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
  };
  for (int i = 1; i <= cfg_.uacs; ++i) uacs_.push_back(add("u" + std::to_string(i), Role::Uac));
  for (const auto& name : cfg_.server_names()) {
    const NodeId id = add(name, Role::Proxy);
    if (name == "alt") alt_ = id;
    else if (name[0] == 'c') members_.push_back(id);
    else proxies_.push_back(id);
  }
  uas_ = add("uas", Role::Uas);

  last_proxy_pos_ = cfg_.proxies;
  if (cfg_.cluster > 0) {
    cluster_pos_ = cfg_.proxies + 1;
    balancer_.emplace(*cfg_.balancer, members_.size(), cfg_.costs);
  }

  ctl_ = cfg_.controller.name;
  tick_ = cfg_.controller.tick > 0.0 ? cfg_.controller.tick : cfg_.t1;
  if (ctl_ != ControllerName::None && !is_retransmission_control(ctl_)) {
    const auto host = cfg_.controller_host();
    for (NodeId i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].name == host) host_ = i;
    }
    if (host == "alt") host_pos_ = last_proxy_pos_;
    else if (host[0] == 'c') host_pos_ = cluster_pos_;
    else host_pos_ = std::stoi(host.substr(1));
  }

  const auto& k = cfg_.controller;
  for (NodeId i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    if (n.role == Role::Proxy) {
      std::vector<SlowdownWindow> windows;
      for (const auto& sd : cfg_.workload.slowdowns) {
        if (sd.server == n.name) windows.push_back(sd.window);
      }
      n.capacity = CapacityProfile(cfg_.mu_of(n.name), windows);
      n.queue = ServerQueue(cfg_.buffer_of(n.name), i == host_ && ctl_ == ControllerName::Priority);
      n.service = &rng_.stream("service/" + n.name);
    }
    n.bangbang = {BangBangState::Mode::Underload, k.high, k.low};
    n.window = {k.window, 0};
    n.retx.rtqc = {0.0, 0.0, k.p_min, k.tuning_gain};
    n.retx.pi.setpoint = ctl_ == ControllerName::Rtdc ? k.d_target : k.setpoint;
    n.retx.pi.kp = k.kp;
    n.retx.pi.ki = k.ki;
    n.retx.pi.lower = k.p_min;
    n.retx.pi.upper = 1.0;
    n.retx.pi.output = 1.0;
  }

  if (ctl_ == ControllerName::RateOccupancy || ctl_ == ControllerName::RateDelay) {
    limiter_.emplace(cfg_.mu_of(nodes_[host_].name), 1.0);
    const int up = host_pos_ - 1;
    if (up <= 0) limit_at_uac_ = true;
    else limited_node_ = proxies_[static_cast<std::size_t>(up - 1)];
  }

  loss_ = &rng_.stream("loss");
  control_ = &rng_.stream("control");
  for (NodeId i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].name == traces_.sojourn_server) sojourn_node_ = i;
    result_.node_names.push_back(nodes_[i].name);
  }
}

// ---------------------------------------------------------------------------
// Packets and timers

std::int32_t Simulator::new_packet(Call& c, MessageKind kind, Method method, int from_pos,
                                   int to_pos, int copy, bool redundant) {
  std::int32_t i;
  if (!free_packets_.empty()) {
    i = free_packets_.back();
    free_packets_.pop_back();
    packets_[static_cast<std::size_t>(i)] = Packet{};
  } else {
    i = static_cast<std::int32_t>(packets_.size());
    packets_.emplace_back();
  }
  Packet& p = packets_[static_cast<std::size_t>(i)];
  p.msg.call_id = c.id;
  p.msg.kind = kind;
  p.msg.method = method;
  p.msg.copy_index = static_cast<std::uint8_t>(copy);
  p.msg.created_at = engine_.now();
  p.msg.redundant = redundant;
  readdress(i, c, from_pos, to_pos);
  return i;
}

void Simulator::readdress(std::int32_t i, Call& c, int from_pos, int to_pos) {
  Packet& p = packets_[static_cast<std::size_t>(i)];
  p.from_pos = static_cast<std::uint8_t>(from_pos);
  p.to_pos = static_cast<std::uint8_t>(to_pos);
  p.msg.from = c.route[static_cast<std::size_t>(from_pos)];
  p.msg.to = c.route[static_cast<std::size_t>(to_pos)];
  p.msg.instance_id = next_instance_++;
}

void Simulator::free_packet(std::int32_t i) {
  Packet& p = packets_[static_cast<std::size_t>(i)];
  if (p.timer >= 0) {
    Timer& t = timers_[static_cast<std::size_t>(p.timer)];
    --t.refs;
    release_timer(p.timer);
    p.timer = -1;
  }
  free_packets_.push_back(i);
}

void Simulator::attach_timer(std::int32_t pkt, std::int32_t timer) {
  packets_[static_cast<std::size_t>(pkt)].timer = timer;
  ++timers_[static_cast<std::size_t>(timer)].refs;
}

std::int32_t Simulator::arm_timer(Call& c, int pos, int to_pos, MessageKind kind, Method method) {
  std::int32_t i;
  if (!free_timers_.empty()) {
    i = free_timers_.back();
    free_timers_.pop_back();
    timers_[static_cast<std::size_t>(i)] = Timer{};
  } else {
    i = static_cast<std::int32_t>(timers_.size());
    timers_.emplace_back();
  }
  Timer& t = timers_[static_cast<std::size_t>(i)];
  t.call = c.id;
  t.pos = static_cast<std::uint8_t>(pos);
  t.to_pos = static_cast<std::uint8_t>(to_pos);
  t.owner = c.route[static_cast<std::size_t>(pos)];
  t.to = c.route[static_cast<std::size_t>(to_pos)];
  t.kind = kind;
  t.method = method;
  t.type = *guarding_timer(kind, method);
  t.armed = true;
  t.first_sent = engine_.now();
  const auto& sched = t.type == TimerKind::HopByHop ? hbh_ : e2e_;
  const double next = sched.offsets.empty() ? sched.timeout : sched.offsets.front();
  t.event = engine_.schedule(t.first_sent + next, EventKind::TimerFire, 0, static_cast<std::uint64_t>(i));
  ++nodes_[t.owner].armed_timers;
  return i;
}

std::int32_t& Simulator::owner_slot(const Timer& t) {
  Call& c = calls_[t.call];
  if (t.pos == 0) return t.method == Method::Invite ? c.invite_timer : c.bye_timer;
  if (t.pos == uas_pos(c)) return c.ok_timer;
  return c.hop[t.pos].timer;
}

void Simulator::disarm(std::int32_t& slot) {
  if (slot < 0) return;
  const std::int32_t i = slot;
  slot = -1;
  Timer& t = timers_[static_cast<std::size_t>(i)];
  if (!t.armed) throw ConsistencyError("disarming a timer twice");
  t.armed = false;
  engine_.cancel(t.event);
  --nodes_[t.owner].armed_timers;
  if (ctl_ == ControllerName::Rtdc) {
    nodes_[t.owner].retx.delay_samples.push_back({t.first_sent, engine_.now()});
  }
  release_timer(i);
}

void Simulator::release_timer(std::int32_t i) {
  const Timer& t = timers_[static_cast<std::size_t>(i)];
  if (!t.armed && t.refs == 0) free_timers_.push_back(i);
}

// ---------------------------------------------------------------------------
// Event dispatch

void Simulator::handle(const SimEvent& ev) {
  switch (ev.kind) {
    case EventKind::CallArrival: call_arrival(ev.ref); break;
    case EventKind::MessageArrival: deliver(ev.target, static_cast<std::int32_t>(ev.ref)); break;
    case EventKind::ServiceCompletion: service_done(ev.target); break;
    case EventKind::TimerFire: timer_fire(static_cast<std::int32_t>(ev.ref)); break;
    case EventKind::SessionTimer: session_timer(ev.ref); break;
    case EventKind::ControlTick: control_tick(); break;
    case EventKind::SampleTick: sample_tick(); break;
    case EventKind::HoldRelease: {
      const auto i = static_cast<std::int32_t>(ev.ref);
      Packet& p = packets_[static_cast<std::size_t>(i)];
      forward_request(calls_[p.msg.call_id], p.to_pos, i);
      break;
    }
    case EventKind::WindowGuard: release_window(calls_[ev.ref]); break;
    case EventKind::WorkloadChange: break;
  }
}

void Simulator::call_arrival(CallId id) {
  Call& c = calls_[id];
  Node& uac = nodes_[c.route[0]];
  const bool limited = limit_at_uac_ && !limiter_->admit(engine_.now());
  if (limited || uac.suppression.suppressed(c.route[1], engine_.now())) {
    c.session.state = SessionState::Failed;
    c.session.outcome = CallOutcome::Rejected;
    c.session.end = engine_.now();
    finish_call(c);
    return;
  }
  const SessionStep step = advance_session(c.session, SessionEvent::start(), engine_.now());
  apply_session_step(c, step);
  c.deadline = engine_.schedule(engine_.now() + hbh_.timeout, EventKind::SessionTimer, 0, id * 2);
}

void Simulator::send_link(std::int32_t i) {
  Packet& p = packets_[static_cast<std::size_t>(i)];
  const double now = engine_.now();
  auto& report = result_.report;
  Node& sender = nodes_[p.msg.from];
  if (p.timer >= 0) {
    Timer& t = timers_[static_cast<std::size_t>(p.timer)];
    const int copy = p.msg.copy_index;
    if (copy > 0) {
      const auto cls = classify_retransmission(copy, t.record);
      const bool redundant = cls == RetransmissionClass::Redundant;
      p.msg.redundant = redundant;
      ++report.retransmissions;
      ++(redundant ? report.redundant_retransmissions : report.nonredundant_retransmissions);
      if (ctl_ == ControllerName::Rrrc) sender.retx.copies.emplace_back(now, redundant);
      if (traces_.retransmissions) {
        result_.retransmissions.push_back(
            {p.fired_at, now, p.msg.from, p.msg.call_id, p.msg.kind, p.msg.copy_index, cls});
      }
    } else {
      ++sender.retx.originals_in_tick;
    }
    t.record.record_sent(copy);
  }
  if (ctl_ == ControllerName::Rrrc && cfg_.controller.denominator == RatioDenominator::Messages) {
    sender.retx.sends.push_back(now);
  }
  if (traces_.forwarding) {
    result_.forwarding.push_back({now, p.msg.from, p.msg.to, p.msg.call_id, p.msg.kind,
                                  p.msg.method, p.msg.copy_index});
  }
  if (cfg_.loss > 0.0 && loss_->bernoulli(cfg_.loss)) {
    if (p.timer >= 0) timers_[static_cast<std::size_t>(p.timer)].record.record_lost(p.msg.copy_index);
    free_packet(i);
    return;
  }
  engine_.schedule(now + cfg_.link_delay, EventKind::MessageArrival, p.msg.to,
                   static_cast<std::uint64_t>(i));
}

void Simulator::deliver(NodeId n, std::int32_t i) {
  Packet& p = packets_[static_cast<std::size_t>(i)];
  Call& c = calls_[p.msg.call_id];
  if (c.route[p.to_pos] != n) {
    // Addressed to a hop the call has since been re-routed away from.
    ++result_.report.stale_messages;
    free_packet(i);
    return;
  }
  switch (nodes_[n].role) {
    case Role::Uac: uac_receive(c, i); break;
    case Role::Uas: uas_receive(c, i); break;
    case Role::Proxy: proxy_arrival(n, i); break;
  }
}

void Simulator::timer_fire(std::int32_t ti) {
  Timer& t = timers_[static_cast<std::size_t>(ti)];
  if (!t.armed) throw ConsistencyError("a disarmed timer fired");
  const auto& sched = t.type == TimerKind::HopByHop ? hbh_ : e2e_;
  const auto n = static_cast<int>(sched.offsets.size());
  if (t.fired < n) {
    const int copy = ++t.fired;
    Node& owner = nodes_[t.owner];
    bool emit = true;
    const double p = retx_probability(owner);
    if (p < 1.0 && control_->uniform() >= p) emit = false;
    if (emit && t.to_pos > t.pos && owner.suppression.suppressed(t.to, engine_.now())) emit = false;
    if (emit) emit_copy(ti, copy);
    else ++result_.report.suppressed_retransmissions;
    Timer& tt = timers_[static_cast<std::size_t>(ti)];
    const double next = tt.fired < n ? tt.first_sent + sched.offsets[static_cast<std::size_t>(tt.fired)]
                                     : tt.first_sent + sched.timeout;
    tt.event = engine_.schedule(next, EventKind::TimerFire, 0, static_cast<std::uint64_t>(ti));
    return;
  }

  // Transaction timeout.
  std::int32_t& slot = owner_slot(t);
  const CallId call = t.call;
  const Method method = t.method;
  const bool at_uac = t.pos == 0;
  slot = -1;
  t.armed = false;
  --nodes_[t.owner].armed_timers;
  release_timer(ti);
  if (at_uac && method == Method::Bye) {
    Call& c = calls_[call];
    if (!c.session.terminal()) {
      advance_session(c.session, SessionEvent::timeout(Method::Bye), engine_.now());
      if (c.session.terminal()) finish_call(c);
    }
  }
}

void Simulator::emit_copy(std::int32_t ti, int copy) {
  const Timer& t = timers_[static_cast<std::size_t>(ti)];
  Call& c = calls_[t.call];
  const int pos = t.pos;
  const int to_pos = t.to_pos;
  const auto kind = t.kind;
  const auto method = t.method;
  const NodeId owner = t.owner;
  if (nodes_[owner].role == Role::Proxy) {
    const std::int32_t i = new_packet(c, kind, method, pos, pos, copy, false);
    attach_timer(i, ti);
    Packet& p = packets_[static_cast<std::size_t>(i)];
    p.self_copy = true;
    p.fired_at = engine_.now();
    Node& s = nodes_[owner];
    ++s.arrivals;
    if (!s.queue.has_room()) {
      ++s.dropped;
      c.had_drop = true;
      free_packet(i);
      return;
    }
    enqueue(owner, i);
    return;
  }
  const std::int32_t i = new_packet(c, kind, method, pos, to_pos, copy, false);
  packets_[static_cast<std::size_t>(i)].fired_at = engine_.now();
  attach_timer(i, ti);
  send_link(i);
}

void Simulator::session_timer(std::uint64_t ref) {
  Call& c = calls_[ref / 2];
  if (c.session.terminal()) return;
  if (ref % 2 == 0) {
    c.deadline.reset();
    advance_session(c.session, SessionEvent::timeout(Method::Invite), engine_.now());
    if (c.session.terminal()) finish_call(c);
    return;
  }
  const SessionStep step = advance_session(c.session, SessionEvent::hang_up(), engine_.now());
  apply_session_step(c, step);
}

// ---------------------------------------------------------------------------
// Endpoints

void Simulator::apply_session_step(Call& c, const SessionStep& step) {
  if (step.disarm) disarm(*step.disarm == Method::Invite ? c.invite_timer : c.bye_timer);
  for (const auto& e : step.emit) uac_send_request(c, e.kind, e.method);
}

void Simulator::uac_send_request(Call& c, MessageKind kind, Method method) {
  const std::int32_t i = new_packet(c, kind, method, 0, 0, 0, false);
  if (guarding_timer(kind, method)) {
    std::int32_t& slot = method == Method::Invite ? c.invite_timer : c.bye_timer;
    slot = arm_timer(c, 0, 1, kind, method);
    attach_timer(i, slot);
  }
  forward_request(c, 0, i);
}

void Simulator::uac_receive(Call& c, std::int32_t i) {
  const Packet p = packets_[static_cast<std::size_t>(i)];
  free_packet(i);
  if (p.msg.kind == MessageKind::Unavailable503 && p.msg.retry_after) {
    if (*p.msg.retry_after < 0.0) ++result_.report.protocol_errors;
    else suppress(c.route[0], p.msg.from, *p.msg.retry_after);
  }
  if (c.session.terminal()) {
    ++result_.report.stale_messages;
    return;
  }
  const SessionStep step =
      advance_session(c.session, SessionEvent::receive(p.msg.kind, p.msg.method), engine_.now());
  if (step.stale) {
    ++result_.report.stale_messages;
    return;
  }
  apply_session_step(c, step);
  if (c.session.state == SessionState::OkReceived) {
    c.ok_at = engine_.now();
    if (c.deadline) {
      engine_.cancel(*c.deadline);
      c.deadline.reset();
    }
    apply_session_step(c, advance_session(c.session, SessionEvent::answer(), engine_.now()));
    if (c.session.teardown) {
      engine_.schedule(engine_.now() + cfg_.hold, EventKind::SessionTimer, 0, c.id * 2 + 1);
    }
  }
  if (c.session.terminal()) finish_call(c);
}

void Simulator::uas_respond(Call& c, MessageKind kind, Method method, bool redundant, bool arm) {
  const int pos = uas_pos(c);
  const std::int32_t i = new_packet(c, kind, method, pos, pos - 1, 0, redundant);
  if (redundant) ++result_.report.redundant_responses;
  if (arm) {
    c.ok_timer = arm_timer(c, pos, pos - 1, kind, method);
    attach_timer(i, c.ok_timer);
  }
  send_link(i);
}

void Simulator::uas_receive(Call& c, std::int32_t i) {
  const Packet p = packets_[static_cast<std::size_t>(i)];
  free_packet(i);
  const bool red = p.msg.redundant;
  switch (p.msg.kind) {
    case MessageKind::Invite:
      if (!c.uas_seen) {
        c.uas_seen = true;
        uas_respond(c, MessageKind::Trying100, Method::Invite, red, false);
        uas_respond(c, MessageKind::Ring180, Method::Invite, red, false);
        uas_respond(c, MessageKind::Ok200, Method::Invite, red, true);
      } else {
        uas_respond(c, MessageKind::Trying100, Method::Invite, red, false);
      }
      break;
    case MessageKind::Ack:
      disarm(c.ok_timer);
      break;
    case MessageKind::Bye:
      uas_respond(c, MessageKind::Ok200, Method::Bye, red, false);
      break;
    default:
      ++result_.report.stale_messages;
      break;
  }
}

void Simulator::finish_call(Call& c) {
  ++terminal_;
  disarm(c.invite_timer);
  disarm(c.bye_timer);
  if (c.deadline) {
    engine_.cancel(*c.deadline);
    c.deadline.reset();
  }
  if (balancer_ && c.member >= 0 && !c.member_ended) {
    c.member_ended = true;
    balancer_->call_ended(c.id);
  }
}

// ---------------------------------------------------------------------------
// Servers

void Simulator::proxy_arrival(NodeId n, std::int32_t i) {
  Node& s = nodes_[n];
  Packet& p = packets_[static_cast<std::size_t>(i)];
  Call& c = calls_[p.msg.call_id];
  const int pos = p.to_pos;
  Hop& h = c.hop[static_cast<std::size_t>(pos)];
  ++s.arrivals;

  if (!s.queue.has_room()) {
    ++s.dropped;
    c.had_drop = true;
    if (p.timer >= 0) timers_[static_cast<std::size_t>(p.timer)].record.record_lost(p.msg.copy_index);
    free_packet(i);
    return;
  }

  const bool from_up = p.from_pos < pos;
  if (from_up && p.msg.kind == MessageKind::Invite && !h.admitted) {
    std::optional<double> retry_after;
    if (h.rejected || !admit_new_call(n, c, pos, retry_after)) {
      h.rejected = true;
      ++s.rejected;
      if (p.timer >= 0) {
        Timer& t = timers_[static_cast<std::size_t>(p.timer)];
        --t.refs;
        release_timer(p.timer);
        p.timer = -1;
      }
      p.reject_job = true;
      p.msg.retry_after = retry_after;
      s.queue.push({static_cast<std::uint64_t>(i), false, PriorityClass::High});
      start_service(n);
      return;
    }
    h.admitted = true;
    if (n == host_) ++s.new_calls_in_tick;
  }

  if (!from_up && p.msg.method == Method::Invite) {
    // Any response ends the hop-by-hop retransmissions of our INVITE.
    disarm(h.timer);
    if (is_final_response(p.msg.kind)) {
      if (pos == host_pos_) release_window(c);
      if (pos == last_proxy_pos_ && balancer_ && c.member >= 0) {
        balancer_->transaction_completed(c.id, Method::Invite);
        if (p.msg.kind == MessageKind::Unavailable503 && !c.member_ended) {
          c.member_ended = true;
          balancer_->call_ended(c.id);
        }
      }
    }
  }
  if (!from_up && p.msg.method == Method::Bye && pos == last_proxy_pos_ && balancer_ &&
      c.member >= 0) {
    balancer_->transaction_completed(c.id, Method::Bye);
    if (!c.member_ended) {
      c.member_ended = true;
      balancer_->call_ended(c.id);
    }
  }
  enqueue(n, i);
}

void Simulator::enqueue(NodeId n, std::int32_t i) {
  Node& s = nodes_[n];
  Packet& p = packets_[static_cast<std::size_t>(i)];
  p.enqueued_at = engine_.now();
  const auto lane = s.queue.priority() ? priority_class(p.msg.kind) : PriorityClass::High;
  s.queue.push({static_cast<std::uint64_t>(i), true, lane});
  start_service(n);
}

bool Simulator::admit_new_call(NodeId n, Call& c, int pos, std::optional<double>& retry_after) {
  Node& s = nodes_[n];
  const double now = engine_.now();
  if (n == limited_node_ && !limiter_->admit(now)) return false;
  if (n != host_) return true;
  const auto& k = cfg_.controller;
  switch (ctl_) {
    case ControllerName::BangBang:
      return bangbang_decide(s.bangbang, s.queue.size(), MessageKind::Invite) == Verdict::Accept;
    case ControllerName::RetryAfter:
      if (bangbang_decide(s.bangbang, s.queue.size(), MessageKind::Invite) == Verdict::Accept) {
        return true;
      }
      retry_after = retry_after_duration(static_cast<double>(s.queue.size()), k.q_target,
                                         s.capacity.rate_at(now));
      return false;
    case ControllerName::Occupancy:
      return !(s.reject_p > 0.0 && control_->uniform() < s.reject_p);
    case ControllerName::Priority: {
      if (!k.thresholds) return true;
      const double pr = priority_reject_probability(s.queue.low_size(), {k.th_low, k.th_high});
      return !(pr > 0.0 && control_->uniform() < pr);
    }
    case ControllerName::Window:
      if (window_decide(s.window, WindowEvent::NewCall) != Verdict::Forward) return false;
      c.hop[static_cast<std::size_t>(pos)].window_slot = true;
      engine_.schedule(now + hbh_.timeout, EventKind::WindowGuard, 0, c.id);
      return true;
    default:
      return true;
  }
}

void Simulator::release_window(Call& c) {
  if (ctl_ != ControllerName::Window || host_pos_ < 0) return;
  Hop& h = c.hop[static_cast<std::size_t>(host_pos_)];
  if (!h.window_slot) return;
  h.window_slot = false;
  window_decide(nodes_[host_].window, WindowEvent::CallAnswered);
}

double Simulator::service_time(Node& s) {
  const double rate = s.capacity.rate_at(engine_.now());
  if (cfg_.service == ServiceDistribution::Deterministic) return 1.0 / rate;
  return s.service->exponential(rate);
}

void Simulator::start_service(NodeId n) {
  Node& s = nodes_[n];
  if (s.busy || s.queue.empty()) return;
  s.current = s.queue.pop();
  double st = service_time(s);
  if (!s.current.counted) st *= cfg_.reject_cost;
  s.busy = true;
  const double now = engine_.now();
  s.meter.add_busy(now, now + st);
  engine_.schedule(now + st, EventKind::ServiceCompletion, n, 0);
}

void Simulator::service_done(NodeId n) {
  Node& s = nodes_[n];
  s.busy = false;
  const QueueEntry e = s.current;
  const auto i = static_cast<std::int32_t>(e.ref);
  if (e.counted) {
    s.queue.finish_counted(e);
    ++s.served;
    ++result_.report.messages_served;
    const Packet& p = packets_[static_cast<std::size_t>(i)];
    const double sojourn = engine_.now() - p.enqueued_at;
    s.sojourn_sum += sojourn;
    ++s.sojourn_n;
    if (n == sojourn_node_) {
      result_.sojourns.push_back({p.enqueued_at, engine_.now(), p.msg.kind, p.msg.copy_index});
    }
  }
  s.meter.prune(engine_.now());
  proxy_serve(n, i);
  start_service(n);
}

void Simulator::proxy_serve(NodeId n, std::int32_t i) {
  Packet& p = packets_[static_cast<std::size_t>(i)];
  Call& c = calls_[p.msg.call_id];
  const int pos = p.to_pos;
  auto& report = result_.report;

  if (p.reject_job) {
    const auto ra = p.msg.retry_after;
    const bool red = p.msg.redundant;
    free_packet(i);
    reject_upstream(c, pos, ra, red);
    return;
  }
  if (p.self_copy) {
    const Timer& t = timers_[static_cast<std::size_t>(p.timer)];
    if (!t.armed || nodes_[n].suppression.suppressed(t.to, engine_.now())) {
      free_packet(i);
      return;
    }
    p.self_copy = false;
    const auto to_pos = t.to_pos;
    readdress(i, c, pos, to_pos);
    packets_[static_cast<std::size_t>(i)].msg.to = t.to;
    send_link(i);
    return;
  }

  const bool from_up = p.from_pos < pos;
  switch (p.msg.kind) {
    case MessageKind::Invite: {
      if (!from_up) break;
      const bool red = p.msg.redundant;
      free_packet(i);
      const std::int32_t t = new_packet(c, MessageKind::Trying100, Method::Invite, pos, pos - 1, 0, red);
      if (red) ++report.redundant_responses;
      send_link(t);
      Hop& h = c.hop[static_cast<std::size_t>(pos)];
      if (!h.seen) {
        h.seen = true;
        forward_invite(c, pos);
      }
      return;
    }
    case MessageKind::Trying100:
      free_packet(i);
      return;
    case MessageKind::Unavailable503:
      handle_503(c, pos, i);
      return;
    case MessageKind::Ring180:
    case MessageKind::Ok200:
      if (from_up) break;
      forward_up(c, pos, i);
      return;
    case MessageKind::Ack:
    case MessageKind::Bye:
      if (!from_up) break;
      forward_request(c, pos, i);
      return;
  }
  ++report.stale_messages;
  free_packet(i);
}

void Simulator::forward_up(Call& c, int pos, std::int32_t i) {
  Packet& p = packets_[static_cast<std::size_t>(i)];
  if (p.timer >= 0) {
    --timers_[static_cast<std::size_t>(p.timer)].refs;
    release_timer(p.timer);
    p.timer = -1;
  }
  readdress(i, c, pos, pos - 1);
  send_link(i);
}

void Simulator::reject_upstream(Call& c, int pos, std::optional<double> retry_after, bool redundant) {
  const std::int32_t r = new_packet(c, MessageKind::Unavailable503, Method::Invite, pos, pos - 1, 0, redundant);
  packets_[static_cast<std::size_t>(r)].msg.retry_after = retry_after;
  if (redundant) ++result_.report.redundant_responses;
  if (pos == host_pos_) release_window(c);
  send_link(r);
}

void Simulator::forward_invite(Call& c, int pos) {
  const double now = engine_.now();
  const int next = pos + 1;
  const auto ni = static_cast<std::size_t>(next);
  if (next == cluster_pos_ && c.member < 0) {
    const auto& view = balancer_->view();
    if (traces_.dispatch) {
      std::vector<double> metric(view.size());
      for (std::size_t k = 0; k < view.size(); ++k) {
        switch (balancer_->algorithm()) {
          case BalancerAlgorithm::Cjsq: metric[k] = static_cast<double>(view.active_calls[k]); break;
          case BalancerAlgorithm::Tjsq: metric[k] = static_cast<double>(view.active_transactions[k]); break;
          case BalancerAlgorithm::Tlwl: metric[k] = view.work_left[k]; break;
        }
      }
      const std::size_t chosen = balancer_->dispatch(c.id);
      result_.dispatches.push_back({now, c.id, balancer_->algorithm(), chosen, std::move(metric)});
    } else {
      balancer_->dispatch(c.id);
    }
    c.member = static_cast<int>(balancer_->server_of(c.id));
    c.route[ni] = members_[static_cast<std::size_t>(c.member)];
  }
  Node& self = nodes_[c.route[static_cast<std::size_t>(pos)]];
  if (self.suppression.suppressed(c.route[ni], now)) {
    const bool can_reroute = cfg_.reroute && alt_ != kNoNode && next == last_proxy_pos_ &&
                             c.route[ni] != alt_ && !self.suppression.suppressed(alt_, now);
    if (!can_reroute) {
      reject_upstream(c, pos, std::nullopt, false);
      return;
    }
    c.route[ni] = alt_;
    c.hop[ni] = Hop{};
  }
  const std::int32_t i = new_packet(c, MessageKind::Invite, Method::Invite, pos, next, 0, false);
  Hop& h = c.hop[static_cast<std::size_t>(pos)];
  h.timer = arm_timer(c, pos, next, MessageKind::Invite, Method::Invite);
  attach_timer(i, h.timer);
  send_link(i);
}

void Simulator::forward_request(Call& c, int pos, std::int32_t i) {
  const int next = pos + 1;
  const NodeId to = c.route[static_cast<std::size_t>(next)];
  Node& self = nodes_[c.route[static_cast<std::size_t>(pos)]];
  Packet& p = packets_[static_cast<std::size_t>(i)];
  if (next == cluster_pos_ && c.member < 0) {
    ++result_.report.stale_messages;
    free_packet(i);
    return;
  }
  if (self.suppression.suppressed(to, engine_.now())) {
    p.to_pos = static_cast<std::uint8_t>(pos);
    engine_.schedule(*self.suppression.until(to), EventKind::HoldRelease,
                     c.route[static_cast<std::size_t>(pos)], static_cast<std::uint64_t>(i));
    return;
  }
  if (pos > 0 && p.timer >= 0) {
    // A proxy forwards end-to-end requests statelessly.
    --timers_[static_cast<std::size_t>(p.timer)].refs;
    release_timer(p.timer);
    p.timer = -1;
  }
  if (next == cluster_pos_ && p.msg.kind == MessageKind::Bye && p.msg.copy_index == 0) {
    balancer_->transaction_started(c.id, Method::Bye);
  }
  readdress(i, c, pos, next);
  send_link(i);
}

void Simulator::handle_503(Call& c, int pos, std::int32_t i) {
  Packet& p = packets_[static_cast<std::size_t>(i)];
  const NodeId down = p.msg.from;
  Node& self = nodes_[c.route[static_cast<std::size_t>(pos)]];
  if (p.msg.retry_after) {
    if (*p.msg.retry_after < 0.0) ++result_.report.protocol_errors;
    else suppress(c.route[static_cast<std::size_t>(pos)], down, *p.msg.retry_after);
  }
  const auto ni = static_cast<std::size_t>(pos + 1);
  if (cfg_.reroute && alt_ != kNoNode && pos + 1 == last_proxy_pos_ && down != alt_ &&
      !self.suppression.suppressed(alt_, engine_.now())) {
    free_packet(i);
    c.route[ni] = alt_;
    c.hop[ni] = Hop{};
    forward_invite(c, pos);
    return;
  }
  forward_up(c, pos, i);
}

// ---------------------------------------------------------------------------
// Control and sampling

double Simulator::retx_probability(const Node& n) const {
  switch (ctl_) {
    case ControllerName::Rtqc:
      if (!n.retx.tuned) return 1.0;
      return rtqc_probability(static_cast<double>(n.armed_timers), n.retx.rtqc);
    case ControllerName::Rrrc:
    case ControllerName::Rtdc:
      return n.retx.pi.output;
    default:
      return 1.0;
  }
}

void Simulator::control_tick() {
  const double now = engine_.now();
  const auto& k = cfg_.controller;
  if (host_ != kNoNode) {
    Node& s = nodes_[host_];
    const double rho = s.meter.occupancy(now, k.meter_window);
    const double lambda = static_cast<double>(s.new_calls_in_tick) / tick_;
    switch (ctl_) {
      case ControllerName::Occupancy:
        s.reject_p = occupancy_update(s.reject_p, rho, k.rho_target, k.gain);
        log(s.name, "rho", rho);
        log(s.name, "p_reject", s.reject_p);
        break;
      case ControllerName::RateOccupancy: {
        const double target = rate_target_from_occupancy(lambda, rho, k.rho_target, s.capacity.base_rate());
        limiter_->set_rate(target, now);
        log(s.name, "rho", rho);
        log(s.name, "target_rate", target);
        break;
      }
      case ControllerName::RateDelay: {
        const double d = s.sojourn_n ? s.sojourn_sum / static_cast<double>(s.sojourn_n)
                                     : static_cast<double>(s.queue.size()) / s.capacity.rate_at(now);
        const double target = rate_target_from_delay(lambda, d, k.d_target, s.capacity.base_rate());
        limiter_->set_rate(target, now);
        log(s.name, "delay", d);
        log(s.name, "target_rate", target);
        break;
      }
      case ControllerName::BangBang:
      case ControllerName::RetryAfter:
        log(s.name, "overload", s.bangbang.mode == BangBangState::Mode::Overload ? 1.0 : 0.0);
        break;
      case ControllerName::Window:
        log(s.name, "outstanding", s.window.outstanding);
        break;
      default:
        break;
    }
    s.new_calls_in_tick = 0;
    s.sojourn_sum = 0.0;
    s.sojourn_n = 0;
  }

  if (is_retransmission_control(ctl_)) {
    const double horizon = k.horizon > 0.0 ? k.horizon : hbh_.timeout;
    for (auto& n : nodes_) {
      auto& r = n.retx;
      switch (ctl_) {
        case ControllerName::Rtqc: {
          const double rate = static_cast<double>(r.originals_in_tick) / tick_;
          r.departure_rate = r.tuned ? (1.0 - k.tuning_gain) * r.departure_rate + k.tuning_gain * rate : rate;
          const auto [lo, hi] = rtqc_tune_thresholds(r.departure_rate, r.rtqc, cfg_.t1, horizon);
          r.rtqc.q_rmin = lo;
          r.rtqc.q_rmax = hi;
          r.tuned = true;
          log(n.name, "q_r", static_cast<double>(n.armed_timers));
          log(n.name, "p_retx", retx_probability(n));
          break;
        }
        case ControllerName::Rrrc: {
          const double lo = now - k.ratio_window;
          while (!r.copies.empty() && r.copies.front().first < lo) r.copies.pop_front();
          while (!r.sends.empty() && r.sends.front() < lo) r.sends.pop_front();
          const auto red = static_cast<double>(
              std::count_if(r.copies.begin(), r.copies.end(), [](const auto& e) { return e.second; }));
          const double denom = static_cast<double>(
              k.denominator == RatioDenominator::Retransmissions ? r.copies.size() : r.sends.size());
          const double ratio = denom > 0.0 ? red / denom : 0.0;
          pi_update(r.pi, ratio, tick_);
          log(n.name, "redundant_ratio", ratio);
          log(n.name, "p_retx", r.pi.output);
          break;
        }
        case ControllerName::Rtdc: {
          const auto est = estimate_round_trip_delay(r.delay_samples, k.alpha, r.delay);
          r.delay_samples.clear();
          r.delay = est.value;
          if (r.delay) {
            pi_update(r.pi, *r.delay, tick_);
            log(n.name, "delay", *r.delay);
          }
          log(n.name, "p_retx", r.pi.output);
          break;
        }
        default:
          break;
      }
      r.originals_in_tick = 0;
    }
  }
  engine_.schedule(now + tick_, EventKind::ControlTick);
}

void Simulator::sample_tick() {
  const double now = engine_.now();
  for (auto& s : nodes_) {
    if (s.role != Role::Proxy) continue;
    SeriesRow row;
    row.t = now;
    row.server_id = s.name;
    row.q = s.queue.size();
    row.q_r = s.armed_timers;
    row.rho = s.meter.occupancy(now, cfg_.controller.meter_window);
    row.served_cum = s.served;
    row.rejected_cum = s.rejected;
    row.dropped_cum = s.dropped;
    row.arrivals_cum = s.arrivals;
    if (row.arrivals_cum != row.served_cum + row.rejected_cum + row.dropped_cum + row.q) {
      throw ConsistencyError("message conservation violated at " + s.name);
    }
    result_.report.series.push_back(std::move(row));
  }
  engine_.schedule(now + cfg_.sample, EventKind::SampleTick);
}

SimulationResult Simulator::run() {
  auto arrivals = generate_calls(cfg_.workload, rng_.stream("arrivals"));
  arrivals.erase(std::remove_if(arrivals.begin(), arrivals.end(),
                                [&](double t) { return t >= cfg_.duration; }),
                 arrivals.end());
  calls_.resize(arrivals.size());
  for (std::size_t k = 0; k < arrivals.size(); ++k) {
    Call& c = calls_[k];
    c.id = k;
    c.session.call_id = k;
    c.session.start = arrivals[k];
    c.session.teardown = cfg_.teardown;
    std::size_t len = 0;
    c.route[len++] = uacs_[k % uacs_.size()];
    for (NodeId p : proxies_) c.route[len++] = p;
    if (cluster_pos_ > 0) c.route[len++] = kNoNode;  // chosen at dispatch
    c.route[len++] = uas_;
    c.len = static_cast<std::uint8_t>(len);
    engine_.schedule(arrivals[k], EventKind::CallArrival, c.route[0], k);
  }
  if (ctl_ != ControllerName::None) engine_.schedule(tick_, EventKind::ControlTick);
  engine_.schedule(0.0, EventKind::SampleTick);

  const auto handler = [this](const SimEvent& ev) { handle(ev); };
  try {
    engine_.run_until(cfg_.duration, handler);
    if (cfg_.drain) {
      const double bound = cfg_.duration + 3.0 * hbh_.timeout + cfg_.hold + 10.0;
      while (terminal_ < calls_.size() && engine_.now() <= bound && engine_.step(handler)) {
      }
    }
  } catch (const SimulationError&) {
    throw;
  } catch (const std::exception& e) {
    throw SimulationError(engine_.now(), e.what());
  }

  auto& rep = result_.report;
  rep.duration = cfg_.duration;
  const double stop = engine_.now();
  rep.goodput.assign(static_cast<std::size_t>(std::ceil(std::max(stop, cfg_.duration))) + 1, 0.0);
  std::vector<double> delays;
  for (const Call& c : calls_) {
    if (!c.session.terminal()) continue;
    ++rep.offered;
    CallOutcome o = *c.session.outcome;
    if (o == CallOutcome::TimedOut && c.had_drop) o = CallOutcome::Dropped;
    const double end = c.session.end.value_or(stop);
    switch (o) {
      case CallOutcome::Success:
        ++rep.completed;
        rep.goodput[static_cast<std::size_t>(end)] += 1.0;
        break;
      case CallOutcome::Rejected: ++rep.rejected; break;
      case CallOutcome::TimedOut: ++rep.timed_out; break;
      case CallOutcome::Dropped: ++rep.dropped_calls; break;
    }
    CallRow row{c.id, c.session.start, end, o, std::nullopt, {}};
    if (c.ok_at) {
      row.setup_delay = *c.ok_at - c.session.start;
      if (o == CallOutcome::Success) delays.push_back(*row.setup_delay);
    }
    if (c.member >= 0) row.server = nodes_[members_[static_cast<std::size_t>(c.member)]].name;
    rep.calls.push_back(std::move(row));
  }
  while (rep.goodput.size() > 1 && rep.goodput.back() == 0.0 &&
         static_cast<double>(rep.goodput.size()) > std::ceil(cfg_.duration)) {
    rep.goodput.pop_back();
  }
  rep.blocking = blocking_probability(rep.offered, rep.offered - rep.completed);
  rep.setup_delay = summarize_delays(std::move(delays));
  result_.event_hash = engine_.trace_hash();
  result_.events = engine_.processed();
  return std::move(result_);
}

}  // namespace

SimulationResult simulate(const ScenarioConfig& cfg, const TraceOptions& traces) {
  validate(cfg);
  Simulator sim(cfg, traces);
  return sim.run();
}

MetricsReport run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& out) {
  TraceOptions traces;
  traces.dispatch = cfg.cluster > 0;
  SimulationResult res = simulate(cfg, traces);
  write_report(out, res.report);
  if (traces.dispatch) {
    // calls.csv has a fixed schema, so member assignment goes here.
    std::ofstream f(out / "dispatch.csv", std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + (out / "dispatch.csv").string() + " for writing");
    f << "t,call_id,algorithm,server,metric\n";
    for (const auto& d : res.dispatches) {
      f << format_number(d.t) << ',' << d.call << ',' << to_string(d.algorithm) << ",c" << d.chosen + 1 << ',';
      for (std::size_t i = 0; i < d.metric.size(); ++i) f << (i ? ";" : "") << format_number(d.metric[i]);
      f << '\n';
    }
  }
  if (cfg.fluid) {
    const auto traj = run_fluid(cfg);
    std::ofstream f(out / "fluid.csv", std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + (out / "fluid.csv").string() + " for writing");
    write_fluid_csv(f, traj);
  }
  return std::move(res.report);
}

}  // namespace sipov
