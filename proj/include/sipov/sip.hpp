#pragma once

// SIP message and session semantics: the INVITE/BYE call flow, the two
// retransmission schedules and redundant/non-redundant classification.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace sipov {

using CallId = std::uint64_t;
using NodeId = std::uint32_t;
using InstanceId = std::uint64_t;

inline constexpr NodeId kNoNode = 0xffffffffu;

enum class MessageKind : std::uint8_t { Invite, Trying100, Ring180, Ok200, Ack, Bye, Unavailable503 };

/// Transaction a message belongs to. Responses carry the method they answer.
enum class Method : std::uint8_t { Invite, Bye };

std::string_view to_string(MessageKind kind);

constexpr bool is_request(MessageKind k) {
  return k == MessageKind::Invite || k == MessageKind::Ack || k == MessageKind::Bye;
}
constexpr bool is_response(MessageKind k) { return !is_request(k); }
constexpr bool is_final_response(MessageKind k) {
  return k == MessageKind::Ok200 || k == MessageKind::Unavailable503;
}

struct SipMessage {
  CallId call_id = 0;
  MessageKind kind = MessageKind::Invite;
  Method method = Method::Invite;
  NodeId from = kNoNode;
  NodeId to = kNoNode;
  std::uint8_t copy_index = 0;  // 0 = original, k = k-th retransmission
  double created_at = 0.0;
  InstanceId instance_id = 0;
  /// Redundant retransmission, or a response to one.
  bool redundant = false;
  std::optional<double> retry_after;  // 503 only
};

// ---------------------------------------------------------------------------
// Retransmission schedules

enum class TimerKind : std::uint8_t { HopByHop, EndToEnd };

inline constexpr int kMaxHopByHopRetransmissions = 6;
inline constexpr int kMaxEndToEndRetransmissions = 10;

constexpr int max_retransmissions(TimerKind kind) {
  return kind == TimerKind::HopByHop ? kMaxHopByHopRetransmissions : kMaxEndToEndRetransmissions;
}

struct RetransmissionSchedule {
  std::vector<double> offsets;  // seconds after the original send
  double timeout = 0.0;         // 64 * T1
};

/// Send offsets of every retransmission of an unanswered message.
/// HopByHop doubles the interval from T1 without a cap; EndToEnd caps it at T2.
/// Both stop before the 64*T1 transaction timeout.
RetransmissionSchedule retransmission_schedule(TimerKind kind, double t1, double t2);

/// Which timer guards a message of this kind, if any. Ring180, Ack and the
/// other responses carry no timer of their own.
std::optional<TimerKind> guarding_timer(MessageKind kind, Method method);

// ---------------------------------------------------------------------------
// Retransmission classification

enum class RetransmissionClass : std::uint8_t { NonRedundant, Redundant };

std::string_view to_string(RetransmissionClass c);

/// Fate of each copy of one (call, kind, hop) sent so far, indexed by copy_index.
struct DeliveryRecord {
  struct Copy {
    bool sent = false;  // copies suppressed by a controller never reach the link
    bool lost = false;  // lost on the link or dropped at a full buffer
  };
  std::vector<Copy> copies;

  void record_sent(int copy_index);
  void record_lost(int copy_index);
};

/// A copy is NonRedundant iff every earlier copy that was sent got lost
/// before reaching the receiver.
RetransmissionClass classify_retransmission(const SipMessage& copy, const DeliveryRecord& log);
RetransmissionClass classify_retransmission(int copy_index, const DeliveryRecord& log);

// ---------------------------------------------------------------------------
// Call session (UAC view of the call flow)

enum class SessionState : std::uint8_t {
  Idle,
  InviteSent,
  Proceeding,
  Ringing,
  OkReceived,
  Established,
  ByeSent,
  Completed,
  Failed
};

enum class CallOutcome : std::uint8_t { Success, Rejected, TimedOut, Dropped };

std::string_view to_string(SessionState s);
std::string_view to_string(CallOutcome o);

struct CallSession {
  CallId call_id = 0;
  SessionState state = SessionState::Idle;
  std::optional<CallOutcome> outcome;
  double start = 0.0;
  std::optional<double> end;
  bool teardown = true;  // false: the call succeeds once established

  bool terminal() const { return outcome.has_value(); }
};

enum class SessionEventType : std::uint8_t { Start, Receive, Answer, HangUp, Timeout };

struct SessionEvent {
  SessionEventType type = SessionEventType::Start;
  MessageKind kind = MessageKind::Invite;  // Receive
  Method method = Method::Invite;          // Receive / Timeout

  static SessionEvent start() { return {SessionEventType::Start}; }
  static SessionEvent receive(MessageKind k, Method m = Method::Invite) {
    return {SessionEventType::Receive, k, m};
  }
  static SessionEvent answer() { return {SessionEventType::Answer}; }
  static SessionEvent hang_up() { return {SessionEventType::HangUp}; }
  static SessionEvent timeout(Method m) { return {SessionEventType::Timeout, MessageKind::Invite, m}; }
};

struct Emission {
  MessageKind kind;
  Method method;
};

struct SessionStep {
  bool stale = false;  // event discarded, no state change
  std::vector<Emission> emit;
  std::optional<Method> arm;     // arm the timer guarding this method's request
  std::optional<Method> disarm;  // disarm it
};

/// Advances the UAC side of a call. Illegal events are reported stale and
/// leave the session untouched.
SessionStep advance_session(CallSession& session, const SessionEvent& event, double now);

}  // namespace sipov
