#include "sipov/sip.hpp"

#include <string>

#include "sipov/errors.hpp"

namespace sipov {

std::string_view to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::Invite: return "Invite";
    case MessageKind::Trying100: return "Trying100";
    case MessageKind::Ring180: return "Ring180";
    case MessageKind::Ok200: return "Ok200";
    case MessageKind::Ack: return "Ack";
    case MessageKind::Bye: return "Bye";
    case MessageKind::Unavailable503: return "Unavailable503";
  }
  return "?";
}

std::string_view to_string(RetransmissionClass c) {
  return c == RetransmissionClass::Redundant ? "Redundant" : "NonRedundant";
}

std::string_view to_string(SessionState s) {
  switch (s) {
    case SessionState::Idle: return "Idle";
    case SessionState::InviteSent: return "InviteSent";
    case SessionState::Proceeding: return "Proceeding";
    case SessionState::Ringing: return "Ringing";
    case SessionState::OkReceived: return "OkReceived";
    case SessionState::Established: return "Established";
    case SessionState::ByeSent: return "ByeSent";
    case SessionState::Completed: return "Completed";
    case SessionState::Failed: return "Failed";
  }
  return "?";
}

std::string_view to_string(CallOutcome o) {
  switch (o) {
    case CallOutcome::Success: return "Success";
    case CallOutcome::Rejected: return "Rejected";
    case CallOutcome::TimedOut: return "TimedOut";
    case CallOutcome::Dropped: return "Dropped";
  }
  return "?";
}

RetransmissionSchedule retransmission_schedule(TimerKind kind, double t1, double t2) {
  if (!(t1 > 0.0)) throw ParameterError("T1 must be positive");
  if (!(t2 >= t1)) throw ParameterError("T2 must be >= T1");

  RetransmissionSchedule s;
  s.timeout = 64.0 * t1;
  const int max_copies = max_retransmissions(kind);
  double interval = t1;
  double offset = 0.0;
  for (int k = 0; k < max_copies; ++k) {
    offset += interval;
    if (offset >= s.timeout) break;
    s.offsets.push_back(offset);
    interval *= 2.0;
    if (kind == TimerKind::EndToEnd && interval > t2) interval = t2;
  }
  return s;
}

std::optional<TimerKind> guarding_timer(MessageKind kind, Method method) {
  switch (kind) {
    case MessageKind::Invite: return TimerKind::HopByHop;
    case MessageKind::Bye: return TimerKind::EndToEnd;
    case MessageKind::Ok200:
      if (method == Method::Invite) return TimerKind::EndToEnd;
      return std::nullopt;
    default: return std::nullopt;
  }
}

void DeliveryRecord::record_sent(int copy_index) {
  if (copy_index < 0) throw ClassificationError("negative copy index");
  if (copies.size() <= static_cast<std::size_t>(copy_index)) copies.resize(copy_index + 1);
  copies[copy_index].sent = true;
}

void DeliveryRecord::record_lost(int copy_index) {
  if (copy_index < 0 || copies.size() <= static_cast<std::size_t>(copy_index) ||
      !copies[copy_index].sent) {
    throw ClassificationError("loss recorded for a copy that was never sent");
  }
  copies[copy_index].lost = true;
}

RetransmissionClass classify_retransmission(int copy_index, const DeliveryRecord& log) {
  if (copy_index <= 0) throw ClassificationError("originals are not retransmissions");
  if (log.copies.empty() || !log.copies.front().sent) {
    throw ClassificationError("delivery record does not cover the original");
  }
  const std::size_t limit = std::min<std::size_t>(copy_index, log.copies.size());
  for (std::size_t k = 0; k < limit; ++k) {
    const auto& c = log.copies[k];
    if (c.sent && !c.lost) return RetransmissionClass::Redundant;
  }
  return RetransmissionClass::NonRedundant;
}

RetransmissionClass classify_retransmission(const SipMessage& copy, const DeliveryRecord& log) {
  return classify_retransmission(copy.copy_index, log);
}

namespace {

bool awaiting_final(SessionState s) {
  return s == SessionState::InviteSent || s == SessionState::Proceeding ||
         s == SessionState::Ringing;
}

void finish(CallSession& session, SessionState state, CallOutcome outcome, double now) {
  session.state = state;
  session.outcome = outcome;
  session.end = now;
}

}  // namespace

SessionStep advance_session(CallSession& session, const SessionEvent& event, double now) {
  SessionStep step;
  const SessionState s = session.state;

  switch (event.type) {
    case SessionEventType::Start:
      if (s != SessionState::Idle) break;
      session.state = SessionState::InviteSent;
      session.start = now;
      step.emit.push_back({MessageKind::Invite, Method::Invite});
      step.arm = Method::Invite;
      return step;

    case SessionEventType::Answer:
      if (s != SessionState::OkReceived) break;
      session.state = SessionState::Established;
      step.emit.push_back({MessageKind::Ack, Method::Invite});
      if (!session.teardown) finish(session, SessionState::Established, CallOutcome::Success, now);
      return step;

    case SessionEventType::HangUp:
      if (s != SessionState::Established || session.terminal()) break;
      session.state = SessionState::ByeSent;
      step.emit.push_back({MessageKind::Bye, Method::Bye});
      step.arm = Method::Bye;
      return step;

    case SessionEventType::Timeout:
      if (event.method == Method::Invite && awaiting_final(s)) {
        finish(session, SessionState::Failed, CallOutcome::TimedOut, now);
        return step;
      }
      if (event.method == Method::Bye && s == SessionState::ByeSent) {
        finish(session, SessionState::Failed, CallOutcome::TimedOut, now);
        return step;
      }
      break;

    case SessionEventType::Receive:
      if (event.method == Method::Bye) {
        if (event.kind == MessageKind::Ok200 && s == SessionState::ByeSent) {
          finish(session, SessionState::Completed, CallOutcome::Success, now);
          step.disarm = Method::Bye;
          return step;
        }
        break;
      }
      switch (event.kind) {
        case MessageKind::Trying100:
          if (s != SessionState::InviteSent) break;
          session.state = SessionState::Proceeding;
          step.disarm = Method::Invite;
          return step;
        case MessageKind::Ring180:
          if (s != SessionState::InviteSent && s != SessionState::Proceeding) break;
          if (s == SessionState::InviteSent) step.disarm = Method::Invite;
          session.state = SessionState::Ringing;
          return step;
        case MessageKind::Ok200:
          if (awaiting_final(s)) {
            if (s == SessionState::InviteSent) step.disarm = Method::Invite;
            session.state = SessionState::OkReceived;
            return step;
          }
          // A retransmitted 2xx is acknowledged again while the call lives.
          if (s == SessionState::Established || s == SessionState::ByeSent) {
            step.emit.push_back({MessageKind::Ack, Method::Invite});
            return step;
          }
          break;
        case MessageKind::Unavailable503:
          if (!awaiting_final(s)) break;
          if (s == SessionState::InviteSent) step.disarm = Method::Invite;
          finish(session, SessionState::Failed, CallOutcome::Rejected, now);
          return step;
        default:
          break;
      }
      break;
  }

  step.stale = true;
  return step;
}

}  // namespace sipov
