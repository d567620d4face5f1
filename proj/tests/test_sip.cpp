#include <gtest/gtest.h>

#include <random>

#include "sipov/errors.hpp"
#include "sipov/sip.hpp"

using namespace sipov;

namespace {

// Independent recomputation of the doubling rule.
std::vector<double> schedule_oracle(bool capped, double t1, double t2, int max_copies) {
  std::vector<double> out;
  double interval = t1;
  double at = 0.0;
  for (int k = 0; k < max_copies; ++k) {
    at += interval;
    if (at >= 64 * t1) break;
    out.push_back(at);
    interval = capped ? std::min(2 * interval, t2) : 2 * interval;
  }
  return out;
}

}  // namespace

TEST(Schedule, HopByHopDefaults) {
  const auto s = retransmission_schedule(TimerKind::HopByHop, 0.5, 4.0);
  EXPECT_EQ(s.offsets, (std::vector<double>{0.5, 1.5, 3.5, 7.5, 15.5, 31.5}));
  EXPECT_EQ(s.timeout, 32.0);
}

TEST(Schedule, EndToEndDefaults) {
  const auto s = retransmission_schedule(TimerKind::EndToEnd, 0.5, 4.0);
  EXPECT_EQ(s.offsets,
            (std::vector<double>{0.5, 1.5, 3.5, 7.5, 11.5, 15.5, 19.5, 23.5, 27.5, 31.5}));
  EXPECT_EQ(s.timeout, 32.0);
}

TEST(Schedule, HopByHopIgnoresT2) {
  EXPECT_EQ(retransmission_schedule(TimerKind::HopByHop, 0.5, 0.5).offsets,
            retransmission_schedule(TimerKind::HopByHop, 0.5, 4.0).offsets);
}

TEST(Schedule, RejectsBadTimers) {
  EXPECT_THROW(retransmission_schedule(TimerKind::HopByHop, 0.0, 4.0), ParameterError);
  EXPECT_THROW(retransmission_schedule(TimerKind::EndToEnd, -1.0, 4.0), ParameterError);
  EXPECT_THROW(retransmission_schedule(TimerKind::EndToEnd, 0.5, 0.25), ParameterError);
}

TEST(Schedule, MatchesOracleAndStaysBeforeTimeout) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> t1d(0.05, 2.0);
  std::uniform_real_distribution<double> mult(1.0, 20.0);
  for (int i = 0; i < 500; ++i) {
    const double t1 = t1d(gen);
    const double t2 = t1 * mult(gen);
    for (auto kind : {TimerKind::HopByHop, TimerKind::EndToEnd}) {
      const auto s = retransmission_schedule(kind, t1, t2);
      const auto want = schedule_oracle(kind == TimerKind::EndToEnd, t1, t2, max_retransmissions(kind));
      ASSERT_EQ(s.offsets.size(), want.size());
      for (std::size_t k = 0; k < want.size(); ++k) EXPECT_NEAR(s.offsets[k], want[k], 1e-12);
      EXPECT_EQ(s.timeout, 64 * t1);
      for (std::size_t k = 1; k < s.offsets.size(); ++k) EXPECT_GT(s.offsets[k], s.offsets[k - 1]);
      if (!s.offsets.empty()) EXPECT_LT(s.offsets.back(), s.timeout);
      EXPECT_LE(static_cast<int>(s.offsets.size()), max_retransmissions(kind));
    }
  }
}

TEST(GuardingTimer, OnlyInviteOkAndBye) {
  EXPECT_EQ(guarding_timer(MessageKind::Invite, Method::Invite), TimerKind::HopByHop);
  EXPECT_EQ(guarding_timer(MessageKind::Ok200, Method::Invite), TimerKind::EndToEnd);
  EXPECT_EQ(guarding_timer(MessageKind::Bye, Method::Bye), TimerKind::EndToEnd);
  EXPECT_FALSE(guarding_timer(MessageKind::Ring180, Method::Invite));
  EXPECT_FALSE(guarding_timer(MessageKind::Ack, Method::Invite));
  EXPECT_FALSE(guarding_timer(MessageKind::Trying100, Method::Invite));
}

TEST(Classification, LostOriginalMakesCopyNonRedundant) {
  DeliveryRecord log;
  log.record_sent(0);
  log.record_lost(0);
  EXPECT_EQ(classify_retransmission(1, log), RetransmissionClass::NonRedundant);
}

TEST(Classification, QueuedOriginalMakesCopyRedundant) {
  DeliveryRecord log;
  log.record_sent(0);  // still sitting in the downstream queue
  EXPECT_EQ(classify_retransmission(1, log), RetransmissionClass::Redundant);
}

TEST(Classification, DeliveredOriginalWithLostResponseIsRedundant) {
  DeliveryRecord log;
  log.record_sent(0);  // delivered; only the reply went missing
  EXPECT_EQ(classify_retransmission(1, log), RetransmissionClass::Redundant);
}

TEST(Classification, OriginalIsNotARetransmission) {
  DeliveryRecord log;
  log.record_sent(0);
  EXPECT_THROW(classify_retransmission(0, log), ClassificationError);
  SipMessage m;
  m.copy_index = 0;
  EXPECT_THROW(classify_retransmission(m, log), ClassificationError);
}

TEST(Classification, PureFunctionOfLog) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 200; ++trial) {
    DeliveryRecord log;
    const int copies = 1 + static_cast<int>(gen() % 8);
    bool any_arrived = false;
    for (int k = 0; k < copies; ++k) {
      log.record_sent(k);
      if (gen() % 2) log.record_lost(k);
      else any_arrived = true;
    }
    const auto a = classify_retransmission(copies, log);
    const auto b = classify_retransmission(copies, log);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, any_arrived ? RetransmissionClass::Redundant : RetransmissionClass::NonRedundant);
  }
}

TEST(Session, TryingDisarmsInvite) {
  CallSession s;
  auto st = advance_session(s, SessionEvent::start(), 0.0);
  ASSERT_EQ(st.emit.size(), 1u);
  EXPECT_EQ(st.emit[0].kind, MessageKind::Invite);
  EXPECT_EQ(st.arm, Method::Invite);
  st = advance_session(s, SessionEvent::receive(MessageKind::Trying100), 0.1);
  EXPECT_EQ(s.state, SessionState::Proceeding);
  EXPECT_EQ(st.disarm, Method::Invite);
}

TEST(Session, AnswerEmitsAck) {
  CallSession s;
  s.state = SessionState::OkReceived;
  const auto st = advance_session(s, SessionEvent::answer(), 1.0);
  EXPECT_EQ(s.state, SessionState::Established);
  ASSERT_EQ(st.emit.size(), 1u);
  EXPECT_EQ(st.emit[0].kind, MessageKind::Ack);
}

TEST(Session, InviteTimeoutFails) {
  CallSession s;
  advance_session(s, SessionEvent::start(), 0.0);
  advance_session(s, SessionEvent::timeout(Method::Invite), 32.0);
  EXPECT_EQ(s.state, SessionState::Failed);
  EXPECT_EQ(s.outcome, CallOutcome::TimedOut);
  EXPECT_EQ(s.end, 32.0);
}

TEST(Session, FullFlowWithTeardown) {
  CallSession s;
  advance_session(s, SessionEvent::start(), 0.0);
  advance_session(s, SessionEvent::receive(MessageKind::Trying100), 0.1);
  advance_session(s, SessionEvent::receive(MessageKind::Ring180), 0.2);
  EXPECT_EQ(s.state, SessionState::Ringing);
  advance_session(s, SessionEvent::receive(MessageKind::Ok200), 0.3);
  EXPECT_EQ(s.state, SessionState::OkReceived);
  advance_session(s, SessionEvent::answer(), 0.3);
  EXPECT_FALSE(s.terminal());
  auto st = advance_session(s, SessionEvent::hang_up(), 1.3);
  EXPECT_EQ(s.state, SessionState::ByeSent);
  EXPECT_EQ(st.arm, Method::Bye);
  st = advance_session(s, SessionEvent::receive(MessageKind::Ok200, Method::Bye), 1.4);
  EXPECT_EQ(s.state, SessionState::Completed);
  EXPECT_EQ(s.outcome, CallOutcome::Success);
  EXPECT_EQ(st.disarm, Method::Bye);
}

TEST(Session, WithoutTeardownSucceedsWhenEstablished) {
  CallSession s;
  s.teardown = false;
  advance_session(s, SessionEvent::start(), 0.0);
  advance_session(s, SessionEvent::receive(MessageKind::Ok200), 0.3);
  advance_session(s, SessionEvent::answer(), 0.3);
  EXPECT_EQ(s.outcome, CallOutcome::Success);
}

TEST(Session, RejectionAndStaleEvents) {
  CallSession s;
  advance_session(s, SessionEvent::start(), 0.0);
  const auto bye_ok = advance_session(s, SessionEvent::receive(MessageKind::Ok200, Method::Bye), 0.1);
  EXPECT_TRUE(bye_ok.stale);
  EXPECT_EQ(s.state, SessionState::InviteSent);
  advance_session(s, SessionEvent::receive(MessageKind::Unavailable503), 0.2);
  EXPECT_EQ(s.outcome, CallOutcome::Rejected);
  const auto late = advance_session(s, SessionEvent::receive(MessageKind::Ok200), 0.3);
  EXPECT_TRUE(late.stale);
  EXPECT_EQ(s.outcome, CallOutcome::Rejected);
}

TEST(Session, RepeatedOkIsReAcked) {
  CallSession s;
  advance_session(s, SessionEvent::start(), 0.0);
  advance_session(s, SessionEvent::receive(MessageKind::Ok200), 0.3);
  advance_session(s, SessionEvent::answer(), 0.3);
  const auto st = advance_session(s, SessionEvent::receive(MessageKind::Ok200), 0.8);
  ASSERT_EQ(st.emit.size(), 1u);
  EXPECT_EQ(st.emit[0].kind, MessageKind::Ack);
  EXPECT_EQ(s.state, SessionState::Established);
}
