#include <gtest/gtest.h>

#include "sipov/errors.hpp"
#include "sipov/server.hpp"

using namespace sipov;

TEST(Capacity, SlowdownWindow) {
  CapacityProfile p(200.0, {{10.0, 20.0, 0.5}});
  EXPECT_EQ(p.rate_at(0.0), 200.0);
  EXPECT_EQ(p.rate_at(10.0), 100.0);
  EXPECT_EQ(p.rate_at(19.999), 100.0);
  EXPECT_EQ(p.rate_at(20.0), 200.0);
  EXPECT_DOUBLE_EQ(1.0 / p.rate_at(5.0), 0.005);
  EXPECT_DOUBLE_EQ(1.0 / p.rate_at(15.0), 2 * (1.0 / p.rate_at(5.0)));
}

TEST(Occupancy, PartialWindow) {
  OccupancyMeter m;
  m.add_busy(0.2, 0.5);
  m.add_busy(0.7, 0.85);
  EXPECT_NEAR(m.occupancy(1.0, 1.0), 0.45, 1e-12);
}

TEST(Occupancy, IdleAndSaturated) {
  OccupancyMeter idle;
  EXPECT_EQ(idle.occupancy(5.0, 1.0), 0.0);
  OccupancyMeter busy;
  for (int i = 0; i < 1000; ++i) busy.add_busy(i * 0.005, (i + 1) * 0.005);
  EXPECT_NEAR(busy.occupancy(5.0, 1.0), 1.0, 1e-9);
  EXPECT_THROW(busy.occupancy(5.0, 0.0), ParameterError);
}

TEST(Occupancy, FutureBusyIsNotCounted) {
  OccupancyMeter m;
  m.add_busy(0.5, 3.0);
  EXPECT_NEAR(m.occupancy(1.0, 1.0), 0.5, 1e-12);
}

TEST(Suppression, Interval) {
  SuppressionTable t;
  t.suppress(3, 15.0);
  EXPECT_TRUE(t.suppressed(3, 10.0));
  EXPECT_TRUE(t.suppressed(3, 14.999));
  EXPECT_FALSE(t.suppressed(3, 15.0));
  EXPECT_FALSE(t.suppressed(4, 10.0));
  t.suppress(3, 12.0);  // never shortens
  EXPECT_EQ(*t.until(3), 15.0);
}

TEST(Queue, BufferLimit) {
  ServerQueue q(100);
  for (int i = 0; i < 100; ++i) {
    ASSERT_TRUE(q.has_room());
    q.push({static_cast<std::uint64_t>(i)});
  }
  EXPECT_FALSE(q.has_room());
  EXPECT_EQ(q.size(), 100u);
}

TEST(Queue, UnlimitedAlwaysHasRoom) {
  ServerQueue q;
  for (int i = 0; i < 100000; ++i) q.push({static_cast<std::uint64_t>(i)});
  EXPECT_TRUE(q.has_room());
}

TEST(Queue, RejectionWorkIsNotAMessage) {
  ServerQueue q(1);
  q.push({1, false});
  EXPECT_EQ(q.size(), 0u);
  EXPECT_EQ(q.pending_rejections(), 1u);
  EXPECT_TRUE(q.has_room());
}

TEST(Queue, PriorityServesHighFirst) {
  ServerQueue q(ServerQueue::kUnlimited, true);
  q.push({1, true, PriorityClass::Low});
  q.push({2, true, PriorityClass::Low});
  q.push({3, true, PriorityClass::High});
  EXPECT_EQ(q.low_size(), 2u);
  auto e = q.pop();
  EXPECT_EQ(e.ref, 3u);
  q.finish_counted(e);
  e = q.pop();
  EXPECT_EQ(e.ref, 1u);
  q.finish_counted(e);
  EXPECT_EQ(q.low_size(), 1u);
}

TEST(Queue, FifoWithoutPriority) {
  ServerQueue q;
  q.push({1, true, PriorityClass::Low});
  q.push({2, true, PriorityClass::High});
  EXPECT_EQ(q.pop().ref, 1u);
  EXPECT_EQ(q.pop().ref, 2u);
  EXPECT_THROW(q.pop(), ConsistencyError);
}
