#include <gtest/gtest.h>

#include <sstream>

#include "medsync/simnet/clock.hpp"
#include "medsync/simnet/network.hpp"

using namespace medsync;
using namespace medsync::simnet;

TEST(VirtualClock, AdvanceWithNothingPendingMovesTime) {
  VirtualClock clock;
  auto fired = clock.advance_to(from_seconds(3));
  EXPECT_TRUE(fired.empty());
  EXPECT_EQ(clock.now(), from_seconds(3));
  EXPECT_THROW(clock.advance_to(from_seconds(1)), std::invalid_argument);
}

TEST(VirtualClock, FiresInTimestampOrder) {
  VirtualClock clock;
  std::vector<int> order;
  clock.schedule_at(from_seconds(15), [&] { order.push_back(15); });
  clock.schedule_at(from_seconds(5), [&] { order.push_back(5); });
  clock.schedule_at(from_seconds(10), [&] { order.push_back(10); });
  clock.schedule_at(from_seconds(16), [&] { order.push_back(16); });
  auto fired = clock.advance_to(from_seconds(15));
  EXPECT_EQ(fired.size(), 3u);
  EXPECT_EQ(order, (std::vector<int>{5, 10, 15}));
  EXPECT_EQ(clock.pending(), 1u);
}

TEST(VirtualClock, TiesBreakByRegistrationOrder) {
  VirtualClock clock;
  std::string order;
  clock.schedule_at(from_seconds(1), [&] { order += "a"; });
  clock.schedule_at(from_seconds(1), [&] { order += "b"; });
  clock.schedule_at(from_seconds(1), [&] { order += "c"; });
  clock.advance_to(from_seconds(1));
  EXPECT_EQ(order, "abc");
}

TEST(VirtualClock, CallbacksMayScheduleWithinTheWindow) {
  VirtualClock clock;
  std::vector<double> at;
  std::function<void()> tick = [&] {
    at.push_back(to_seconds(clock.now()));
    if (at.size() < 4) clock.schedule_after(from_seconds(5), tick);
  };
  clock.schedule_at(from_seconds(5), tick);
  clock.advance_to(from_seconds(15));
  EXPECT_EQ(at, (std::vector<double>{5, 10, 15}));
  auto id = clock.schedule_after(from_seconds(1), [] { FAIL(); });
  EXPECT_TRUE(clock.cancel(id));
  clock.advance_to(from_seconds(100));
  EXPECT_EQ(at.size(), 4u);
}

TEST(Link, LatencyOnly) {
  LinkProfile p;
  p.latency = from_millis(50);
  Link l("a->b", p, 1);
  auto out = l.send(100, from_seconds(1.0));
  ASSERT_TRUE(out.delivered());
  EXPECT_EQ(out.deliver_at, from_seconds(1.05));
}

TEST(Link, PartitionWindowDrops) {
  LinkProfile p;
  p.partitions.push_back({from_seconds(120), from_seconds(180)});
  Link l("a->b", p, 1);
  EXPECT_EQ(l.send(10, from_seconds(150)).status, SendStatus::kDroppedPartition);
  EXPECT_TRUE(l.send(10, from_seconds(180)).delivered());
  EXPECT_TRUE(l.send(10, from_seconds(119.999)).delivered());
  EXPECT_FALSE(l.up_at(from_seconds(120)));
}

TEST(Link, FullLossDropsEverything) {
  LinkProfile p;
  p.drop_probability = 1.0;
  Link l("a->b", p, 9);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(l.send(10, from_seconds(i)).status, SendStatus::kDroppedLoss);
}

TEST(Link, JitterNeverReordersOrPrecedesSend) {
  LinkProfile p;
  p.latency = from_millis(40);
  p.jitter = from_millis(30);
  p.bandwidth_bps = 1e6;
  Link l("a->b", p, 42);
  SimTime last{0};
  for (int i = 0; i < 1000; ++i) {
    SimTime now = from_millis(i * 3);
    auto out = l.send(200, now);
    ASSERT_TRUE(out.delivered());
    ASSERT_GE(out.deliver_at, now);
    ASSERT_GE(out.deliver_at, last);
    last = out.deliver_at;
  }
}

TEST(Link, SameSeedSameSchedule) {
  LinkProfile p;
  p.latency = from_millis(10);
  p.jitter = from_millis(8);
  p.drop_probability = 0.3;
  Link a("x", p, 77), b("x", p, 77);
  for (int i = 0; i < 500; ++i) {
    auto oa = a.send(64, from_millis(i * 7));
    auto ob = b.send(64, from_millis(i * 7));
    ASSERT_EQ(oa.status, ob.status);
    ASSERT_EQ(oa.deliver_at, ob.deliver_at);
  }
}

TEST(Network, DeliversAcrossSitesAndLogsDrops) {
  VirtualClock clock;
  TraceLog trace;
  Network net(clock, &trace, 5);
  LinkProfile p;
  p.latency = from_millis(50);
  p.partitions.push_back({from_seconds(2), from_seconds(3)});
  net.connect("rural", "center", p);
  std::vector<SimTime> got;
  net.attach("rural/a", "rural", [](wire::Bytes) {});
  net.attach("center/b", "center", [&](wire::Bytes) { got.push_back(clock.now()); });

  clock.advance_to(from_seconds(1));
  net.send("rural/a", "center/b", {1, 2, 3});
  EXPECT_EQ(net.in_flight(), 1u);
  clock.advance_to(from_seconds(2.5));
  net.send("rural/a", "center/b", {4});
  clock.advance_to(from_seconds(10));
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0], from_seconds(1.05));
  EXPECT_EQ(trace.by_event("net.drop").size(), 1u);
  EXPECT_EQ(trace.by_event("net.drop")[0]["reason"], "partition");

  net.set_link_up("rural", "center", false);
  EXPECT_FALSE(net.link_up("rural", "center"));
  EXPECT_FALSE(net.send("rural/a", "center/b", {5}).delivered());
  net.set_link_up("rural", "center", true);
  net.detach("center/b");
  net.send("rural/a", "center/b", {6});
  clock.advance_to(from_seconds(11));
  EXPECT_EQ(net.undeliverable(), 1u);
  EXPECT_EQ(net.in_flight(), 0u);
}

TEST(Network, IdenticalSeedsGiveIdenticalLogs) {
  auto run = [] {
    VirtualClock clock;
    TraceLog trace;
    Network net(clock, &trace, 1234);
    LinkProfile p;
    p.latency = from_millis(20);
    p.jitter = from_millis(15);
    p.drop_probability = 0.25;
    net.connect("a", "b", p);
    net.attach("a/x", "a", [](wire::Bytes) {});
    net.attach("b/y", "b", [&](wire::Bytes f) { trace.emit(clock.now(), "b/y", "recv", {{"n", f[0]}}); });
    for (int i = 0; i < 200; ++i) {
      clock.advance_to(from_millis(i * 10));
      net.send("a/x", "b/y", {static_cast<std::uint8_t>(i)});
    }
    clock.advance_to(from_seconds(10));
    std::ostringstream os;
    trace.write_jsonl(os);
    return os.str();
  };
  EXPECT_EQ(run(), run());
}
