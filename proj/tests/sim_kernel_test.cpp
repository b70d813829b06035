#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "gridtune/sim_kernel.hpp"

using namespace gridtune;

namespace {

struct Ping {
  int value = 0;
};
std::string log_type(const Ping&) { return "Ping"; }
Json log_fields(const Ping& p) { return Json{{"value", p.value}}; }

using K = Kernel<Ping>;

struct Recorder : Actor<Ping> {
  K* kernel = nullptr;
  std::vector<std::pair<double, std::string>> seen;
  void on_message(const AgentMessage<Ping>& m) override {
    seen.emplace_back(kernel->now(), m.from + ":" + std::to_string(m.payload.value));
  }
  void on_timer(const std::string& tag) override { seen.emplace_back(kernel->now(), "timer:" + tag); }
};

struct Fixture : ::testing::Test {
  K kernel{LatencyModel{}, 1};
  Recorder a, b;
  void SetUp() override {
    a.kernel = &kernel;
    b.kernel = &kernel;
    kernel.register_agent("a", Location{"s", "r", "n"}, a);
    kernel.register_agent("b", Location{"s", "r2", "m"}, b);
  }
};

}  // namespace

TEST_F(Fixture, NowStartsAtZero) { EXPECT_EQ(kernel.now(), 0.0); }

TEST_F(Fixture, ScheduleAtNowRunsBeforeLaterEvents) {
  kernel.schedule_timer(3.0, "a", "late");
  kernel.schedule_timer(0.0, "a", "now");
  kernel.run_until(10);
  ASSERT_EQ(a.seen.size(), 2u);
  EXPECT_EQ(a.seen[0].second, "timer:now");
}

TEST_F(Fixture, SameTimeKeepsScheduleOrder) {
  kernel.schedule_timer(2.0, "a", "first");
  kernel.schedule_timer(2.0, "b", "second");
  kernel.schedule_timer(2.0, "a", "third");
  kernel.run_until(10);
  ASSERT_EQ(a.seen.size(), 2u);
  EXPECT_EQ(a.seen[0].second, "timer:first");
  EXPECT_EQ(a.seen[1].second, "timer:third");
  const auto& recs = kernel.log().records();
  EXPECT_EQ(recs[0]["tag"], "first");
  EXPECT_EQ(recs[1]["tag"], "second");
  EXPECT_EQ(recs[2]["tag"], "third");
}

TEST_F(Fixture, PastEventRejected) {
  kernel.schedule_timer(5.0, "a", "x");
  kernel.run_until(10);
  EXPECT_EQ(kernel.now(), 5.0);
  try {
    kernel.schedule_timer(4.0, "a", "y");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::PastEvent);
  }
}

TEST_F(Fixture, ZeroLatencyDeliversSameTickAfterCurrentEvent) {
  struct Sender : Actor<Ping> {
    K* k;
    std::vector<std::string>* order;
    void on_message(const AgentMessage<Ping>&) override {}
    void on_timer(const std::string&) override {
      k->send(AgentMessage<Ping>{"s", "a", k->now(), 0.0, Ping{1}});
      order->push_back("sender-done");
    }
  } sender;
  std::vector<std::string> order;
  sender.k = &kernel;
  sender.order = &order;
  kernel.register_agent("s", Location{"s", "r", "n"}, sender);
  kernel.schedule_timer(1.0, "s", "go");
  kernel.run_until(10);
  ASSERT_EQ(a.seen.size(), 1u);
  EXPECT_EQ(a.seen[0].first, 1.0);
  EXPECT_EQ(order.size(), 1u);
}

TEST_F(Fixture, PairFifoWithEqualLatency) {
  kernel.send(AgentMessage<Ping>{"a", "b", 0.0, 1.0, Ping{1}});
  kernel.send(AgentMessage<Ping>{"a", "b", 0.0, 1.0, Ping{2}});
  kernel.run_until(10);
  ASSERT_EQ(b.seen.size(), 2u);
  EXPECT_EQ(b.seen[0], (std::pair<double, std::string>{1.0, "a:1"}));
  EXPECT_EQ(b.seen[1], (std::pair<double, std::string>{1.0, "a:2"}));
}

TEST_F(Fixture, PairFifoSurvivesShorterLaterLatency) {
  kernel.send(AgentMessage<Ping>{"a", "b", 0.0, 2.0, Ping{1}});
  kernel.send(AgentMessage<Ping>{"a", "b", 0.0, 0.5, Ping{2}});
  kernel.run_until(10);
  ASSERT_EQ(b.seen.size(), 2u);
  EXPECT_EQ(b.seen[0].second, "a:1");
  EXPECT_GE(b.seen[1].first, b.seen[0].first);
}

TEST_F(Fixture, UnknownAgent) {
  try {
    kernel.send("a", "nobody", Ping{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnknownAgent);
  }
}

TEST_F(Fixture, LatencyFromLocations) {
  EXPECT_DOUBLE_EQ(kernel.latency_between("a", "b"), 0.01);
  Recorder c;
  kernel.register_agent("c", Location{"other", "r3", "k"}, c);
  EXPECT_DOUBLE_EQ(kernel.latency_between("a", "c"), 0.1);
  Recorder d;
  kernel.register_agent("d", Location{"s", "r", "n"}, d);
  EXPECT_DOUBLE_EQ(kernel.latency_between("a", "d"), 0.0);
}

TEST_F(Fixture, SendAndDeliverAreLogged) {
  kernel.send("a", "b", Ping{7});
  kernel.run_until(1);
  const auto& recs = kernel.log().records();
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0]["type"], "send");
  EXPECT_EQ(recs[0]["body"]["value"], 7);
  EXPECT_EQ(recs[1]["type"], "deliver");
  EXPECT_DOUBLE_EQ(recs[1]["t"].get<double>(), 0.01);
}

TEST(Kernel, NoEventsGivesEmptyLog) {
  K kernel;
  EXPECT_TRUE(kernel.run_until(100).empty());
  EXPECT_EQ(kernel.now(), 0.0);
}

TEST_F(Fixture, HorizonBeforeFirstEvent) {
  kernel.schedule_timer(50.0, "a", "x");
  EXPECT_TRUE(kernel.run_until(10).empty());
  EXPECT_TRUE(kernel.pending());
}

TEST_F(Fixture, NowIsLastProcessedEvent) {
  kernel.schedule_timer(80.0, "a", "x");
  kernel.run_until(100);
  EXPECT_EQ(kernel.now(), 80.0);
}

TEST_F(Fixture, NowInsideEvent) {
  kernel.schedule_timer(5.0, "a", "x");
  kernel.run_until(100);
  EXPECT_EQ(a.seen.at(0).first, 5.0);
}

TEST_F(Fixture, LogKeyOrderIsFixed) {
  kernel.schedule_timer(1.0, "a", "x");
  kernel.run_until(2);
  EXPECT_EQ(kernel.log().to_jsonl(), "{\"n\":0,\"t\":1.0,\"type\":\"timer\",\"seq\":0,\"agent\":\"a\",\"tag\":\"x\"}\n");
}

TEST(Rng, StreamsArePerIdAndReproducible) {
  Rng a1 = stream_for(42, "na:n0"), a2 = stream_for(42, "na:n0"), b = stream_for(42, "na:n1");
  const auto x = a1.next();
  EXPECT_EQ(x, a2.next());
  EXPECT_NE(x, b.next());
  Rng u = stream_for(1, "u");
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform();
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, 1.0);
    const int k = u.uniform_int(-2, 3);
    EXPECT_GE(k, -2);
    EXPECT_LE(k, 3);
  }
}
