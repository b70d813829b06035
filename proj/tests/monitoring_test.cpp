#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "gridtune/monitoring.hpp"
#include "support/oracles.hpp"

using namespace gridtune;

namespace {

MetricSample busy(double at, double v) { return MetricSample{at, "n0", MetricKind::CpuBusy, v, "", -1}; }
MetricSample beat(double at) { return MetricSample{at, "n0", MetricKind::Heartbeat, 1.0, "", -1}; }

}  // namespace

TEST(DataBuffer, AppendToEmpty) {
  DataBuffer buf("n0");
  EXPECT_FALSE(buf.record_sample(beat(0)).has_value());
  EXPECT_EQ(buf.size(), 1u);
}

TEST(DataBuffer, OverflowEvictsOldest) {
  DataBuffer buf("n0", 3);
  for (int i = 0; i < 3; ++i) EXPECT_FALSE(buf.record_sample(busy(i, i)).has_value());
  auto evicted = buf.record_sample(busy(3, 3));
  ASSERT_TRUE(evicted.has_value());
  EXPECT_EQ(evicted->at, 0.0);
  EXPECT_EQ(buf.size(), 3u);
  EXPECT_EQ(buf.samples().front().at, 1.0);
  ASSERT_EQ(buf.drops().size(), 1u);
}

TEST(DataBuffer, TimeRegression) {
  DataBuffer buf("n0");
  buf.record_sample(beat(5));
  try {
    buf.record_sample(beat(4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TimeRegression);
  }
}

TEST(DataBuffer, SecondPullWithoutNewSamplesIsEmpty) {
  DataBuffer buf("n0");
  buf.register_consumer("na");
  buf.record_sample(beat(1));
  EXPECT_EQ(buf.pull("na").size(), 1u);
  EXPECT_TRUE(buf.pull("na").empty());
}

TEST(DataBuffer, ThreeThenTwo) {
  DataBuffer buf("n0");
  buf.register_consumer("na");
  for (int i = 0; i < 3; ++i) buf.record_sample(beat(i));
  EXPECT_EQ(buf.pull("na").size(), 3u);
  for (int i = 3; i < 5; ++i) buf.record_sample(beat(i));
  const auto second = buf.pull("na");
  ASSERT_EQ(second.size(), 2u);
  EXPECT_EQ(second[0].at, 3.0);
}

TEST(DataBuffer, UnknownConsumer) {
  DataBuffer buf("n0");
  try {
    buf.pull("ghost");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnknownConsumer);
  }
}

TEST(DataBuffer, ConsumerSeesOnlyLaterSamples) {
  DataBuffer buf("n0");
  buf.record_sample(beat(0));
  buf.register_consumer("late");
  buf.record_sample(beat(1));
  const auto got = buf.pull("late");
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].at, 1.0);
}

TEST(DataBuffer, ExactlyOnceUnderRandomInterleavings) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t cap = 1 + rng() % 20;
    DataBuffer buf("n0", cap);
    buf.register_consumer("c");
    std::vector<double> recorded, evicted, pulled;
    double t = 0;
    for (int step = 0; step < 300; ++step) {
      if (rng() % 3 != 0) {
        t += static_cast<double>(rng() % 3);
        recorded.push_back(t);
        if (auto e = buf.record_sample(busy(t, static_cast<double>(recorded.size())))) evicted.push_back(e->value);
      } else {
        for (const auto& s : buf.pull("c")) pulled.push_back(s.value);
      }
    }
    for (const auto& s : buf.pull("c")) pulled.push_back(s.value);
    // Values are 1..N in record order; every one is pulled once or evicted unseen.
    std::vector<int> seen(recorded.size() + 1, 0);
    for (double v : pulled) ++seen[static_cast<std::size_t>(v)];
    for (std::size_t v = 1; v <= recorded.size(); ++v) EXPECT_LE(seen[v], 1);
    std::size_t never = 0;
    for (std::size_t v = 1; v <= recorded.size(); ++v) never += seen[v] == 0 ? 1 : 0;
    EXPECT_LE(never, evicted.size());
    EXPECT_EQ(pulled.size() + never, recorded.size());
  }
}

TEST(CpuUsage, FullySaturated) {
  const MetricSample s[] = {busy(1, 2.0)};
  EXPECT_DOUBLE_EQ(cpu_usage(s, 1.0, 2), 1.0);
}

TEST(CpuUsage, Quarter) {
  const MetricSample s[] = {busy(1, 0.5)};
  EXPECT_DOUBLE_EQ(cpu_usage(s, 1.0, 2), 0.25);
}

TEST(CpuUsage, NoSamples) { EXPECT_EQ(cpu_usage({}, 1.0, 2), 0.0); }

TEST(CpuUsage, BoundedAndMonotoneOnRandomStreams) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int i = 0; i < 1000; ++i) {
    std::vector<MetricSample> s;
    double t = 0;
    for (int k = 0; k < static_cast<int>(rng() % 8); ++k) s.push_back(busy(t += u(rng) / 5, u(rng)));
    const double window = 0.1 + u(rng), procs = 1 + static_cast<int>(rng() % 8);
    const double v = cpu_usage(s, window, static_cast<int>(procs));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    if (!s.empty()) {
      auto more = s;
      more.back().value += 1.0;
      EXPECT_GE(cpu_usage(more, window, static_cast<int>(procs)), v);
    }
  }
}

TEST(LoadImbalance, Examples) {
  const double equal[] = {1, 1, 1, 1}, one[] = {4, 0, 0, 0}, mixed[] = {2, 1, 1, 0};
  EXPECT_EQ(load_imbalance(equal), 0.0);
  EXPECT_DOUBLE_EQ(load_imbalance(one), 0.75);
  EXPECT_DOUBLE_EQ(load_imbalance(mixed), 0.5);
}

TEST(LoadImbalance, EmptyInput) {
  try {
    load_imbalance({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyInput);
  }
}

TEST(LoadImbalance, OracleAndRange) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> v(1 + rng() % 16);
    for (auto& x : v) x = rng() % 5 == 0 ? 0.0 : u(rng);
    const double got = load_imbalance(v);
    EXPECT_NEAR(got, gridtune::testing::imbalance_oracle(v), 1e-12);
    EXPECT_GE(got, 0.0);
    EXPECT_LT(got, 1.0);
  }
}

TEST(MetricsCsv, RoundTrip) {
  std::vector<MetricSample> s = {busy(0.1, 1.0 / 3.0), beat(0.2),
                                 MetricSample{0.2, "n0", MetricKind::ThreadWork, 2.5, "job1", 3},
                                 MetricSample{0.3, "n0", MetricKind::MemPressure, 0.125, "", -1}};
  std::ostringstream out;
  write_metrics_csv(out, s);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "time,node,kind,value");
  EXPECT_EQ(parse_metrics_csv(out.str()), s);
}

TEST(MetricsCsv, EmptyHasHeaderOnly) {
  std::ostringstream out;
  write_metrics_csv(out, {});
  EXPECT_EQ(out.str(), "time,node,kind,value\n");
  EXPECT_TRUE(parse_metrics_csv(out.str()).empty());
}

TEST(FormatDouble, RoundTripsBits) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    double v;
    const auto bits = rng();
    std::memcpy(&v, &bits, sizeof v);
    if (!std::isfinite(v)) continue;
    EXPECT_EQ(parse_double(format_double(v)), v);
  }
}
