#include <gtest/gtest.h>

#include <sstream>

#include "debh/metrics.hpp"

using namespace debh;
using namespace debh::metrics;

TEST(RunMetrics, CountsPerSource) {
  RunMetrics m;
  m.record_sent(1);
  m.record_sent(1);
  m.record_sent(4);
  m.record_delivery(1);
  EXPECT_EQ(m.packets_sent(), 3u);
  EXPECT_EQ(m.packets_delivered(), 1u);
}

TEST(RunMetrics, DeliveryBeyondSentThrows) {
  RunMetrics m;
  EXPECT_THROW(m.record_delivery(2), MetricsError);
  m.record_sent(2);
  m.record_delivery(2);
  EXPECT_THROW(m.record_delivery(2), MetricsError);
}

TEST(RunMetrics, SecurePathMarkedOncePerDiscovery) {
  RunMetrics m;
  m.mark_secure_path(3, 1, 5, SimTime::from_seconds(1), SimTime::from_seconds(1.25));
  EXPECT_THROW(m.mark_secure_path(3, 1, 5, SimTime::from_seconds(1), SimTime::from_seconds(2)), MetricsError);
  m.mark_secure_path(4, 1, 5, SimTime::from_seconds(3), SimTime::from_seconds(4));
  EXPECT_EQ(m.secure_path_delay.at({1, 5}), SimTime::from_seconds(0.25));
}

TEST(Aggregate, EmptyThrows) { EXPECT_THROW(aggregate({}), MetricsError); }

TEST(Aggregate, MeansAndExtremes) {
  RunMetrics a, b;
  a.record_rreq(1);
  b.record_rreq(1);
  b.record_rreq(1);
  b.record_rreq(2);
  a.mark_secure_path(1, 1, 2, SimTime::from_seconds(0), SimTime::from_seconds(0.5));
  a.record_detection({3, 4});
  auto s = aggregate({a, b});
  EXPECT_EQ(s.runs, 2u);
  EXPECT_DOUBLE_EQ(s.rreq_count.mean, 2.0);
  EXPECT_DOUBLE_EQ(s.rreq_count.min, 1.0);
  EXPECT_DOUBLE_EQ(s.rreq_count.max, 3.0);
  EXPECT_DOUBLE_EQ(s.delay_s.mean, 0.5);
  EXPECT_DOUBLE_EQ(s.detected.mean, 1.0);
}

TEST(Csv, RowsPerSourceAndFormatting) {
  RunMetrics m;
  m.record_rreq(1);
  m.record_rreq(1);
  m.record_sent(6);
  m.mark_secure_path(1, 1, 3, SimTime::from_seconds(1), SimTime::from_seconds(1.125));
  m.record_detection({10});
  auto rows = csv_rows("single-1", 7, 1, m);
  ASSERT_EQ(rows.size(), 2u);
  std::ostringstream out;
  for (const auto& r : rows) write_csv_row(out, r);
  EXPECT_EQ(out.str(), "single-1,7,1,2,0.125000,1,1,0,0\nsingle-1,7,6,0,NA,1,1,1,0\n");
}
