#include <gtest/gtest.h>

#include "debh/network.hpp"
#include "debh/scenario.hpp"

using namespace debh;

namespace {

adversary::AdversaryProfile lone(NodeId id) {
  adversary::AdversaryProfile p;
  p.id = id;
  p.group = {id};
  p.one_victim_at_a_time = false;
  return p;
}

sim::Topology line(unsigned n) {
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId i = 1; i < n; ++i) edges.emplace_back(i, i + 1);
  return sim::Topology::static_adjacency(n, edges);
}

// Line 1..5 with a lone forger 6 hanging off node 2.
std::unique_ptr<Network> hijacked_line() {
  auto topo = sim::Topology::static_adjacency(6, {{1, 2}, {2, 3}, {3, 4}, {4, 5}, {2, 6}});
  auto net = std::make_unique<Network>(ProtocolConfig{}, std::move(topo), std::nullopt, 3);
  net->add_adversary(lone(6), 0);
  return net;
}

}  // namespace

TEST(Network, HonestCheckIsSafeAtPathOne) {
  Network net(ProtocolConfig{}, line(5), std::nullopt, 1);
  auto id = net.schedule_check(1, 5, SimTime::from_seconds(1));
  net.run_until(SimTime::from_seconds(10));
  auto s = net.session(id);
  ASSERT_TRUE(s && s->finished);
  EXPECT_TRUE(s->safe);
  EXPECT_EQ(s->path_number, 1u);
  EXPECT_TRUE(s->malicious.empty());
  EXPECT_EQ(net.metrics().rreq_count_by_source.at(1), 1u);
}

TEST(Network, TrustCutsDataControlTraffic) {
  Network net(ProtocolConfig{}, line(5), std::nullopt, 1);
  auto first = net.schedule_check(1, 5, SimTime::from_seconds(1));
  auto second = net.schedule_check(1, 5, SimTime::from_seconds(10));
  net.run_until(SimTime::from_seconds(20));
  auto a = net.session(first);
  auto b = net.session(second);
  ASSERT_TRUE(a && b && a->finished && b->finished);
  EXPECT_GT(a->data_control_packets, 0u);
  EXPECT_LT(b->data_control_packets, a->data_control_packets);
  EXPECT_EQ(b->data_control_packets, 0u);
  EXPECT_GT(b->ordinal_probes, 0u);
}

TEST(Network, ExchangesLeaveSymmetricTrust) {
  Network net(ProtocolConfig{}, line(6), std::nullopt, 1);
  net.schedule_check(1, 6, SimTime::from_seconds(1));
  net.schedule_check(6, 2, SimTime::from_seconds(5));
  net.run_until(SimTime::from_seconds(15));
  ASSERT_FALSE(net.trust_exchanges().empty());
  for (auto [a, b] : net.trust_exchanges()) {
    EXPECT_TRUE(net.bch(a).trusts(b)) << a << "->" << b;
    EXPECT_TRUE(net.bch(b).trusts(a)) << b << "->" << a;
  }
  for (NodeId x = 1; x <= 6; ++x) {
    for (NodeId y = 1; y <= 6; ++y) {
      EXPECT_FALSE(pathcheck::is_malicious(net.bch(x).get(y), net.bch(y).get(x)));
    }
  }
}

TEST(Network, LoneForgerDetectedOnSecondPath) {
  auto net = hijacked_line();
  auto id = net->schedule_check(1, 5, SimTime::from_seconds(1));
  net->run_until(SimTime::from_seconds(20));
  auto s = net->session(id);
  ASSERT_TRUE(s && s->finished);
  EXPECT_EQ(s->malicious, std::set<NodeId>{6});
  EXPECT_EQ(s->path_number, 2u);
  EXPECT_EQ(net->metrics().rreq_count_by_source.at(1), s->path_number);
  EXPECT_EQ(s->rrep_generator_queue.front(), 6u);
  EXPECT_EQ(net->announced(), std::set<NodeId>{6});
}

TEST(Network, AlarmReachesEveryHonestNode) {
  auto net = hijacked_line();
  net->schedule_check(1, 5, SimTime::from_seconds(1));
  net->run_until(SimTime::from_seconds(20));
  for (NodeId n = 1; n <= 5; ++n) {
    EXPECT_TRUE(net->blacklist(n).count(6)) << n;
    EXPECT_EQ(net->bch(n).get(6), TrustState::Null) << n;
    EXPECT_EQ(net->routes(n).find(6), nullptr) << n;
  }
}

TEST(Network, ManualAlarmInvalidatesRoutesThroughNode) {
  Network net(ProtocolConfig{}, line(4), std::nullopt, 1);
  net.initiate_route_discovery(1, 4);
  net.run_until(SimTime::from_seconds(1));
  ASSERT_NE(net.routes(1).find(4), nullptr);
  net.broadcast_elimination(1, {2});
  net.run_until(SimTime::from_seconds(2));
  EXPECT_EQ(net.routes(1).find(4), nullptr);
  ASSERT_NE(net.routes(1).find_any(4), nullptr);
  EXPECT_FALSE(net.routes(1).find_any(4)->fresh);
  EXPECT_TRUE(net.blacklist(3).count(2));
}

TEST(Network, AnnouncedForgerCannotReenterRoutes) {
  auto net = hijacked_line();
  net->schedule_check(1, 5, SimTime::from_seconds(1));
  net->run_until(SimTime::from_seconds(20));
  ASSERT_EQ(net->announced(), std::set<NodeId>{6});
  unsigned before = net->forged_rreps();
  double t = 20;
  for (int i = 0; i < 20; ++i) {
    NodeId dest = 3 + static_cast<NodeId>(i % 3);
    net->initiate_route_discovery(1, dest);
    t += 1;
    net->run_until(SimTime::from_seconds(t));
  }
  EXPECT_GT(net->forged_rreps(), before);
  EXPECT_EQ(net->honest_installs_after_announcement(6), 0u);
  for (NodeId d = 3; d <= 5; ++d) {
    const auto* r = net->routes(1).find_any(d);
    ASSERT_NE(r, nullptr);
    EXPECT_NE(r->generator, 6u);
  }
}

TEST(Network, NoDefenseLeavesForgerUnnoticed) {
  auto topo = sim::Topology::static_adjacency(6, {{1, 2}, {2, 3}, {3, 4}, {4, 5}, {2, 6}});
  ProtocolConfig cfg;
  cfg.defense = Defense::None;
  Network net(cfg, std::move(topo), std::nullopt, 3);
  net.add_adversary(lone(6), 0);
  net.add_connection({1, 5, 10, 2.0, 512, SimTime::from_seconds(1)});
  net.run_until(SimTime::from_seconds(20));
  EXPECT_TRUE(net.announced().empty());
  EXPECT_EQ(net.metrics().packets_delivered(), 0u);
}

TEST(Network, DefendedConnectionDeliversAfterAlarm) {
  auto net = hijacked_line();
  net->add_connection({1, 5, 10, 2.0, 512, SimTime::from_seconds(1)});
  net->run_until(SimTime::from_seconds(30));
  EXPECT_EQ(net->metrics().packets_sent(), 10u);
  EXPECT_EQ(net->metrics().packets_delivered(), 10u);
  EXPECT_EQ(net->metrics().detected_malicious, std::set<NodeId>{6});
}

TEST(Network, HonestMobileRunsRaiseNoSuspicionProperty) {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    scenario::ScenarioConfig cfg;
    cfg.seed = seed;
    cfg.duration_s = 60;
    cfg.traffic.connections = 3;
    cfg.traffic.start_jitter_s = 20;
    auto r = scenario::run_scenario(cfg);
    EXPECT_TRUE(r.metrics.detected_malicious.empty()) << "seed " << seed;
    EXPECT_FALSE(r.any_alarm) << "seed " << seed;
    for (const auto& s : r.sessions) {
      EXPECT_TRUE(s.blackhole_queue.empty()) << "seed " << seed;
    }
  }
}
