#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <tuple>

#include "debh/aodv.hpp"
#include "debh/network.hpp"

using namespace debh;
using namespace debh::aodv;

namespace {

Rrep rrep(SequenceNumber seq, std::uint32_t hops, NodeId gen) {
  Rrep r;
  r.dest_seq = seq;
  r.hop_count = hops;
  r.generator = gen;
  return r;
}

// Independent ordering: sort by a lexicographic key and take the front.
Rrep oracle_best(std::vector<Rrep> c) {
  std::stable_sort(c.begin(), c.end(), [](const Rrep& a, const Rrep& b) {
    auto ka = std::make_tuple(-static_cast<long long>(a.dest_seq), a.hop_count, a.generator);
    auto kb = std::make_tuple(-static_cast<long long>(b.dest_seq), b.hop_count, b.generator);
    return ka < kb;
  });
  return c.front();
}

ProtocolConfig plain() {
  ProtocolConfig p;
  p.defense = Defense::None;
  return p;
}

sim::Topology line(std::size_t n) {
  std::vector<std::pair<NodeId, NodeId>> e;
  for (NodeId i = 1; i < n; ++i) e.emplace_back(i, i + 1);
  return sim::Topology::static_adjacency(n, e);
}

SimTime secs(double s) { return SimTime::from_seconds(s); }

}  // namespace

TEST(SelectBestRrep, HighestSequenceWins) {
  std::vector<Rrep> c{rrep(10, 1, 1), rrep(50, 4, 2), rrep(12, 2, 3)};
  EXPECT_EQ(select_best_rrep(c).dest_seq, 50u);
}

TEST(SelectBestRrep, SingleCandidateIsItself) {
  std::vector<Rrep> c{rrep(3, 2, 9)};
  EXPECT_EQ(select_best_rrep(c).generator, 9u);
}

TEST(SelectBestRrep, EqualSequenceFewerHops) {
  std::vector<Rrep> c{rrep(20, 3, 1), rrep(20, 2, 2)};
  EXPECT_EQ(select_best_rrep(c).hop_count, 2u);
}

TEST(SelectBestRrep, EmptyThrows) {
  std::vector<Rrep> c;
  EXPECT_THROW(select_best_rrep(c), NoRouteError);
}

TEST(SelectBestRrep, ExhaustivePairwiseAgainstOracle) {
  std::vector<Rrep> pool;
  for (SequenceNumber s : {0u, 1u, 2u})
    for (std::uint32_t h : {1u, 2u, 3u})
      for (NodeId g : {1u, 2u, 3u}) pool.push_back(rrep(s, h, g));
  for (const auto& a : pool) {
    for (const auto& b : pool) {
      std::vector<Rrep> c{a, b};
      Rrep want = oracle_best(c);
      const Rrep& got = select_best_rrep(c);
      EXPECT_EQ(std::tie(got.dest_seq, got.hop_count, got.generator),
                std::tie(want.dest_seq, want.hop_count, want.generator));
      if (!(a.dest_seq == b.dest_seq && a.hop_count == b.hop_count && a.generator == b.generator)) {
        EXPECT_NE(rrep_precedes(a, b), rrep_precedes(b, a));
      }
    }
  }
}

TEST(SelectBestRrep, ArgmaxPropertyOnRandomSets) {
  Rng rng(123);
  std::uniform_int_distribution<int> seq(0, 200), hop(1, 12), gen(1, 30), size(1, 12);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<Rrep> c;
    int n = size(rng);
    for (int i = 0; i < n; ++i) c.push_back(rrep(seq(rng), hop(rng), gen(rng)));
    const Rrep& best = select_best_rrep(c);
    for (const auto& r : c) EXPECT_GE(best.dest_seq, r.dest_seq);
    Rrep want = oracle_best(c);
    EXPECT_EQ(best.hop_count, want.hop_count);
    EXPECT_EQ(best.generator, want.generator);
  }
}

TEST(RoutingTable, SameFloodKeepsBetterEntry) {
  RoutingTable t;
  DiscoveryTag tag{1, 1};
  EXPECT_TRUE(t.offer({5, 2, 3, 10, true, 5, 5, tag}));
  EXPECT_FALSE(t.offer({5, 3, 4, 10, true, 5, 5, tag}));
  EXPECT_TRUE(t.offer({5, 4, 6, 100, true, 9, 8, tag}));
  EXPECT_EQ(t.find(5)->next_hop, 4u);
}

TEST(RoutingTable, NewFloodOrInvalidEntryIsReplaced) {
  RoutingTable t;
  t.offer({5, 2, 1, 100, true, 9, 8, {1, 1}});
  EXPECT_TRUE(t.offer({5, 3, 4, 2, true, 5, 5, {1, 2}}));
  EXPECT_EQ(t.find(5)->next_hop, 3u);
  t.invalidate(5);
  EXPECT_EQ(t.find(5), nullptr);
  ASSERT_NE(t.find_any(5), nullptr);
  EXPECT_TRUE(t.offer({5, 7, 9, 1, true, 5, 5, {1, 2}}));
  EXPECT_EQ(t.find(5)->next_hop, 7u);
}

TEST(RoutingTable, InvalidateViaCountsEntries) {
  RoutingTable t;
  t.offer({5, 2, 1, 1, true, 5, 5, {1, 1}});
  t.offer({6, 2, 1, 1, true, 6, 6, {1, 1}});
  t.offer({7, 3, 1, 1, true, 7, 7, {1, 1}});
  EXPECT_EQ(t.invalidate_via({2}), 2u);
  EXPECT_EQ(t.find(5), nullptr);
  EXPECT_NE(t.find(7), nullptr);
  EXPECT_TRUE(t.fresh_enough(7, 1));
  EXPECT_FALSE(t.fresh_enough(7, 2));
}

TEST(FloodCache, FirstTimeOnlyOnce) {
  FloodCache c;
  EXPECT_TRUE(c.first_time(1, 1));
  EXPECT_FALSE(c.first_time(1, 1));
  EXPECT_TRUE(c.first_time(1, 2));
  EXPECT_TRUE(c.seen(1, 2));
  EXPECT_FALSE(c.seen(2, 1));
}

TEST(WalkRoute, DetectsLoopsAndGaps) {
  std::map<NodeId, RoutingTable> tables;
  tables[1].offer({4, 2, 3, 1, true, 4, 4, {}});
  tables[2].offer({4, 3, 2, 1, true, 4, 4, {}});
  tables[3].offer({4, 4, 1, 1, true, 4, 4, {}});
  auto get = [&](NodeId n) -> const RoutingTable& { return tables[n]; };
  EXPECT_EQ(walk_route(1, 4, get), (std::vector<NodeId>{1, 2, 3, 4}));
  tables[3].offer({4, 1, 1, 1, true, 4, 4, {9, 9}});
  EXPECT_FALSE(walk_route(1, 4, get).has_value());
  tables[3].invalidate(4);
  EXPECT_FALSE(walk_route(1, 4, get).has_value());
}

TEST(AodvNetwork, FirstDiscoveryCarriesOriginSequenceOne) {
  Network net(plain(), line(3), std::nullopt, 1);
  EXPECT_EQ(net.initiate_route_discovery(1, 3), 1u);
  net.run_until(secs(1));
  const RoutingEntry* back = net.routes(2).find(1);
  ASSERT_NE(back, nullptr);
  EXPECT_EQ(back->dest_seq, 1u);
  EXPECT_EQ(back->hop_count, 1u);
  EXPECT_EQ(net.initiate_route_discovery(1, 3), 2u);
}

TEST(AodvNetwork, DestinationRepliesWithIncrementedSequence) {
  Network net(plain(), line(3), std::nullopt, 1);
  net.initiate_route_discovery(1, 3);
  net.run_until(secs(1));
  const RoutingEntry* e = net.routes(1).find(3);
  ASSERT_NE(e, nullptr);
  EXPECT_EQ(e->next_hop, 2u);
  EXPECT_EQ(e->hop_count, 2u);
  EXPECT_EQ(e->dest_seq, 1u);
  EXPECT_EQ(e->generator, 3u);
  EXPECT_EQ(net.metrics().rreq_count_by_source.at(1), 1u);
}

TEST(AodvNetwork, DuplicateFloodCopyIsDropped) {
  Network net(plain(), line(4), std::nullopt, 1);
  Rreq r;
  r.origin = 1;
  r.destination = 4;
  r.origin_seq = 1;
  r.broadcast_id = 7;
  r.hop_count = 2;
  EXPECT_EQ(net.handle_rreq(2, 1, r), RreqAction::Rebroadcast);
  EXPECT_EQ(net.handle_rreq(2, 1, r), RreqAction::DropDuplicate);
  EXPECT_EQ(net.handle_rreq(2, 3, r), RreqAction::DropDuplicate);
}

TEST(AodvNetwork, HonestRelayIncrementsHopCount) {
  Network net(plain(), line(4), std::nullopt, 1);
  Rreq r;
  r.origin = 1;
  r.destination = 4;
  r.origin_seq = 1;
  r.broadcast_id = 1;
  r.hop_count = 2;
  EXPECT_EQ(net.handle_rreq(2, 1, r), RreqAction::Rebroadcast);
  EXPECT_EQ(net.routes(2).find(1)->hop_count, 3u);
  net.run_until(secs(0.015));
  // Node 3 received hop_count 3 and records 4 hops back to the origin.
  EXPECT_EQ(net.routes(3).find(1)->hop_count, 4u);
}

TEST(AodvNetwork, DestinationReplyAction) {
  Network net(plain(), line(3), std::nullopt, 1);
  Rreq r;
  r.origin = 1;
  r.destination = 3;
  r.origin_seq = 1;
  r.broadcast_id = 1;
  r.hop_count = 1;
  EXPECT_EQ(net.handle_rreq(3, 2, r), RreqAction::Reply);
}

TEST(AodvNetwork, ExcludedNodesDropRequests) {
  Network net(plain(), line(4), std::nullopt, 1);
  Rreq r;
  r.origin = 1;
  r.destination = 4;
  r.broadcast_id = 1;
  r.excluded = {2};
  EXPECT_EQ(net.handle_rreq(2, 1, r), RreqAction::Drop);
  EXPECT_EQ(net.handle_rreq(3, 2, r), RreqAction::Drop);
}

TEST(AodvNetwork, ReplyFromAnnouncedNodeIsDiscarded) {
  Network net(plain(), line(4), std::nullopt, 1);
  net.broadcast_elimination(1, {4});
  net.run_until(secs(1));
  Rrep r;
  r.origin = 1;
  r.destination = 4;
  r.dest_seq = 500;
  r.generator = 4;
  r.generator_nhn = 4;
  r.broadcast_id = 1;
  EXPECT_EQ(net.handle_rrep(3, 4, r), RrepAction::Discard);
  EXPECT_EQ(net.routes(3).find(4), nullptr);
}

TEST(AodvNetwork, MissingReversePathCountsAnomaly) {
  Network net(plain(), line(4), std::nullopt, 1);
  Rrep r;
  r.origin = 1;
  r.destination = 4;
  r.dest_seq = 1;
  r.generator = 4;
  r.broadcast_id = 3;
  EXPECT_EQ(net.handle_rrep(3, 4, r), RrepAction::Discard);
  EXPECT_EQ(net.metrics().routing_anomalies, 1u);
  EXPECT_NE(net.routes(3).find(4), nullptr);
}

TEST(AodvNetwork, DiscoveryToSelfIsRejected) {
  Network net(plain(), line(3), std::nullopt, 1);
  EXPECT_THROW(net.initiate_route_discovery(2, 2), ConfigError);
}

TEST(AodvNetwork, FreshRouteIsReused) {
  Network net(plain(), line(4), std::nullopt, 1);
  net.add_connection({1, 4, 10, 2.0, 512, secs(1)});
  net.add_connection({1, 4, 10, 2.0, 512, secs(20)});
  net.run_until(secs(40));
  EXPECT_EQ(net.metrics().rreq_count_by_source.at(1), 1u);
  EXPECT_EQ(net.metrics().packets_sent(), 20u);
  EXPECT_EQ(net.metrics().packets_delivered(), 20u);
}

TEST(AodvNetwork, BrokenRelayTriggersRediscovery) {
  // 1-2-3-5 is the short path; 1-2-4-6-5 is the detour.
  auto topo = sim::Topology::static_adjacency(6, {{1, 2}, {2, 3}, {3, 5}, {2, 4}, {4, 6}, {6, 5}});
  Network net(plain(), std::move(topo), std::nullopt, 1);
  net.add_connection({1, 5, 10, 2.0, 512, secs(1)});
  net.run_until(secs(2));
  ASSERT_EQ(net.routes(2).find(5)->next_hop, 3u);
  auto cut = sim::Topology::static_adjacency(6, {{1, 2}, {2, 3}, {2, 4}, {4, 6}, {6, 5}});
  net.mutable_topology() = cut;
  net.run_until(secs(20));
  EXPECT_GE(net.metrics().rreq_count_by_source.at(1), 2u);
  EXPECT_EQ(net.metrics().packets_sent(), 10u);
  EXPECT_GE(net.metrics().packets_delivered(), 8u);
  EXPECT_EQ(net.routes(2).find(5)->next_hop, 4u);
}

TEST(AodvNetwork, FloodTerminatesAndRoutesAreLoopFreeProperty) {
  Rng rng(99);
  for (int trial = 0; trial < 30; ++trial) {
    std::uniform_real_distribution<double> u(0.0, 600.0);
    std::vector<sim::Vec2> pos(25);
    for (auto& p : pos) p = {u(rng), u(rng)};
    auto topo = sim::Topology::geometric(pos, 200.0);
    auto hops = topo.hop_distances(1);
    NodeId dest = 0;
    for (NodeId n = 25; n >= 2 && dest == 0; --n) {
      if (hops[n] >= 2) dest = n;
    }
    if (dest == 0) continue;
    Network net(plain(), topo, std::nullopt, trial);
    auto bid = net.initiate_route_discovery(1, dest);
    net.run_until(secs(2));
    for (NodeId n = 1; n <= 25; ++n) {
      auto it = net.rreq_processed().find({n, NodeId{1}, bid});
      if (it != net.rreq_processed().end()) {
        EXPECT_EQ(it->second, 1u);
      }
    }
    auto walk = walk_route(1, dest, [&](NodeId n) -> const RoutingTable& { return net.routes(n); });
    ASSERT_TRUE(walk.has_value()) << "trial " << trial;
    EXPECT_EQ(walk->size() - 1, hops[dest]);
    // Every hop on the forward path also holds the reverse route.
    for (std::size_t i = 1; i < walk->size(); ++i) {
      const RoutingEntry* back = net.routes((*walk)[i]).find(1);
      ASSERT_NE(back, nullptr);
      EXPECT_TRUE(topo.linked((*walk)[i], back->next_hop));
    }
  }
}
