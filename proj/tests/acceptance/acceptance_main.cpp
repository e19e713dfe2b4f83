// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any fails.

#include <algorithm>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "debh/debh.hpp"
#include "debh/network.hpp"
#include "debh/scenario.hpp"

using namespace debh;
using namespace debh::scenario;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

std::vector<std::uint64_t> seeds(std::uint64_t lo, std::uint64_t hi) {
  std::vector<std::uint64_t> out;
  for (auto s = lo; s <= hi; ++s) out.push_back(s);
  return out;
}

Outcome exact_detection() {
  Outcome o;
  auto rows = run_suite(standard_suite(ScenarioConfig{}), seeds(1, 10), 4);
  unsigned exact = 0;
  for (const auto& r : rows) {
    if (r.result.metrics.detected_malicious == r.result.planted) {
      ++exact;
    } else {
      o.fail(r.scenario + " seed " + std::to_string(r.seed) + " detected " +
             std::to_string(r.result.metrics.detected_malicious.size()) + " of " + std::to_string(r.planted));
    }
  }
  if (o.pass) o.detail = std::to_string(exact) + "/" + std::to_string(rows.size()) + " runs exact";
  return o;
}

Outcome walk_throughs() {
  Outcome o;
  for (const char* name : {"cooperative15", "distributed16"}) {
    auto r = replay_fixture(name);
    if (!r.ok()) o.fail(std::string(name) + ": " + r.mismatches.front());
  }
  if (o.pass) o.detail = "both fixtures match row for row";
  return o;
}

Outcome honest_runs() {
  Outcome o;
  unsigned sessions = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    ScenarioConfig cfg;
    cfg.seed = seed;
    cfg.duration_s = 120;
    cfg.traffic.connections = 3;
    cfg.traffic.start_jitter_s = 60;
    auto r = run_scenario(cfg);
    if (!r.metrics.detected_malicious.empty() || r.any_alarm) o.fail("seed " + std::to_string(seed) + " raised an alarm");
    for (const auto& s : r.sessions) {
      ++sessions;
      if (!s.blackhole_queue.empty()) o.fail("seed " + std::to_string(seed) + " queued a suspect");
      if (s.path_number != 1) o.fail("seed " + std::to_string(seed) + " rerouted an honest check");
    }
  }
  if (o.pass) o.detail = "100 runs, " + std::to_string(sessions) + " checks, no suspects";
  return o;
}

Outcome trust_decay() {
  Outcome o;
  for (unsigned n = 3; n <= 9; ++n) {
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (NodeId i = 1; i < n; ++i) edges.emplace_back(i, i + 1);
    Network net(ProtocolConfig{}, sim::Topology::static_adjacency(n, edges), std::nullopt, n);
    auto a = net.schedule_check(1, n, SimTime::from_seconds(1));
    auto b = net.schedule_check(1, n, SimTime::from_seconds(10));
    net.run_until(SimTime::from_seconds(20));
    auto first = net.session(a);
    auto second = net.session(b);
    if (!first || !second || !first->finished || !second->finished) {
      o.fail("line of " + std::to_string(n) + ": check unfinished");
      continue;
    }
    if (second->data_control_packets >= first->data_control_packets || second->data_control_packets != 0) {
      o.fail("line of " + std::to_string(n) + ": " + std::to_string(first->data_control_packets) + " then " +
             std::to_string(second->data_control_packets) + " data control packets");
    }
  }
  if (o.pass) o.detail = "repeat checks over trusted hops send no data control packets";
  return o;
}

Outcome throughput() {
  Outcome o;
  ScenarioConfig base;
  base.seed = 7;
  const unsigned connections = 10;
  std::optional<unsigned> prev;
  std::ostringstream trend;
  for (unsigned k : {2u, 3u, 5u, 7u, 9u}) {
    auto cfg = throughput_config(base, k, connections);
    cfg.defense = Defense::None;
    auto none = run_scenario(cfg);
    cfg.defense = Defense::Debh;
    auto debh = run_scenario(cfg);
    unsigned delivered = none.metrics.packets_delivered();
    trend << (prev ? " " : "") << delivered;
    if (prev && delivered > *prev) o.fail("undefended delivery rose at " + std::to_string(k) + " attackers");
    prev = delivered;
    const auto& m = debh.metrics;
    if (m.delivered_after_detection != m.sent_after_detection) {
      o.fail(std::to_string(k) + " attackers: " + std::to_string(m.delivered_after_detection) + " of " +
             std::to_string(m.sent_after_detection) + " delivered after the alarm");
    }
  }
  if (o.pass) o.detail = "undefended delivered " + trend.str() + "; defended lossless after alarm";
  return o;
}

Outcome overhead() {
  Outcome o;
  for (const char* name : {"cooperative15", "distributed16"}) {
    auto r = replay_fixture(name);
    std::uint32_t paths = 0;
    for (const auto& row : r.actual) paths = std::max(paths, row.path_number);
    if (r.rreq_count != paths) {
      o.fail(std::string(name) + ": " + std::to_string(r.rreq_count) + " requests for " + std::to_string(paths) +
             " paths");
    }
    if (std::string(name) == "distributed16" && r.rreq_count != 3) {
      o.fail("distributed16 used " + std::to_string(r.rreq_count) + " requests");
    }
  }
  ScenarioConfig single = standard_suite(ScenarioConfig{}).front();
  unsigned with = 0, without = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    single.seed = seed;
    single.defense = Defense::Debh;
    with += run_scenario(single).metrics.packets_delivered();
    single.defense = Defense::None;
    without += run_scenario(single).metrics.packets_delivered();
  }
  if (with <= without) o.fail("single attacker: defended " + std::to_string(with) + " vs " + std::to_string(without));
  if (o.pass) o.detail = "one request per path; single attacker delivered " + std::to_string(with) + " vs " +
                         std::to_string(without);
  return o;
}

Outcome malice_test() {
  Outcome o;
  constexpr TrustState states[] = {TrustState::Null, TrustState::Untrusted, TrustState::Trusted};
  for (TrustState a : states) {
    for (TrustState b : states) {
      bool want = a == TrustState::Trusted && b != TrustState::Trusted;
      if (pathcheck::is_malicious(a, b) != want) o.fail(std::string("truth table at ") + to_string(a) + "/" + to_string(b));
    }
  }
  ScenarioConfig cfg;
  cfg.seed = 21;
  cfg.duration_s = 120;
  cfg.traffic.connections = 6;
  cfg.traffic.start_jitter_s = 60;
  auto built = build(cfg);
  auto& net = *built.network;
  std::size_t events = net.run_until(SimTime::from_seconds(cfg.duration_s));
  if (events < 1000) o.fail("only " + std::to_string(events) + " events");
  const auto n = static_cast<NodeId>(cfg.node_count);
  for (NodeId x = 1; x <= n; ++x) {
    for (NodeId y = 1; y <= n; ++y) {
      if (net.bch(x).trusts(y) != net.bch(y).trusts(x)) {
        o.fail("asymmetric trust " + std::to_string(x) + "/" + std::to_string(y));
      }
    }
  }
  if (o.pass) o.detail = std::to_string(events) + " events, " + std::to_string(net.trust_exchanges().size()) +
                         " exchanges, trust symmetric";
  return o;
}

std::string render(const RunResult& r) {
  std::ostringstream out;
  out << metrics::kCsvHeader << '\n';
  for (const auto& row : metrics::csv_rows(r.scenario, r.seed, static_cast<unsigned>(r.planted.size()), r.metrics)) {
    metrics::write_csv_row(out, row);
  }
  r.audit.write(out);
  return out.str();
}

Outcome reproducible() {
  Outcome o;
  auto suite = standard_suite(ScenarioConfig{});
  for (std::size_t i : {std::size_t{0}, std::size_t{2}, std::size_t{6}}) {
    auto cfg = suite[i];
    cfg.seed = 4;
    if (render(run_scenario(cfg)) != render(run_scenario(cfg))) o.fail(cfg.name + " output differs between runs");
  }
  if (o.pass) o.detail = "metrics and audit byte-identical on rerun";
  return o;
}

Outcome no_reentry() {
  Outcome o;
  auto cfg = standard_suite(ScenarioConfig{}).front();
  cfg.seed = 2;
  cfg.duration_s = 60;
  cfg.attack.one_victim_at_a_time = false;
  auto built = build(cfg);
  auto& net = *built.network;
  net.run_until(SimTime::from_seconds(40));
  auto announced = net.announced();
  if (announced.empty()) {
    o.fail("no alarm before the flood test");
    return o;
  }
  std::vector<NodeId> honest;
  for (NodeId n = 1; n <= cfg.node_count; ++n) {
    if (!net.is_malicious(n)) honest.push_back(n);
  }
  unsigned before = net.forged_rreps();
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> pick(0, honest.size() - 1);
  double t = 40;
  for (int i = 0; i < 20;) {
    NodeId s = honest[pick(rng)], d = honest[pick(rng)];
    if (s == d) continue;
    net.initiate_route_discovery(s, d);
    t += 0.5;
    net.run_until(SimTime::from_seconds(t));
    ++i;
  }
  unsigned installs = 0;
  for (NodeId g : announced) installs += net.honest_installs_after_announcement(g);
  if (installs != 0) o.fail(std::to_string(installs) + " honest installs from announced nodes");
  if (net.forged_rreps() <= before) o.fail("announced attackers stopped forging; test is vacuous");
  if (o.pass) o.detail = std::to_string(net.forged_rreps() - before) + " forged replies, none installed";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"exact detection across the scenario suite", exact_detection},
      {"walk-through replays", walk_throughs},
      {"no false positives on honest networks", honest_runs},
      {"trust removes repeat probing", trust_decay},
      {"throughput under attack", throughput},
      {"route request overhead", overhead},
      {"malice test and trust symmetry", malice_test},
      {"deterministic output", reproducible},
      {"eliminated nodes stay out of routes", no_reentry},
  };
  int failed = 0;
  int index = 1;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << index++ << ": " << name << " (" << o.detail << ")\n";
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
