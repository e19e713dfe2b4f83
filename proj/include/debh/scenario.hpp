#pragma once

// Scenario configuration, node/attacker placement, single runs, the seven
// scenario suite, the throughput sweep and fixture replay.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "debh/adversary.hpp"
#include "debh/metrics.hpp"
#include "debh/network.hpp"

namespace debh::scenario {

struct AttackSpec {
  // nullopt: no attackers.
  std::optional<adversary::AttackMode> mode;
  // Explicit groups in claim order; the last member of each group forges.
  std::vector<std::vector<NodeId>> groups;
  // Random placement when `groups` is empty.
  unsigned count = 0;
  unsigned group_count = 1;
  double cluster_radius_m = 50.0;
  double group_separation_m = 400.0;
  adversary::ProbeAnswer probe_answer = adversary::ProbeAnswer::Forged;
  SequenceNumber seq_inflation = 100;
  bool one_victim_at_a_time = true;
};

struct TrafficSpec {
  unsigned connections = 1;
  unsigned packets = 10;
  double rate_pps = 2.0;
  unsigned payload_bytes = 512;
  double start_s = 1.0;
  // Connection starts are spread uniformly over [start_s, start_s + jitter].
  double start_jitter_s = 0.0;
  // Explicit (source, destination) pairs; random honest pairs otherwise.
  std::vector<std::pair<NodeId, NodeId>> pairs;
  // Path checks without data, at start_s.
  std::vector<std::pair<NodeId, NodeId>> checks;
};

struct ExpectedRow {
  NodeId node = kNoNode;
  NodeId nhn = kNoNode;
  std::uint32_t path_number = 0;
  std::vector<NodeId> generators;
  std::vector<NodeId> blackholes;

  bool operator==(const ExpectedRow&) const = default;
};

struct ReplayExpectation {
  std::vector<ExpectedRow> rows;
  std::optional<std::set<NodeId>> suspects_include;
  std::optional<std::set<NodeId>> malicious;
  std::optional<unsigned> rreq_count;
};

/// Defaults follow the standard simulation parameters: 30 nodes on
/// 1000 m x 1000 m, 200 m range, 600 s, random waypoint at 2-20 m/s with 15 s
/// pauses, 2 packets/s of 512 bytes.
struct ScenarioConfig {
  std::string name = "default";
  std::uint64_t seed = 1;
  double duration_s = 600.0;
  Defense defense = Defense::Debh;

  unsigned node_count = 30;
  double arena_w_m = 1000.0;
  double arena_h_m = 1000.0;
  double range_m = 200.0;
  bool static_topology = false;
  std::vector<std::pair<NodeId, NodeId>> edges;
  std::vector<std::pair<NodeId, sim::Vec2>> positions;

  bool mobile = true;
  double min_speed = 2.0;
  double max_speed = 20.0;
  double pause_s = 15.0;

  AttackSpec attack;
  TrafficSpec traffic;
  ProtocolConfig protocol;
  ReplayExpectation expect;
};

/// Parses the `key = value` / `[section]` format. Absent fields keep their
/// defaults. Throws ConfigError naming the offending field.
ScenarioConfig parse_config(std::istream& in, const std::string& origin = "<config>");
ScenarioConfig load_config(const std::string& path);

/// Checks ranges and cross-field constraints; throws ConfigError.
void validate(const ScenarioConfig& cfg);

/// Concrete layout drawn for one seed.
struct Placement {
  std::vector<sim::Vec2> positions;
  std::vector<std::vector<NodeId>> groups;
  std::vector<std::pair<NodeId, NodeId>> pairs;
  std::vector<SimTime> starts;
  unsigned attempts = 0;
};

/// Draws positions, attacker groups and connection endpoints. Random
/// layouts are redrawn until the honest nodes around the endpoints form one
/// component that every attacker borders.
Placement place(const ScenarioConfig& cfg, Rng& rng);

struct Built {
  std::unique_ptr<Network> network;
  Placement placement;
  std::vector<std::uint64_t> checks;
};

Built build(const ScenarioConfig& cfg);

struct RunResult {
  std::string scenario;
  std::uint64_t seed = 0;
  std::set<NodeId> planted;
  metrics::RunMetrics metrics;
  pathcheck::AuditLog audit;
  std::vector<SessionReport> sessions;
  SimTime last_alarm;
  bool any_alarm = false;
};

RunResult run_scenario(const ScenarioConfig& cfg, std::ostream* trace = nullptr);

/// The seven attack scenarios: single; cooperative with 2, 3, 5, 7, 9
/// members; distributed with two pairs.
std::vector<ScenarioConfig> standard_suite(const ScenarioConfig& base);

struct SuiteRow {
  std::string scenario;
  std::uint64_t seed = 0;
  unsigned planted = 0;
  RunResult result;
};

/// Rows ordered by (scenario index, seed) whatever `jobs` is.
std::vector<SuiteRow> run_suite(const std::vector<ScenarioConfig>& suite, const std::vector<std::uint64_t>& seeds,
                                unsigned jobs = 1);

void write_suite_csv(std::ostream& out, const std::vector<SuiteRow>& rows);
/// One column per scenario: mean detected, planted, and exact-match count.
void write_suite_summary(std::ostream& out, const std::vector<SuiteRow>& rows);

/// Static-position network with nested attacker slots: the `attackers`
/// nodes nearest a fixed centre node are malicious, the centre one forging,
/// and connection endpoints are drawn from nodes outside the largest slot set.
ScenarioConfig throughput_config(const ScenarioConfig& base, unsigned attackers, unsigned connections);

struct SweepPoint {
  unsigned connections = 0;
  Defense defense = Defense::Debh;
  unsigned sent = 0;
  unsigned delivered = 0;
  unsigned sent_after_alarm = 0;
  unsigned delivered_after_alarm = 0;
};

/// Connection counts 5, 10, ..., 30 under both defenses.
std::vector<SweepPoint> throughput_sweep(const ScenarioConfig& base, unsigned attackers);
void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& points);

struct ReplayResult {
  std::vector<ExpectedRow> actual;
  std::vector<std::string> mismatches;
  std::vector<NodeId> final_suspects;
  std::set<NodeId> malicious;
  unsigned rreq_count = 0;
  pathcheck::AuditLog audit;

  bool ok() const { return mismatches.empty(); }
};

ReplayResult replay(const ScenarioConfig& fixture);
/// Loads `<name>.cfg` from `dir` (the bundled fixture directory by default).
ReplayResult replay_fixture(const std::string& name, const std::string& dir = DEBH_FIXTURE_DIR);

}  // namespace debh::scenario
