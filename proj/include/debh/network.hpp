#pragma once

// The simulated network: one agent per node running AODV, the black-hole
// behaviour for planted attackers, and the path-check protocol on honest
// nodes. Sources drive path checks and data connections.

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "debh/adversary.hpp"
#include "debh/aodv.hpp"
#include "debh/debh.hpp"
#include "debh/metrics.hpp"
#include "debh/packet.hpp"
#include "debh/sim_engine.hpp"

namespace debh {

enum class Defense { Debh, None };

const char* to_string(Defense d);
Defense parse_defense(const std::string& s);

struct ProtocolConfig {
  SimTime hop_latency = SimTime::from_micros(10'000);
  // Zero means four hop latencies.
  SimTime reply_timeout{};
  SimTime rrep_window = SimTime::from_micros(200'000);
  SimTime discovery_timeout = SimTime::from_micros(1'000'000);
  unsigned discovery_attempts = 3;
  SimTime session_watchdog = SimTime::from_micros(2'000'000);
  SimTime bch_query_timeout = SimTime::from_micros(1'000'000);
  SimTime mobility_tick = SimTime::from_micros(100'000);
  unsigned max_path_number = 64;
  unsigned max_path_breaks = 5;
  // A group frees its victim after swallowing this many of its packets.
  std::uint32_t victim_release_packets = 10;
  // Honest intermediate nodes answer from their route cache.
  bool cache_reply = false;
  Defense defense = Defense::Debh;

  SimTime effective_reply_timeout() const {
    return reply_timeout > SimTime{} ? reply_timeout : hop_latency * 4;
  }
};

struct ConnectionSpec {
  NodeId source = kNoNode;
  NodeId destination = kNoNode;
  unsigned packets = 10;
  double rate_pps = 2.0;
  unsigned payload_bytes = 512;
  SimTime start;
};

enum class RreqAction { Reply, Rebroadcast, DropDuplicate, Drop };
enum class RrepAction { ForwardToSource, DeliverToSource, Discard };

/// Outcome of one path check as seen from its source.
struct SessionReport {
  std::uint64_t id = 0;
  NodeId source = kNoNode;
  NodeId destination = kNoNode;
  bool finished = false;
  bool safe = false;
  std::uint32_t path_number = 0;
  std::vector<NodeId> blackhole_queue;
  std::vector<NodeId> rrep_generator_queue;
  std::set<NodeId> malicious;
  unsigned data_control_packets = 0;
  unsigned ordinal_probes = 0;
  SimTime started;
  SimTime finished_at;
};

class Network {
 public:
  Network(ProtocolConfig cfg, sim::Topology topo, std::optional<sim::MobilityParams> mobility, std::uint64_t seed);
  ~Network();
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  /// Plants an attacker. `group_key` identifies the cooperating group whose
  /// members share one victim.
  void add_adversary(const adversary::AdversaryProfile& p, std::size_t group_key);
  bool is_malicious(NodeId n) const;
  std::set<NodeId> planted() const;

  std::uint32_t add_connection(const ConnectionSpec& c);
  /// Runs a path check from `source` to `destination` at `at` without data.
  std::uint64_t schedule_check(NodeId source, NodeId destination, SimTime at);

  /// Floods a route request now; returns its broadcast id. Throws
  /// ConfigError when source equals destination.
  std::uint32_t initiate_route_discovery(NodeId source, NodeId destination, const std::vector<NodeId>& excluded = {});

  std::size_t run_until(SimTime t_end);
  SimTime now() const { return sched_.now(); }

  // Packet handlers, public so tests can drive single nodes.
  void receive(NodeId at, NodeId from, const Packet& pkt);
  RreqAction handle_rreq(NodeId at, NodeId from, const Rreq& rreq);
  RrepAction handle_rrep(NodeId at, NodeId from, const Rrep& rrep);

  /// Floods an elimination alarm from `source`.
  void broadcast_elimination(NodeId source, const std::set<NodeId>& malicious);

  // Observers.
  const sim::Topology& topology() const { return topo_; }
  sim::Topology& mutable_topology() { return topo_; }
  const sim::RandomWaypoint* mobility() const { return mobility_.get(); }
  const aodv::RoutingTable& routes(NodeId n) const;
  const pathcheck::BchTable& bch(NodeId n) const;
  const std::set<NodeId>& blacklist(NodeId n) const;
  const metrics::RunMetrics& metrics() const { return metrics_; }
  const pathcheck::AuditLog& audit() const { return audit_; }
  std::vector<SessionReport> sessions() const;
  std::optional<SessionReport> session(std::uint64_t id) const;
  sim::Scheduler& scheduler() { return sched_; }
  const ProtocolConfig& config() const { return cfg_; }
  SimTime last_alarm_time() const { return last_alarm_; }
  std::set<NodeId> announced() const { return announced_; }
  /// Routes installed at honest nodes from replies generated by `g`,
  /// counted after `g` was announced malicious.
  unsigned honest_installs_after_announcement(NodeId g) const;
  /// Senders of every DataControlReply so far.
  const std::set<NodeId>& dcp_reply_senders() const { return dcp_reply_senders_; }
  /// Completed probe/reply exchanges (a, b) in order.
  const std::vector<std::pair<NodeId, NodeId>>& trust_exchanges() const { return trust_exchanges_; }
  /// Route replies forged by attackers so far.
  unsigned forged_rreps() const { return forged_rreps_; }
  std::uint64_t channel_sends() const;
  std::uint64_t channel_deliveries() const;
  /// Non-duplicate RREQ receptions, keyed by (node, origin, broadcast id).
  const std::map<std::tuple<NodeId, NodeId, std::uint32_t>, unsigned>& rreq_processed() const {
    return rreq_processed_;
  }

 private:
  struct NodeState;
  struct Discovery;
  struct Session;
  struct Connection;
  struct ProbeWait;

  NodeState& node(NodeId n);
  const NodeState& node(NodeId n) const;

  // Link layer.
  bool unicast(NodeId from, NodeId to, Payload body);
  void broadcast(NodeId from, Payload body);
  /// Hop-by-hop routed control; returns false when the first hop fails.
  bool send_routed(NodeId from, NodeId final_dest, Payload body);
  void forward_routed(NodeId at, const Packet& pkt);
  void deliver_local(NodeId at, NodeId from, const Payload& body);

  // AODV.
  void send_rrep(NodeId at, NodeId next_hop, const Rrep& rrep);
  void close_discovery(std::uint32_t bid, NodeId source);
  void discovery_failed(std::uint32_t bid, NodeId source);
  std::uint32_t start_discovery(NodeId source, NodeId target, std::vector<NodeId> excluded, int purpose,
                                std::uint64_t owner, unsigned attempt);

  // Path check: intermediate-node side.
  void probe_next(NodeId at, const SessionKey& key, std::uint64_t nonce);
  void continue_probe(NodeId at, const SessionKey& key, std::uint64_t nonce);
  void on_data_control(NodeId at, NodeId from, const DataControl& dcp);
  void on_ordinal_probe(NodeId at, NodeId from, const OrdinalProbe& p);
  void on_dcp_reply(NodeId at, NodeId from, const DataControlReply& r);
  void on_probe_timeout(NodeId at, SessionKey key);
  void on_nhn_claim(NodeId at, NodeId from, const NhnClaim& c);
  void report_suspect(NodeId at, const SessionKey& key, NodeId suspect, SuspectCause cause,
                      std::optional<NhnClaim> claim);
  void report_break(NodeId at, const SessionKey& key);

  // Path check: source side.
  std::uint64_t start_session(NodeId source, NodeId destination, std::uint32_t connection, std::uint64_t id);
  void session_discover(Session& s);
  void session_route_selected(Session& s, const Rrep& best);
  void session_route_failed(Session& s);
  void on_suspect_report(const SuspectReport& r);
  void on_path_ack(const PathAck& a);
  void on_bch_reply(const BchReply& r);
  void on_path_break(const SessionKey& key);
  void reroute(Session& s, NodeId next_target);
  void finish_session(Session& s, bool safe);
  void touch(Session& s);
  Session* live_session(const SessionKey& key);
  SessionKey key_of(const Session& s) const;
  void audit_row(const Session& s, const std::string& event, const std::string& subject);

  // Connections.
  void acquire_route(Connection& c);
  void start_sending(Connection& c);
  void send_next_packet(std::uint32_t conn_id);
  void on_data(NodeId at, NodeId from, const Data& d);
  void on_route_error(NodeId at, const RouteError& e);
  void connection_failed(Connection& c);

  void on_alarm(NodeId at, const Alarm& a);
  void apply_alarm(NodeId at, const Alarm& a);
  void mobility_tick();

  ProtocolConfig cfg_;
  sim::Scheduler sched_;
  sim::Topology topo_;
  Rng rng_;
  std::unique_ptr<sim::RandomWaypoint> mobility_;
  std::unique_ptr<sim::Channel<Packet>> channel_;
  std::vector<std::unique_ptr<NodeState>> nodes_;
  std::map<std::size_t, adversary::GroupState> groups_;
  std::map<std::pair<NodeId, std::uint32_t>, std::unique_ptr<Discovery>> discoveries_;
  std::map<std::uint64_t, std::unique_ptr<Session>> sessions_;
  std::map<std::uint32_t, std::unique_ptr<Connection>> connections_;
  std::uint64_t next_session_ = 1;
  std::uint32_t next_connection_ = 1;
  metrics::RunMetrics metrics_;
  pathcheck::AuditLog audit_;
  SimTime last_alarm_;
  bool any_alarm_ = false;
  std::set<NodeId> announced_;
  std::map<NodeId, unsigned> installs_after_announcement_;
  std::set<NodeId> dcp_reply_senders_;
  std::vector<std::pair<NodeId, NodeId>> trust_exchanges_;
  std::map<std::tuple<NodeId, NodeId, std::uint32_t>, unsigned> rreq_processed_;
  unsigned forged_rreps_ = 0;
};

}  // namespace debh
