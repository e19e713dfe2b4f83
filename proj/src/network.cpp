#include "debh/network.hpp"

#include <algorithm>

namespace debh {

const char* to_string(Defense d) { return d == Defense::Debh ? "debh" : "none"; }

Defense parse_defense(const std::string& s) {
  if (s == "debh") return Defense::Debh;
  if (s == "none") return Defense::None;
  throw ConfigError("defense must be debh or none, got '" + s + "'");
}

namespace {

enum class Purpose { Raw, Connection, Session };

bool contains(const std::vector<NodeId>& v, NodeId n) { return std::find(v.begin(), v.end(), n) != v.end(); }

std::string join_ids(const std::set<NodeId>& ids) {
  if (ids.empty()) return "-";
  std::string out;
  for (NodeId n : ids) {
    if (!out.empty()) out += ' ';
    out += std::to_string(n);
  }
  return out;
}

}  // namespace

struct Network::ProbeWait {
  NodeId nhn = kNoNode;
  std::uint64_t nonce = 0;
  sim::EventHandle timer;
  bool awaiting_claim = false;
};

struct Network::NodeState {
  NodeId id = kNoNode;
  std::optional<adversary::AdversaryProfile> adv;
  std::size_t group_key = 0;
  SequenceNumber own_seq = 0;
  std::uint32_t next_bid = 0;
  std::uint32_t next_alarm = 0;
  aodv::RoutingTable routes;
  aodv::FloodCache rreq_seen;
  aodv::FloodCache alarm_seen;
  std::map<aodv::DiscoveryTag, std::vector<NodeId>> flood_exclusions;
  std::map<NodeId, SequenceNumber> known_seq;
  std::set<NodeId> blacklist;
  pathcheck::BchTable bch;
  std::map<SessionKey, ProbeWait> waits;
  std::set<SessionKey> probed;
};

struct Network::Discovery {
  NodeId source = kNoNode;
  NodeId target = kNoNode;
  std::uint32_t bid = 0;
  unsigned attempt = 0;
  Purpose purpose = Purpose::Raw;
  std::uint64_t owner = 0;
  std::vector<NodeId> excluded;
  std::vector<std::pair<Rrep, NodeId>> candidates;
  sim::EventHandle window;
  sim::EventHandle timeout;
};

struct Network::Session {
  explicit Session(pathcheck::CheckSession c) : cs(std::move(c)) {}

  pathcheck::CheckSession cs;
  std::uint32_t connection = 0;
  std::uint32_t attempt = 0;
  unsigned breaks = 0;
  bool discovering = false;
  std::uint32_t discovery_bid = 0;
  bool finished = false;
  bool safe = false;
  std::set<NodeId> malicious;
  unsigned dcp = 0;
  unsigned ordinal = 0;
  SimTime started;
  SimTime finished_at;
  sim::EventHandle watchdog;
  sim::EventHandle bch_timer;
};

struct Network::Connection {
  enum class State { Idle, Acquiring, Sending, Done, Failed };

  std::uint32_t id = 0;
  ConnectionSpec spec;
  State state = State::Idle;
  unsigned sent = 0;
  unsigned acquisitions = 0;
  std::uint64_t session = 0;
  sim::EventHandle tick;
};

Network::Network(ProtocolConfig cfg, sim::Topology topo, std::optional<sim::MobilityParams> mobility,
                 std::uint64_t seed)
    : cfg_(cfg), topo_(std::move(topo)), rng_(seed) {
  if (topo_.node_count() == 0) throw ConfigError("node_count must be at least 1");
  for (NodeId n = 1; n <= topo_.node_count(); ++n) {
    auto st = std::make_unique<NodeState>();
    st->id = n;
    nodes_.push_back(std::move(st));
  }
  channel_ = std::make_unique<sim::Channel<Packet>>(sched_, topo_, cfg_.hop_latency);
  channel_->set_receiver([this](NodeId to, NodeId from, const Packet& p) { receive(to, from, p); });
  if (mobility && topo_.mode() == sim::Topology::Mode::Geometric) {
    mobility_ = std::make_unique<sim::RandomWaypoint>(*mobility, topo_, rng_);
    sched_.schedule_in(cfg_.mobility_tick, kNoNode, sim::EventKind::Mobility, "tick", [this] { mobility_tick(); });
  }
}

Network::~Network() = default;

Network::NodeState& Network::node(NodeId n) {
  if (!topo_.contains(n)) throw ConfigError("unknown node " + std::to_string(n));
  return *nodes_[n - 1];
}

const Network::NodeState& Network::node(NodeId n) const {
  if (!topo_.contains(n)) throw ConfigError("unknown node " + std::to_string(n));
  return *nodes_[n - 1];
}

void Network::add_adversary(const adversary::AdversaryProfile& p, std::size_t group_key) {
  adversary::validate(p);
  auto& n = node(p.id);
  n.adv = p;
  n.group_key = group_key;
  groups_.try_emplace(group_key);
}

bool Network::is_malicious(NodeId n) const { return node(n).adv.has_value(); }

std::set<NodeId> Network::planted() const {
  std::set<NodeId> out;
  for (const auto& n : nodes_) {
    if (n->adv) out.insert(n->id);
  }
  return out;
}

const aodv::RoutingTable& Network::routes(NodeId n) const { return node(n).routes; }
const pathcheck::BchTable& Network::bch(NodeId n) const { return node(n).bch; }
const std::set<NodeId>& Network::blacklist(NodeId n) const { return node(n).blacklist; }
std::uint64_t Network::channel_sends() const { return channel_->sends(); }
std::uint64_t Network::channel_deliveries() const { return channel_->deliveries(); }

unsigned Network::honest_installs_after_announcement(NodeId g) const {
  auto it = installs_after_announcement_.find(g);
  return it == installs_after_announcement_.end() ? 0 : it->second;
}

std::size_t Network::run_until(SimTime t_end) { return sched_.run_until(t_end); }

void Network::mobility_tick() {
  for (NodeId n = 1; n <= topo_.node_count(); ++n) mobility_->step(topo_, n, sched_.now(), cfg_.mobility_tick);
  sched_.schedule_in(cfg_.mobility_tick, kNoNode, sim::EventKind::Mobility, "tick", [this] { mobility_tick(); });
}

// ---------------------------------------------------------------------------
// Link layer

bool Network::unicast(NodeId from, NodeId to, Payload body) {
  std::string detail = std::string(kind_name(body)) + " to " + std::to_string(to);
  return channel_->unicast(from, to, Packet{std::move(body), kNoNode}, detail);
}

void Network::broadcast(NodeId from, Payload body) {
  std::string detail = kind_name(body);
  channel_->broadcast(from, Packet{std::move(body), kNoNode}, detail);
}

bool Network::send_routed(NodeId from, NodeId final_dest, Payload body) {
  if (from == final_dest) {
    sched_.schedule_in(SimTime{}, from, sim::EventKind::Timer, std::string("local ") + kind_name(body),
                       [this, from, body] { deliver_local(from, from, body); });
    return true;
  }
  const aodv::RoutingEntry* e = node(from).routes.find(final_dest);
  if (!e) {
    ++metrics_.routing_anomalies;
    return false;
  }
  std::string detail = std::string(kind_name(body)) + " for " + std::to_string(final_dest);
  if (!channel_->unicast(from, e->next_hop, Packet{std::move(body), final_dest}, detail)) {
    ++metrics_.routing_anomalies;
    return false;
  }
  return true;
}

void Network::forward_routed(NodeId at, const Packet& pkt) {
  const aodv::RoutingEntry* e = node(at).routes.find(pkt.final_dest);
  std::string detail = std::string(kind_name(pkt.body)) + " for " + std::to_string(pkt.final_dest);
  if (!e || !channel_->unicast(at, e->next_hop, pkt, detail)) ++metrics_.routing_anomalies;
}

void Network::receive(NodeId at, NodeId from, const Packet& pkt) {
  if (pkt.final_dest != kNoNode && pkt.final_dest != at) {
    forward_routed(at, pkt);
    return;
  }
  deliver_local(at, from, pkt.body);
}

void Network::deliver_local(NodeId at, NodeId from, const Payload& body) {
  NodeState& n = node(at);
  const bool evil = n.adv.has_value();

  if (const auto* p = std::get_if<Rreq>(&body)) {
    handle_rreq(at, from, *p);
  } else if (const auto* p = std::get_if<Rrep>(&body)) {
    handle_rrep(at, from, *p);
  } else if (const auto* p = std::get_if<DataControl>(&body)) {
    if (!evil) on_data_control(at, from, *p);
  } else if (const auto* p = std::get_if<DataControlReply>(&body)) {
    if (!evil) on_dcp_reply(at, from, *p);
  } else if (const auto* p = std::get_if<OrdinalProbe>(&body)) {
    if (!evil) on_ordinal_probe(at, from, *p);
  } else if (const auto* p = std::get_if<PathAck>(&body)) {
    if (at == p->session.source) on_path_ack(*p);
  } else if (const auto* p = std::get_if<NhnQuery>(&body)) {
    if (evil) {
      if (auto claim = adversary::answer_nhn_query(*n.adv, *p)) unicast(at, from, *claim);
    } else {
      const aodv::RoutingEntry* e = n.routes.find(p->toward);
      NodeId nhn = e ? e->next_hop : kNoNode;
      unicast(at, from, NhnClaim{at, nhn, n.bch.get(nhn), p->session});
    }
  } else if (const auto* p = std::get_if<NhnClaim>(&body)) {
    if (!evil) on_nhn_claim(at, from, *p);
  } else if (const auto* p = std::get_if<SuspectReport>(&body)) {
    if (at == p->session.source) on_suspect_report(*p);
  } else if (const auto* p = std::get_if<PathBreak>(&body)) {
    if (at == p->session.source) on_path_break(p->session);
  } else if (const auto* p = std::get_if<BchQuery>(&body)) {
    if (evil) {
      send_routed(at, p->asker, adversary::answer_bch_query(*n.adv, *p));
    } else {
      BchReply r{at, {}, p->session};
      for (NodeId s : p->subjects) {
        bool has_route = n.routes.find(s) != nullptr || n.bch.trusts(s);
        r.entries.push_back(BchEntryView{s, n.bch.get(s), has_route});
      }
      send_routed(at, p->asker, r);
    }
  } else if (const auto* p = std::get_if<BchReply>(&body)) {
    if (at == p->session.source) on_bch_reply(*p);
  } else if (const auto* p = std::get_if<Data>(&body)) {
    on_data(at, from, *p);
  } else if (const auto* p = std::get_if<RouteError>(&body)) {
    on_route_error(at, *p);
  } else if (const auto* p = std::get_if<Alarm>(&body)) {
    on_alarm(at, *p);
  }
}

// ---------------------------------------------------------------------------
// AODV

std::uint32_t Network::initiate_route_discovery(NodeId source, NodeId destination,
                                                const std::vector<NodeId>& excluded) {
  return start_discovery(source, destination, excluded, static_cast<int>(Purpose::Raw), 0, 0);
}

std::uint32_t Network::start_discovery(NodeId source, NodeId target, std::vector<NodeId> excluded, int purpose,
                                       std::uint64_t owner, unsigned attempt) {
  if (source == target) throw ConfigError("route discovery to self at node " + std::to_string(source));
  NodeState& n = node(source);
  node(target);
  const std::uint32_t bid = ++n.next_bid;
  ++n.own_seq;

  Rreq r;
  r.origin = source;
  r.destination = target;
  r.origin_seq = n.own_seq;
  r.dest_seq_known = n.known_seq[target];
  r.broadcast_id = bid;
  r.excluded = excluded;

  n.rreq_seen.first_time(source, bid);
  n.flood_exclusions[{source, bid}] = excluded;
  if (!excluded.empty()) n.routes.invalidate_via(std::set<NodeId>(excluded.begin(), excluded.end()));

  auto d = std::make_unique<Discovery>();
  d->source = source;
  d->target = target;
  d->bid = bid;
  d->attempt = attempt;
  d->purpose = static_cast<Purpose>(purpose);
  d->owner = owner;
  d->excluded = std::move(excluded);
  d->timeout = sched_.schedule_in(cfg_.discovery_timeout, source, sim::EventKind::Timer, "discovery_timeout",
                                  [this, source, bid] { discovery_failed(bid, source); });
  discoveries_[{source, bid}] = std::move(d);

  metrics_.record_rreq(source);
  broadcast(source, r);
  return bid;
}

RreqAction Network::handle_rreq(NodeId at, NodeId from, const Rreq& rreq) {
  NodeState& n = node(at);
  const bool honest = !n.adv;
  if (rreq.origin == at || contains(rreq.excluded, at)) return RreqAction::Drop;
  if (contains(rreq.excluded, from) || (honest && n.blacklist.count(from))) return RreqAction::Drop;
  if (!n.rreq_seen.first_time(rreq.origin, rreq.broadcast_id)) return RreqAction::DropDuplicate;
  ++rreq_processed_[{at, rreq.origin, rreq.broadcast_id}];

  const aodv::DiscoveryTag tag{rreq.origin, rreq.broadcast_id};
  n.flood_exclusions[tag] = rreq.excluded;
  if (honest && !rreq.excluded.empty()) {
    n.routes.invalidate_via(std::set<NodeId>(rreq.excluded.begin(), rreq.excluded.end()));
  }
  n.routes.offer(aodv::RoutingEntry{rreq.origin, from, rreq.hop_count + 1, rreq.origin_seq, true, kNoNode, kNoNode,
                                    tag});
  SequenceNumber& known = n.known_seq[rreq.origin];
  known = std::max(known, rreq.origin_seq);

  if (rreq.destination == at) {
    Rrep r{rreq.origin, at, ++n.own_seq, 0, at, at, TrustState::Null, rreq.broadcast_id};
    send_rrep(at, from, r);
    return RreqAction::Reply;
  }
  if (n.adv) {
    if (auto forged = adversary::forge_rrep(*n.adv, groups_[n.group_key], rreq)) {
      ++forged_rreps_;
      send_rrep(at, from, *forged);
      return RreqAction::Reply;
    }
  } else if (cfg_.cache_reply) {
    const aodv::RoutingEntry* e = n.routes.find(rreq.destination);
    if (e && e->dest_seq >= rreq.dest_seq_known && e->dest_seq > 0 && !contains(rreq.excluded, e->next_hop)) {
      Rrep r{rreq.origin, rreq.destination, e->dest_seq, e->hop_count, at, e->next_hop, n.bch.get(e->next_hop),
             rreq.broadcast_id};
      send_rrep(at, from, r);
      return RreqAction::Reply;
    }
  }
  Rreq fwd = rreq;
  ++fwd.hop_count;
  broadcast(at, fwd);
  return RreqAction::Rebroadcast;
}

void Network::send_rrep(NodeId at, NodeId next_hop, const Rrep& rrep) {
  if (!unicast(at, next_hop, rrep)) ++metrics_.routing_anomalies;
}

RrepAction Network::handle_rrep(NodeId at, NodeId from, const Rrep& rrep) {
  NodeState& n = node(at);
  const aodv::DiscoveryTag tag{rrep.origin, rrep.broadcast_id};
  if (!n.adv) {
    if (n.blacklist.count(rrep.generator) || n.blacklist.count(from)) return RrepAction::Discard;
    auto ex = n.flood_exclusions.find(tag);
    if (ex != n.flood_exclusions.end() && (contains(ex->second, rrep.generator) || contains(ex->second, from))) {
      return RrepAction::Discard;
    }
  }
  Rrep hop = rrep;
  ++hop.hop_count;

  if (at == rrep.origin) {
    auto it = discoveries_.find({at, rrep.broadcast_id});
    if (it == discoveries_.end() || it->second->target != rrep.destination) return RrepAction::Discard;
    Discovery& d = *it->second;
    d.candidates.emplace_back(hop, from);
    if (d.candidates.size() == 1) {
      sched_.cancel(d.timeout);
      const std::uint32_t bid = d.bid;
      d.window = sched_.schedule_in(cfg_.rrep_window, at, sim::EventKind::Timer, "rrep_window",
                                    [this, at, bid] { close_discovery(bid, at); });
    }
    return RrepAction::DeliverToSource;
  }

  aodv::RoutingEntry e{rrep.destination, from, hop.hop_count, rrep.dest_seq, true, rrep.generator,
                       rrep.generator_nhn, tag};
  if (n.routes.offer(e) && !n.adv && announced_.count(rrep.generator)) ++installs_after_announcement_[rrep.generator];
  SequenceNumber& known = n.known_seq[rrep.destination];
  known = std::max(known, rrep.dest_seq);

  const aodv::RoutingEntry* back = n.routes.find(rrep.origin);
  if (!back) {
    ++metrics_.routing_anomalies;
    return RrepAction::Discard;
  }
  send_rrep(at, back->next_hop, hop);
  return RrepAction::ForwardToSource;
}

void Network::close_discovery(std::uint32_t bid, NodeId source) {
  auto it = discoveries_.find({source, bid});
  if (it == discoveries_.end()) return;
  std::unique_ptr<Discovery> d = std::move(it->second);
  discoveries_.erase(it);

  std::vector<Rrep> rreps;
  for (const auto& [r, via] : d->candidates) rreps.push_back(r);
  const Rrep& best = aodv::select_best_rrep(rreps);
  const NodeId via = d->candidates[static_cast<std::size_t>(&best - rreps.data())].second;

  NodeState& n = node(source);
  n.routes.offer(aodv::RoutingEntry{d->target, via, best.hop_count, best.dest_seq, true, best.generator,
                                    best.generator_nhn, aodv::DiscoveryTag{source, bid}});
  SequenceNumber& known = n.known_seq[d->target];
  known = std::max(known, best.dest_seq);

  switch (d->purpose) {
    case Purpose::Raw:
      break;
    case Purpose::Connection: {
      auto c = connections_.find(static_cast<std::uint32_t>(d->owner));
      if (c != connections_.end() && c->second->state == Connection::State::Acquiring) start_sending(*c->second);
      break;
    }
    case Purpose::Session: {
      auto s = sessions_.find(d->owner);
      if (s != sessions_.end() && !s->second->finished && s->second->discovering &&
          s->second->discovery_bid == bid) {
        session_route_selected(*s->second, best);
      }
      break;
    }
  }
}

void Network::discovery_failed(std::uint32_t bid, NodeId source) {
  auto it = discoveries_.find({source, bid});
  if (it == discoveries_.end() || !it->second->candidates.empty()) return;
  std::unique_ptr<Discovery> d = std::move(it->second);
  discoveries_.erase(it);

  if (d->attempt + 1 < cfg_.discovery_attempts) {
    std::uint32_t next =
        start_discovery(source, d->target, d->excluded, static_cast<int>(d->purpose), d->owner, d->attempt + 1);
    if (d->purpose == Purpose::Session) {
      auto s = sessions_.find(d->owner);
      if (s != sessions_.end() && s->second->discovery_bid == bid) s->second->discovery_bid = next;
    }
    return;
  }
  switch (d->purpose) {
    case Purpose::Raw:
      break;
    case Purpose::Connection: {
      auto c = connections_.find(static_cast<std::uint32_t>(d->owner));
      if (c != connections_.end()) connection_failed(*c->second);
      break;
    }
    case Purpose::Session: {
      auto s = sessions_.find(d->owner);
      if (s != sessions_.end() && !s->second->finished && s->second->discovery_bid == bid) {
        session_route_failed(*s->second);
      }
      break;
    }
  }
}

// ---------------------------------------------------------------------------
// Path check, intermediate nodes

void Network::probe_next(NodeId at, const SessionKey& key, std::uint64_t nonce) {
  NodeState& n = node(at);
  if (!n.probed.insert(key).second) {
    report_break(at, key);
    return;
  }
  const aodv::RoutingEntry* e = n.routes.find(key.target);
  if (!e) {
    report_break(at, key);
    return;
  }
  const NodeId nhn = e->next_hop;
  auto sit = sessions_.find(key.session);
  Session* s = sit == sessions_.end() ? nullptr : sit->second.get();
  const bool trusted = n.bch.trusts(nhn);
  if (s) {
    audit_.append(pathcheck::AuditRow{sched_.now(), key.source, key.path_number, trusted ? "trusted_probe" : "probe",
                                      std::to_string(at) + ">" + std::to_string(nhn), s->cs.blackhole_queue(),
                                      s->cs.rrep_generator_queue()});
  }

  if (trusted) {
    if (!unicast(at, nhn, OrdinalProbe{at, nonce, key})) {
      n.routes.invalidate(key.target);
      report_break(at, key);
    } else if (s) {
      ++s->ordinal;
    }
    return;
  }
  if (!unicast(at, nhn, DataControl{at, nhn, nonce, key})) {
    n.routes.invalidate(key.target);
    report_break(at, key);
    return;
  }
  ++metrics_.data_control_packets;
  if (s) ++s->dcp;
  ProbeWait w;
  w.nhn = nhn;
  w.nonce = nonce;
  w.timer = sched_.schedule_in(cfg_.effective_reply_timeout(), at, sim::EventKind::Timer, "probe_timeout",
                               [this, at, key] { on_probe_timeout(at, key); });
  n.waits[key] = w;
}

void Network::continue_probe(NodeId at, const SessionKey& key, std::uint64_t nonce) {
  if (at == key.target) {
    send_routed(at, key.source, PathAck{at, nonce, key});
  } else {
    probe_next(at, key, nonce);
  }
}

void Network::on_data_control(NodeId at, NodeId from, const DataControl& dcp) {
  unicast(at, from, DataControlReply{at, dcp.random_number, dcp.session});
  dcp_reply_senders_.insert(at);
  continue_probe(at, dcp.session, dcp.random_number);
}

void Network::on_ordinal_probe(NodeId at, NodeId, const OrdinalProbe& p) {
  continue_probe(at, p.session, p.random_number);
}

void Network::on_dcp_reply(NodeId at, NodeId from, const DataControlReply& r) {
  NodeState& n = node(at);
  auto it = n.waits.find(r.session);
  if (it == n.waits.end() || it->second.awaiting_claim) return;
  if (r.node_id != it->second.nhn || from != it->second.nhn) return;
  sched_.cancel(it->second.timer);
  const bool match = r.random_number == it->second.nonce;
  const NodeId nhn = it->second.nhn;
  n.waits.erase(it);
  if (match) {
    pathcheck::bch_update(n.bch, at, node(from).bch, from);
    trust_exchanges_.emplace_back(at, from);
  } else {
    report_suspect(at, r.session, nhn, SuspectCause::Mismatch, std::nullopt);
  }
}

void Network::on_probe_timeout(NodeId at, SessionKey key) {
  NodeState& n = node(at);
  auto it = n.waits.find(key);
  if (it == n.waits.end()) return;
  ProbeWait& w = it->second;
  if (!w.awaiting_claim) {
    if (!topo_.linked(at, w.nhn)) {
      n.waits.erase(it);
      n.routes.invalidate(key.target);
      report_break(at, key);
      return;
    }
    w.awaiting_claim = true;
    unicast(at, w.nhn, NhnQuery{at, key.target, key});
    w.timer = sched_.schedule_in(cfg_.effective_reply_timeout(), at, sim::EventKind::Timer, "claim_timeout",
                                 [this, at, key] { on_probe_timeout(at, key); });
    return;
  }
  const NodeId suspect = w.nhn;
  n.waits.erase(it);
  report_suspect(at, key, suspect, SuspectCause::Timeout, std::nullopt);
}

void Network::on_nhn_claim(NodeId at, NodeId from, const NhnClaim& c) {
  NodeState& n = node(at);
  auto it = n.waits.find(c.session);
  if (it == n.waits.end() || !it->second.awaiting_claim || from != it->second.nhn) return;
  sched_.cancel(it->second.timer);
  const NodeId suspect = it->second.nhn;
  n.waits.erase(it);
  report_suspect(at, c.session, suspect, SuspectCause::Timeout, c);
}

void Network::report_suspect(NodeId at, const SessionKey& key, NodeId suspect, SuspectCause cause,
                             std::optional<NhnClaim> claim) {
  SuspectReport r;
  r.reporter = at;
  r.suspect = suspect;
  r.cause = cause;
  if (claim) {
    r.claimed_nhn = claim->claimed_nhn;
    r.claimed_entry = claim->claimed_entry;
  }
  r.session = key;
  send_routed(at, key.source, r);
}

void Network::report_break(NodeId at, const SessionKey& key) { send_routed(at, key.source, PathBreak{at, key}); }

// ---------------------------------------------------------------------------
// Path check, source side

std::uint64_t Network::schedule_check(NodeId source, NodeId destination, SimTime at) {
  node(source);
  node(destination);
  if (source == destination) throw ConfigError("path check from a node to itself");
  const std::uint64_t id = next_session_++;
  sched_.schedule(at, source, sim::EventKind::Timer, "check", [this, source, destination, id] {
    start_session(source, destination, 0, id);
  });
  return id;
}

SessionKey Network::key_of(const Session& s) const {
  return SessionKey{s.cs.source(), s.cs.id(), s.cs.path_number(), s.cs.current_target(), s.attempt};
}

Network::Session* Network::live_session(const SessionKey& key) {
  auto it = sessions_.find(key.session);
  if (it == sessions_.end()) return nullptr;
  Session& s = *it->second;
  if (s.finished || key_of(s) != key) return nullptr;
  return &s;
}

void Network::audit_row(const Session& s, const std::string& event, const std::string& subject) {
  audit_.append(pathcheck::AuditRow{sched_.now(), s.cs.source(), s.cs.path_number(), event, subject,
                                    s.cs.blackhole_queue(), s.cs.rrep_generator_queue()});
}

void Network::touch(Session& s) {
  sched_.cancel(s.watchdog);
  const std::uint64_t id = s.cs.id();
  s.watchdog = sched_.schedule_in(cfg_.session_watchdog, s.cs.source(), sim::EventKind::Timer, "session_watchdog",
                                  [this, id] {
                                    auto it = sessions_.find(id);
                                    if (it == sessions_.end() || it->second->finished) return;
                                    Session& s = *it->second;
                                    if (s.discovering || s.bch_timer.valid()) {
                                      touch(s);
                                      return;
                                    }
                                    on_path_break(key_of(s));
                                  });
}

std::uint64_t Network::start_session(NodeId source, NodeId destination, std::uint32_t connection,
                                     std::uint64_t id) {
  if (source == destination) throw ConfigError("path check from a node to itself");
  if (id == 0) id = next_session_++;
  auto owned = std::make_unique<Session>(pathcheck::CheckSession(id, source, destination, rng_()));
  Session& s = *owned;
  sessions_[id] = std::move(owned);
  s.connection = connection;
  s.started = sched_.now();
  audit_row(s, "start", std::to_string(destination));
  touch(s);

  if (const aodv::RoutingEntry* e = node(source).routes.find(destination)) {
    Rrep r{source, destination, e->dest_seq, e->hop_count, e->generator, e->generator_nhn, TrustState::Null,
           e->tag.broadcast_id};
    session_route_selected(s, r);
  } else {
    session_discover(s);
  }
  return id;
}

void Network::session_discover(Session& s) {
  const NodeId source = s.cs.source();
  std::set<NodeId> ex(s.cs.blackhole_queue().begin(), s.cs.blackhole_queue().end());
  const auto& bl = node(source).blacklist;
  ex.insert(bl.begin(), bl.end());
  ex.erase(s.cs.current_target());
  audit_row(s, "discover", std::to_string(s.cs.current_target()));
  s.discovering = true;
  s.discovery_bid = start_discovery(source, s.cs.current_target(), std::vector<NodeId>(ex.begin(), ex.end()),
                                    static_cast<int>(Purpose::Session), s.cs.id(), 0);
}

void Network::session_route_selected(Session& s, const Rrep& best) {
  s.discovering = false;
  s.cs.add_generator(best.generator, best.generator_nhn, best.generator_bch_entry_for_nhn);
  audit_row(s, "select", std::to_string(best.generator));
  touch(s);
  node(s.cs.source()).probed.erase(key_of(s));
  probe_next(s.cs.source(), key_of(s), s.cs.random_number());
}

void Network::session_route_failed(Session& s) {
  s.discovering = false;
  audit_row(s, "unreachable", std::to_string(s.cs.current_target()));
  if (s.cs.current_target() == s.cs.final_destination()) {
    finish_session(s, false);
    return;
  }
  reroute(s, s.cs.on_target_resolved());
}

void Network::reroute(Session& s, NodeId next_target) {
  if (s.cs.path_number() >= cfg_.max_path_number) {
    finish_session(s, false);
    return;
  }
  sched_.cancel(s.bch_timer);
  s.bch_timer = {};
  s.cs.advance_path(rng_());
  s.cs.set_current_target(next_target);
  s.attempt = 0;
  touch(s);
  session_discover(s);
}

void Network::on_suspect_report(const SuspectReport& r) {
  Session* s = live_session(r.session);
  if (!s || s->discovering) return;
  std::optional<pathcheck::Claim> claim;
  if (r.claimed_nhn != kNoNode) claim = pathcheck::Claim{r.suspect, r.claimed_nhn, r.claimed_entry};
  const NodeId next = s->cs.on_suspect(r.suspect, claim);
  audit_row(*s, "suspect", std::to_string(r.suspect));
  reroute(*s, next);
}

void Network::on_path_break(const SessionKey& key) {
  Session* s = live_session(key);
  if (!s || s->discovering) return;
  audit_row(*s, "path_break", std::to_string(key.target));
  if (++s->breaks > cfg_.max_path_breaks) {
    finish_session(*s, false);
    return;
  }
  sched_.cancel(s->bch_timer);
  s->bch_timer = {};
  ++s->attempt;
  node(s->cs.source()).routes.invalidate(s->cs.current_target());
  touch(*s);
  session_discover(*s);
}

void Network::on_path_ack(const PathAck& a) {
  Session* s = live_session(a.session);
  if (!s || s->discovering || s->bch_timer.valid() || a.random_number != s->cs.random_number()) return;
  audit_row(*s, "ack", std::to_string(a.target));
  if (s->cs.path_number() == 1) {
    finish_session(*s, true);
    return;
  }
  const NodeId target = s->cs.current_target();
  if (!send_routed(s->cs.source(), target, BchQuery{s->cs.source(), s->cs.subjects_for(target), key_of(*s)})) {
    on_path_break(key_of(*s));
    return;
  }
  const std::uint64_t id = s->cs.id();
  s->bch_timer = sched_.schedule_in(cfg_.bch_query_timeout, s->cs.source(), sim::EventKind::Timer, "bch_timeout",
                                    [this, id] {
                                      auto it = sessions_.find(id);
                                      if (it == sessions_.end() || it->second->finished) return;
                                      Session& s = *it->second;
                                      s.bch_timer = {};
                                      audit_row(s, "bch_timeout", std::to_string(s.cs.current_target()));
                                      if (s.cs.current_target() == s.cs.final_destination()) {
                                        finish_session(s, true);
                                      } else {
                                        reroute(s, s.cs.on_target_resolved());
                                      }
                                    });
}

void Network::on_bch_reply(const BchReply& r) {
  Session* s = live_session(r.session);
  if (!s || !s->bch_timer.valid() || r.responder != s->cs.current_target()) return;
  sched_.cancel(s->bch_timer);
  s->bch_timer = {};
  const NodeId target = s->cs.current_target();
  auto confirmed = s->cs.cross_check(target, r.entries);
  audit_row(*s, "verify", std::to_string(target));
  for (NodeId c : confirmed) audit_row(*s, "confirm", std::to_string(c));
  if (target == s->cs.final_destination()) {
    finish_session(*s, true);
  } else {
    reroute(*s, s->cs.on_target_resolved());
  }
}

void Network::finish_session(Session& s, bool safe) {
  s.finished = true;
  s.safe = safe;
  s.finished_at = sched_.now();
  s.discovering = false;
  sched_.cancel(s.watchdog);
  sched_.cancel(s.bch_timer);
  s.bch_timer = {};
  s.malicious = pathcheck::adjudicate_queues(s.cs);
  audit_row(s, safe ? "safe" : "unsafe", join_ids(s.malicious));
  const NodeId source = s.cs.source();
  if (safe) metrics_.mark_secure_path(s.cs.id(), source, s.cs.final_destination(), s.started, sched_.now());
  if (!s.malicious.empty()) {
    metrics_.record_detection(s.malicious);
    broadcast_elimination(source, s.malicious);
    audit_row(s, "alarm", join_ids(s.malicious));
  }
  if (s.connection != 0) {
    auto it = connections_.find(s.connection);
    if (it != connections_.end() && it->second->state == Connection::State::Acquiring) {
      if (safe) {
        start_sending(*it->second);
      } else {
        connection_failed(*it->second);
      }
    }
  }
}

std::vector<SessionReport> Network::sessions() const {
  std::vector<SessionReport> out;
  for (const auto& [id, s] : sessions_) {
    SessionReport r;
    r.id = id;
    r.source = s->cs.source();
    r.destination = s->cs.final_destination();
    r.finished = s->finished;
    r.safe = s->safe;
    r.path_number = s->cs.path_number();
    r.blackhole_queue = s->cs.blackhole_queue();
    r.rrep_generator_queue = s->cs.rrep_generator_queue();
    r.malicious = s->malicious;
    r.data_control_packets = s->dcp;
    r.ordinal_probes = s->ordinal;
    r.started = s->started;
    r.finished_at = s->finished_at;
    out.push_back(std::move(r));
  }
  return out;
}

std::optional<SessionReport> Network::session(std::uint64_t id) const {
  for (auto& r : sessions()) {
    if (r.id == id) return r;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Connections and data

std::uint32_t Network::add_connection(const ConnectionSpec& spec) {
  node(spec.source);
  node(spec.destination);
  if (spec.source == spec.destination) throw ConfigError("connection from a node to itself");
  if (spec.rate_pps <= 0.0) throw ConfigError("packet rate must be positive");
  auto c = std::make_unique<Connection>();
  c->id = next_connection_++;
  c->spec = spec;
  const std::uint32_t id = c->id;
  connections_[id] = std::move(c);
  sched_.schedule(spec.start, spec.source, sim::EventKind::Traffic, "connection " + std::to_string(id), [this, id] {
    Connection& c = *connections_.at(id);
    if (c.state == Connection::State::Idle) acquire_route(c);
  });
  return id;
}

void Network::acquire_route(Connection& c) {
  sched_.cancel(c.tick);
  c.tick = {};
  if (++c.acquisitions > cfg_.discovery_attempts + 2) {
    c.state = Connection::State::Failed;
    return;
  }
  c.state = Connection::State::Acquiring;
  if (cfg_.defense == Defense::Debh) {
    c.session = start_session(c.spec.source, c.spec.destination, c.id, 0);
    return;
  }
  if (node(c.spec.source).routes.find(c.spec.destination)) {
    start_sending(c);
  } else {
    const auto& bl = node(c.spec.source).blacklist;
    start_discovery(c.spec.source, c.spec.destination, std::vector<NodeId>(bl.begin(), bl.end()),
                    static_cast<int>(Purpose::Connection), c.id, 0);
  }
}

void Network::connection_failed(Connection& c) {
  if (c.acquisitions > cfg_.discovery_attempts + 1) {
    c.state = Connection::State::Failed;
    return;
  }
  c.state = Connection::State::Idle;
  const std::uint32_t id = c.id;
  c.tick = sched_.schedule_in(cfg_.discovery_timeout, c.spec.source, sim::EventKind::Traffic, "connection_retry",
                              [this, id] {
                                Connection& c = *connections_.at(id);
                                c.tick = {};
                                if (c.state == Connection::State::Idle) acquire_route(c);
                              });
}

void Network::start_sending(Connection& c) {
  c.state = Connection::State::Sending;
  if (c.tick.valid()) return;
  const std::uint32_t id = c.id;
  c.tick = sched_.schedule_in(SimTime{}, c.spec.source, sim::EventKind::Traffic, "data",
                              [this, id] { send_next_packet(id); });
}

void Network::send_next_packet(std::uint32_t conn_id) {
  Connection& c = *connections_.at(conn_id);
  c.tick = {};
  if (c.state != Connection::State::Sending) return;
  if (c.sent >= c.spec.packets) {
    c.state = Connection::State::Done;
    return;
  }
  const NodeId src = c.spec.source;
  const NodeId dst = c.spec.destination;
  NodeState& n = node(src);
  const aodv::RoutingEntry* e = n.routes.find(dst);
  if (!e) {
    acquire_route(c);
    return;
  }
  Data d{src, dst, c.id, c.sent, c.spec.payload_bytes, any_alarm_};
  if (!unicast(src, e->next_hop, d)) {
    n.routes.invalidate(dst);
    acquire_route(c);
    return;
  }
  ++c.sent;
  metrics_.record_sent(src);
  if (any_alarm_) ++metrics_.sent_after_detection;
  if (c.sent >= c.spec.packets) {
    c.state = Connection::State::Done;
    return;
  }
  c.tick = sched_.schedule_in(SimTime::from_seconds(1.0 / c.spec.rate_pps), src, sim::EventKind::Traffic, "data",
                              [this, conn_id] { send_next_packet(conn_id); });
}

void Network::on_data(NodeId at, NodeId, const Data& d) {
  NodeState& n = node(at);
  if (n.adv) {
    adversary::note_swallowed(groups_[n.group_key], d.source, cfg_.victim_release_packets);
    return;
  }
  if (at == d.destination) {
    metrics_.record_delivery(d.source);
    if (d.after_alarm) ++metrics_.delivered_after_detection;
    return;
  }
  const aodv::RoutingEntry* e = n.routes.find(d.destination);
  if (e && unicast(at, e->next_hop, d)) return;
  if (e) n.routes.invalidate(d.destination);
  send_routed(at, d.source, RouteError{at, d.destination});
}

void Network::on_route_error(NodeId at, const RouteError& e) {
  node(at).routes.invalidate(e.unreachable);
  for (auto& [id, c] : connections_) {
    if (c->spec.source == at && c->spec.destination == e.unreachable && c->state == Connection::State::Sending) {
      acquire_route(*c);
    }
  }
}

// ---------------------------------------------------------------------------
// Elimination alarm

void Network::broadcast_elimination(NodeId source, const std::set<NodeId>& malicious) {
  NodeState& n = node(source);
  Alarm a{source, ++n.next_alarm, std::vector<NodeId>(malicious.begin(), malicious.end())};
  n.alarm_seen.first_time(source, a.alarm_id);
  announced_.insert(malicious.begin(), malicious.end());
  any_alarm_ = true;
  last_alarm_ = sched_.now();
  apply_alarm(source, a);
  broadcast(source, a);
}

void Network::apply_alarm(NodeId at, const Alarm& a) {
  NodeState& n = node(at);
  if (n.adv) return;
  n.bch.nullify(a.malicious_ids);
  std::set<NodeId> listed(a.malicious_ids.begin(), a.malicious_ids.end());
  listed.erase(at);
  n.blacklist.insert(listed.begin(), listed.end());
  n.routes.invalidate_via(listed);
  for (NodeId m : listed) n.routes.invalidate(m);
}

void Network::on_alarm(NodeId at, const Alarm& a) {
  NodeState& n = node(at);
  if (!n.alarm_seen.first_time(a.origin, a.alarm_id)) return;
  apply_alarm(at, a);
  broadcast(at, a);
}

}  // namespace debh
