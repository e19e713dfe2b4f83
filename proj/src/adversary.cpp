#include "debh/adversary.hpp"

#include <algorithm>

namespace debh::adversary {

const char* to_string(AttackMode m) {
  switch (m) {
    case AttackMode::Single: return "single";
    case AttackMode::Cooperative: return "cooperative";
    case AttackMode::Distributed: return "distributed";
  }
  return "?";
}

AttackMode parse_attack_mode(const std::string& s) {
  if (s == "single") return AttackMode::Single;
  if (s == "cooperative") return AttackMode::Cooperative;
  if (s == "distributed") return AttackMode::Distributed;
  throw ConfigError("attack mode must be one of single|cooperative|distributed, got '" + s + "'");
}

void validate(const AdversaryProfile& p) {
  if (p.id == kNoNode) throw ConfigError("adversary without node id");
  if (std::find(p.group.begin(), p.group.end(), p.id) == p.group.end()) {
    throw ConfigError("adversary " + std::to_string(p.id) + " missing from its own group");
  }
  if (p.mode == AttackMode::Single && !p.peer_ids.empty()) {
    throw ConfigError("single black hole " + std::to_string(p.id) + " must not have peers");
  }
  if (p.mode != AttackMode::Single && p.peer_ids.empty()) {
    throw ConfigError("cooperating black hole " + std::to_string(p.id) + " needs at least one peer");
  }
  if (p.seq_inflation == 0) throw ConfigError("seq_inflation must be at least 1");
}

bool knows(const AdversaryProfile& p, NodeId other) {
  return std::find(p.peer_ids.begin(), p.peer_ids.end(), other) != p.peer_ids.end();
}

NodeId cover_nhn(const AdversaryProfile& p, NodeId true_destination) {
  if (p.group.size() < 2) return true_destination;
  auto it = std::find(p.group.begin(), p.group.end(), p.id);
  ++it;
  return it == p.group.end() ? p.group.front() : *it;
}

bool may_forge(const AdversaryProfile& p, const GroupState& g, const Rreq& rreq) {
  if (p.role != Role::Forger) return false;
  // Discoveries aimed at the attacker or its allies are answered honestly.
  if (rreq.destination == p.id || knows(p, rreq.destination) || knows(p, rreq.origin)) return false;
  if (p.one_victim_at_a_time && g.victim && *g.victim != rreq.origin) return false;
  return true;
}

std::optional<Rrep> forge_rrep(const AdversaryProfile& p, GroupState& g, const Rreq& rreq) {
  if (!may_forge(p, g, rreq)) return std::nullopt;
  if (!g.victim || *g.victim != rreq.origin) {
    g.victim = rreq.origin;
    g.received_from_victim = 0;
  }
  Rrep r;
  r.origin = rreq.origin;
  r.destination = rreq.destination;
  r.dest_seq = rreq.dest_seq_known + p.seq_inflation;
  r.hop_count = 0;
  r.generator = p.id;
  r.generator_nhn = cover_nhn(p, rreq.destination);
  r.generator_bch_entry_for_nhn = TrustState::Trusted;
  r.broadcast_id = rreq.broadcast_id;
  return r;
}

void note_swallowed(GroupState& g, NodeId data_source, std::uint32_t release_after) {
  if (!g.victim || *g.victim != data_source) return;
  if (++g.received_from_victim >= release_after) {
    g.victim.reset();
    g.received_from_victim = 0;
  }
}

std::optional<NhnClaim> answer_nhn_query(const AdversaryProfile& p, const NhnQuery& q) {
  if (p.probe_answer == ProbeAnswer::Silent) return std::nullopt;
  return NhnClaim{p.id, cover_nhn(p, q.toward), TrustState::Trusted, q.session};
}

BchReply answer_bch_query(const AdversaryProfile& p, const BchQuery& q) {
  BchReply r;
  r.responder = p.id;
  r.session = q.session;
  for (NodeId s : q.subjects) r.entries.push_back(BchEntryView{s, TrustState::Trusted, true});
  return r;
}

}  // namespace debh::adversary
