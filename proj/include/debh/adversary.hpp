#pragma once

// Black-hole behaviour: forged route replies, silent data drops and forged
// answers to trust probes.
//
// Attackers are organised in groups. A group lists its members in claim
// order; each member names the next one as its next hop when asked, and the
// last member names the first, so cover stories form a cycle. One member per
// group (the last) forges route replies; the others attract traffic only by
// relaying it and cover for their partners.

#include <optional>
#include <string>
#include <vector>

#include "debh/packet.hpp"

namespace debh::adversary {

enum class AttackMode { Single, Cooperative, Distributed };
enum class Role { Forger, Cover };
enum class ProbeAnswer { Forged, Silent };

const char* to_string(AttackMode m);
AttackMode parse_attack_mode(const std::string& s);

struct AdversaryProfile {
  NodeId id = kNoNode;
  AttackMode mode = AttackMode::Single;
  Role role = Role::Forger;
  // Every other malicious node this one knows about.
  std::vector<NodeId> peer_ids;
  // Claim cycle of this node's group, including the node itself.
  std::vector<NodeId> group;
  std::size_t group_index = 0;
  SequenceNumber seq_inflation = 100;
  bool one_victim_at_a_time = true;
  ProbeAnswer probe_answer = ProbeAnswer::Forged;
};

/// Shared by the members of one group.
struct GroupState {
  std::optional<NodeId> victim;
  std::uint32_t received_from_victim = 0;
};

/// Throws ConfigError when the profile contradicts its mode.
void validate(const AdversaryProfile& p);

bool knows(const AdversaryProfile& p, NodeId other);

/// Next hop the attacker claims: its successor in the group cycle, or the
/// true destination for a lone attacker.
NodeId cover_nhn(const AdversaryProfile& p, NodeId true_destination);

bool may_forge(const AdversaryProfile& p, const GroupState& g, const Rreq& rreq);

/// Forged reply for `rreq`, or nullopt when role or policy forbids one.
/// A forged reply engages the group with the requesting source.
std::optional<Rrep> forge_rrep(const AdversaryProfile& p, GroupState& g, const Rreq& rreq);

/// Called for every data packet a member swallows. Once the victim has sent
/// `release_after` packets into the group, the group may pick a new victim.
void note_swallowed(GroupState& g, NodeId data_source, std::uint32_t release_after);

/// Reply to a next-hop query; nullopt in silent mode.
std::optional<NhnClaim> answer_nhn_query(const AdversaryProfile& p, const NhnQuery& q);

/// Claims trust and a route for every subject.
BchReply answer_bch_query(const AdversaryProfile& p, const BchQuery& q);

}  // namespace debh::adversary
