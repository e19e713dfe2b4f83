#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "debh/sim_engine.hpp"

namespace debh {

using SequenceNumber = std::uint64_t;

/// One cell of a Black-hole-Check table.
enum class TrustState : std::uint8_t { Null, Untrusted, Trusted };

const char* to_string(TrustState t);

/// Identifies one path check: the source, its session, and which sub-path
/// (path number) the packet belongs to.
struct SessionKey {
  NodeId source = kNoNode;
  std::uint64_t session = 0;
  std::uint32_t path_number = 0;
  NodeId target = kNoNode;
  // Bumped when a broken sub-path is rediscovered.
  std::uint32_t attempt = 0;

  bool operator==(const SessionKey&) const = default;
  auto operator<=>(const SessionKey&) const = default;
};

struct Rreq {
  NodeId origin = kNoNode;
  NodeId destination = kNoNode;
  SequenceNumber origin_seq = 0;
  SequenceNumber dest_seq_known = 0;
  std::uint32_t broadcast_id = 0;
  std::uint32_t hop_count = 0;
  // Nodes the origin refuses as relays or generators.
  std::vector<NodeId> excluded;
};

struct Rrep {
  NodeId origin = kNoNode;
  NodeId destination = kNoNode;
  SequenceNumber dest_seq = 0;
  std::uint32_t hop_count = 0;
  NodeId generator = kNoNode;
  NodeId generator_nhn = kNoNode;
  TrustState generator_bch_entry_for_nhn = TrustState::Null;
  // Flood this reply answers.
  std::uint32_t broadcast_id = 0;
};

/// The probe: generator id, generator's next hop, and the session nonce.
/// Data-class, so black holes swallow it.
struct DataControl {
  NodeId node_id = kNoNode;
  NodeId nhn = kNoNode;
  std::uint64_t random_number = 0;
  SessionKey session;
};

struct DataControlReply {
  NodeId node_id = kNoNode;
  std::uint64_t random_number = 0;
  SessionKey session;
};

/// Forwarded between already-trusted hops; no reply expected.
struct OrdinalProbe {
  NodeId node_id = kNoNode;
  std::uint64_t random_number = 0;
  SessionKey session;
};

/// Sent by the sub-path target back to the source.
struct PathAck {
  NodeId target = kNoNode;
  std::uint64_t random_number = 0;
  SessionKey session;
};

struct NhnQuery {
  NodeId asker = kNoNode;
  NodeId toward = kNoNode;
  SessionKey session;
};

struct NhnClaim {
  NodeId claimant = kNoNode;
  NodeId claimed_nhn = kNoNode;
  TrustState claimed_entry = TrustState::Null;
  SessionKey session;
};

enum class SuspectCause : std::uint8_t { Timeout, Mismatch };

struct SuspectReport {
  NodeId reporter = kNoNode;
  NodeId suspect = kNoNode;
  SuspectCause cause = SuspectCause::Timeout;
  NodeId claimed_nhn = kNoNode;  // kNoNode when the suspect stayed silent
  TrustState claimed_entry = TrustState::Null;
  SessionKey session;
};

/// An IN lost its route or link while probing; not evidence of malice.
struct PathBreak {
  NodeId reporter = kNoNode;
  SessionKey session;
};

struct BchEntryView {
  NodeId subject = kNoNode;
  TrustState entry = TrustState::Null;
  bool has_route = false;

  bool operator==(const BchEntryView&) const = default;
};

struct BchQuery {
  NodeId asker = kNoNode;
  std::vector<NodeId> subjects;
  SessionKey session;
};

struct BchReply {
  NodeId responder = kNoNode;
  std::vector<BchEntryView> entries;
  SessionKey session;
};

struct Data {
  NodeId source = kNoNode;
  NodeId destination = kNoNode;
  std::uint32_t flow_id = 0;
  std::uint32_t seq = 0;
  std::uint32_t payload_bytes = 0;
  bool after_alarm = false;
};

struct RouteError {
  NodeId reporter = kNoNode;
  NodeId unreachable = kNoNode;
};

struct Alarm {
  NodeId origin = kNoNode;
  std::uint32_t alarm_id = 0;
  std::vector<NodeId> malicious_ids;
};

using Payload = std::variant<Rreq, Rrep, DataControl, DataControlReply, OrdinalProbe, PathAck, NhnQuery, NhnClaim,
                             SuspectReport, PathBreak, BchQuery, BchReply, Data, RouteError, Alarm>;

/// Link-layer frame. `final_dest` is set for hop-by-hop routed control
/// traffic; kNoNode means the payload is for the receiving neighbor.
struct Packet {
  Payload body;
  NodeId final_dest = kNoNode;
};

/// Data and DataControl are data-class; everything else is control-class.
bool is_data_class(const Payload& p);

/// Short label such as "rreq" or "dcp" for traces.
const char* kind_name(const Payload& p);

}  // namespace debh
