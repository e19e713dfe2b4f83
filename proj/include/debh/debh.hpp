#pragma once

// Path security analysis state and decisions: trust tables, the malice test,
// the per-check session with its two queues, queue adjudication and the
// audit trail.

#include <deque>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "debh/packet.hpp"

namespace debh::pathcheck {

/// Black hole Check table. Entries survive neighbour churn; absent entries
/// read as Null.
class BchTable {
 public:
  TrustState get(NodeId n) const;
  void set(NodeId n, TrustState t) { entries_[n] = t; }
  bool trusts(NodeId n) const { return get(n) == TrustState::Trusted; }
  /// Elimination: listed nodes go back to Null.
  void nullify(std::span<const NodeId> ids);
  const std::map<NodeId, TrustState>& entries() const { return entries_; }

 private:
  std::map<NodeId, TrustState> entries_;
};

/// A is malicious iff A's entry for B is 1 while B's entry for A is 0.
/// Null counts as 0.
bool is_malicious(TrustState a_entry_for_b, TrustState b_entry_for_a);

/// A completed probe/reply exchange makes both ends trust each other.
void bch_update(BchTable& a_table, NodeId a, BchTable& b_table, NodeId b);

/// "claimant says its next hop is `nhn` and trusts it as `entry`".
struct Claim {
  NodeId claimant = kNoNode;
  NodeId nhn = kNoNode;
  TrustState entry = TrustState::Null;
};

/// Source-side state of one path check. Holds the suspects ("black hole"
/// queue), the reply generators in selection order, every cover claim heard,
/// and the targets still to be reached.
class CheckSession {
 public:
  CheckSession(std::uint64_t id, NodeId source, NodeId final_destination, std::uint64_t nonce);

  std::uint64_t id() const { return id_; }
  NodeId source() const { return source_; }
  NodeId final_destination() const { return final_destination_; }
  std::uint32_t path_number() const { return path_number_; }
  std::uint64_t random_number() const { return random_number_; }
  NodeId current_target() const { return current_target_; }
  const std::vector<NodeId>& blackhole_queue() const { return blackhole_queue_; }
  const std::vector<NodeId>& rrep_generator_queue() const { return rrep_generator_queue_; }

  /// Next sub-path: path number +1 and a fresh nonce.
  void advance_path(std::uint64_t nonce);
  void set_current_target(NodeId t) { current_target_ = t; }

  /// Appends the generator of the selected reply and remembers the next hop
  /// it advertised (unless it advertised itself).
  void add_generator(NodeId generator, NodeId generator_nhn, TrustState entry);

  /// No duplicates; returns true when newly queued.
  bool add_suspect(NodeId n);
  bool is_suspect(NodeId n) const;

  /// A suspect was queued. Records what it claims, keeps an interrupted
  /// target for later, and returns the next node to route to. The final
  /// destination is returned when no claimed node is left to visit.
  NodeId on_suspect(NodeId suspect, std::optional<Claim> reported);

  /// The current target was acknowledged or could not be reached; returns
  /// the next node to route to (final destination when nothing is pending).
  NodeId on_target_resolved();

  /// Nodes whose trust entries the source asks `target` about.
  std::vector<NodeId> subjects_for(NodeId target) const;

  /// Applies the malice test to every claim naming `target`, using the
  /// target's reply. Confirmed claimants join the suspects; all of them are
  /// returned.
  std::vector<NodeId> cross_check(NodeId target, std::span<const BchEntryView> reply);

  bool verified(NodeId n) const { return evidence_.count(n) > 0; }
  const std::vector<BchEntryView>* evidence(NodeId n) const;
  /// Claims learned from replies and probe answers, by claimant.
  const std::map<NodeId, Claim>& claims() const { return claims_; }
  std::optional<Claim> generator_claim(NodeId g) const;
  bool resolved(NodeId n) const { return resolved_.count(n) > 0; }

 private:
  NodeId follow_generators(NodeId t) const;
  NodeId next_target();

  std::uint64_t id_;
  NodeId source_;
  NodeId final_destination_;
  std::uint32_t path_number_ = 1;
  std::uint64_t random_number_;
  NodeId current_target_;
  std::vector<NodeId> blackhole_queue_;
  std::vector<NodeId> rrep_generator_queue_;
  std::map<NodeId, Claim> generator_claims_;
  std::map<NodeId, Claim> claims_;
  std::deque<NodeId> outstanding_;
  std::set<NodeId> resolved_;
  std::map<NodeId, std::vector<BchEntryView>> evidence_;
};

/// Walks the generator queue first-in first-out:
///  - a generator whose advertised next hop is already condemned is condemned
///    (this also carries a condemned head through to later claimants);
///  - a generator whose advertised next hop was verified and reports no way
///    to it is condemned;
///  - a verified generator, or one whose next hop vouches for it, is safe.
/// Returns suspects plus condemned generators.
std::set<NodeId> adjudicate_queues(const CheckSession& s);

struct AuditRow {
  SimTime time;
  NodeId source = kNoNode;
  std::uint32_t path_number = 0;
  std::string event;
  std::string subject;
  std::vector<NodeId> blackhole_queue;
  std::vector<NodeId> rrep_generator_queue;
};

/// `time,source,path_number,event,subject,blackhole_queue,rrep_generator_queue`
/// Queues are space-separated ids, "-" when empty.
class AuditLog {
 public:
  static constexpr const char* kHeader = "time,source,path_number,event,subject,blackhole_queue,rrep_generator_queue";

  void append(AuditRow row) { rows_.push_back(std::move(row)); }
  const std::vector<AuditRow>& rows() const { return rows_; }
  void write(std::ostream& out) const;

  static std::string format_queue(const std::vector<NodeId>& q);
  static std::string format_row(const AuditRow& r);

 private:
  std::vector<AuditRow> rows_;
};

}  // namespace debh::pathcheck
