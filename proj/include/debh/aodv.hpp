#pragma once

// AODV building blocks: the per-node routing table, flood de-duplication and
// freshest-reply selection. The packet-driven state machine lives in
// network.cpp; everything here is pure and unit-testable.

#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "debh/packet.hpp"

namespace debh::aodv {

class NoRouteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The flood that installed an entry: (origin, broadcast id).
struct DiscoveryTag {
  NodeId origin = kNoNode;
  std::uint32_t broadcast_id = 0;
  bool operator==(const DiscoveryTag&) const = default;
  auto operator<=>(const DiscoveryTag&) const = default;
};

struct RoutingEntry {
  NodeId destination = kNoNode;
  NodeId next_hop = kNoNode;
  std::uint32_t hop_count = 0;
  SequenceNumber dest_seq = 0;
  bool fresh = false;
  NodeId generator = kNoNode;
  NodeId generator_nhn = kNoNode;
  DiscoveryTag tag;
};

/// True when `a` is strictly preferred over `b`: higher destination sequence
/// number, then fewer hops, then smaller generator id.
bool rrep_precedes(const Rrep& a, const Rrep& b);

/// Freshest reply of a non-empty candidate set. Throws NoRouteError when
/// `candidates` is empty.
const Rrep& select_best_rrep(std::span<const Rrep> candidates);

class RoutingTable {
 public:
  /// Installs `e` unless an entry from the same flood is already better.
  /// An entry from a different flood, or an invalid one, is always replaced.
  /// Returns true when the table changed.
  bool offer(const RoutingEntry& e);

  /// Valid entry for `dest`, if any.
  const RoutingEntry* find(NodeId dest) const;
  /// Any entry, valid or not.
  const RoutingEntry* find_any(NodeId dest) const;

  /// Entry exists, is fresh and at least as new as `known_seq`.
  bool fresh_enough(NodeId dest, SequenceNumber known_seq) const;

  void invalidate(NodeId dest);
  /// Invalidates every entry whose next hop is in `hops`; returns the count.
  std::size_t invalidate_via(const std::set<NodeId>& hops);

  const std::map<NodeId, RoutingEntry>& entries() const { return entries_; }

 private:
  std::map<NodeId, RoutingEntry> entries_;
};

/// Remembers (origin, id) pairs already processed; `first_time` returns true
/// exactly once per pair.
class FloodCache {
 public:
  bool first_time(NodeId origin, std::uint32_t id) { return seen_.insert({origin, id}).second; }
  bool seen(NodeId origin, std::uint32_t id) const { return seen_.count({origin, id}) > 0; }

 private:
  std::set<std::pair<NodeId, std::uint32_t>> seen_;
};

/// Walks next-hop entries toward `dest` starting at `from`. Returns the node
/// sequence including both ends, or nullopt on a missing entry or a loop.
template <typename TableLookup>
std::optional<std::vector<NodeId>> walk_route(NodeId from, NodeId dest, TableLookup&& table_of,
                                              std::size_t max_hops = 256) {
  std::vector<NodeId> path{from};
  std::set<NodeId> seen{from};
  NodeId at = from;
  while (at != dest) {
    const RoutingEntry* e = table_of(at).find(dest);
    if (!e) return std::nullopt;
    at = e->next_hop;
    if (!seen.insert(at).second || path.size() > max_hops) return std::nullopt;
    path.push_back(at);
  }
  return path;
}

}  // namespace debh::aodv
