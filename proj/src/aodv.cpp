#include "debh/aodv.hpp"

#include <tuple>

namespace debh::aodv {

bool rrep_precedes(const Rrep& a, const Rrep& b) {
  if (a.dest_seq != b.dest_seq) return a.dest_seq > b.dest_seq;
  if (a.hop_count != b.hop_count) return a.hop_count < b.hop_count;
  return a.generator < b.generator;
}

const Rrep& select_best_rrep(std::span<const Rrep> candidates) {
  if (candidates.empty()) throw NoRouteError("no route reply received");
  const Rrep* best = &candidates.front();
  for (const Rrep& r : candidates.subspan(1)) {
    if (rrep_precedes(r, *best)) best = &r;
  }
  return *best;
}

namespace {
// Same ordering as rrep_precedes.
bool entry_precedes(const RoutingEntry& a, const RoutingEntry& b) {
  if (a.dest_seq != b.dest_seq) return a.dest_seq > b.dest_seq;
  return std::tie(a.hop_count, a.generator) < std::tie(b.hop_count, b.generator);
}
}  // namespace

bool RoutingTable::offer(const RoutingEntry& e) {
  auto it = entries_.find(e.destination);
  if (it == entries_.end()) {
    entries_.emplace(e.destination, e);
    return true;
  }
  RoutingEntry& cur = it->second;
  if (!cur.fresh || cur.tag != e.tag || entry_precedes(e, cur)) {
    cur = e;
    return true;
  }
  return false;
}

const RoutingEntry* RoutingTable::find(NodeId dest) const {
  auto it = entries_.find(dest);
  if (it == entries_.end() || !it->second.fresh) return nullptr;
  return &it->second;
}

const RoutingEntry* RoutingTable::find_any(NodeId dest) const {
  auto it = entries_.find(dest);
  return it == entries_.end() ? nullptr : &it->second;
}

bool RoutingTable::fresh_enough(NodeId dest, SequenceNumber known_seq) const {
  const RoutingEntry* e = find(dest);
  return e && e->dest_seq >= known_seq;
}

void RoutingTable::invalidate(NodeId dest) {
  auto it = entries_.find(dest);
  if (it != entries_.end()) it->second.fresh = false;
}

std::size_t RoutingTable::invalidate_via(const std::set<NodeId>& hops) {
  std::size_t n = 0;
  for (auto& [dest, e] : entries_) {
    if (e.fresh && hops.count(e.next_hop)) {
      e.fresh = false;
      ++n;
    }
  }
  return n;
}

}  // namespace debh::aodv
