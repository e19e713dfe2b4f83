#include "debh/debh.hpp"

#include <algorithm>
#include <ostream>

namespace debh::pathcheck {

TrustState BchTable::get(NodeId n) const {
  auto it = entries_.find(n);
  return it == entries_.end() ? TrustState::Null : it->second;
}

void BchTable::nullify(std::span<const NodeId> ids) {
  for (NodeId n : ids) entries_[n] = TrustState::Null;
}

bool is_malicious(TrustState a_entry_for_b, TrustState b_entry_for_a) {
  return a_entry_for_b == TrustState::Trusted && b_entry_for_a != TrustState::Trusted;
}

void bch_update(BchTable& a_table, NodeId a, BchTable& b_table, NodeId b) {
  a_table.set(b, TrustState::Trusted);
  b_table.set(a, TrustState::Trusted);
}

CheckSession::CheckSession(std::uint64_t id, NodeId source, NodeId final_destination, std::uint64_t nonce)
    : id_(id),
      source_(source),
      final_destination_(final_destination),
      random_number_(nonce),
      current_target_(final_destination) {}

void CheckSession::advance_path(std::uint64_t nonce) {
  ++path_number_;
  random_number_ = nonce;
}

void CheckSession::add_generator(NodeId generator, NodeId generator_nhn, TrustState entry) {
  rrep_generator_queue_.push_back(generator);
  if (generator_nhn != kNoNode && generator_nhn != generator && !generator_claims_.count(generator)) {
    Claim c{generator, generator_nhn, entry};
    generator_claims_[generator] = c;
    claims_.emplace(generator, c);
  }
}

bool CheckSession::add_suspect(NodeId n) {
  if (is_suspect(n)) return false;
  blackhole_queue_.push_back(n);
  return true;
}

bool CheckSession::is_suspect(NodeId n) const {
  return std::find(blackhole_queue_.begin(), blackhole_queue_.end(), n) != blackhole_queue_.end();
}

std::optional<Claim> CheckSession::generator_claim(NodeId g) const {
  auto it = generator_claims_.find(g);
  if (it == generator_claims_.end()) return std::nullopt;
  return it->second;
}

const std::vector<BchEntryView>* CheckSession::evidence(NodeId n) const {
  auto it = evidence_.find(n);
  return it == evidence_.end() ? nullptr : &it->second;
}

NodeId CheckSession::follow_generators(NodeId t) const {
  // A claimed node that generated a reply is replaced by the next hop it
  // advertised in that reply.
  std::set<NodeId> seen;
  while (seen.insert(t).second) {
    auto it = generator_claims_.find(t);
    if (it == generator_claims_.end()) break;
    t = it->second.nhn;
  }
  return t;
}

NodeId CheckSession::next_target() {
  while (!outstanding_.empty()) {
    NodeId t = follow_generators(outstanding_.front());
    outstanding_.pop_front();
    if (t == final_destination_) return t;
    if (t == kNoNode || t == source_ || is_suspect(t) || resolved(t)) continue;
    return t;
  }
  return final_destination_;
}

NodeId CheckSession::on_suspect(NodeId suspect, std::optional<Claim> reported) {
  add_suspect(suspect);
  resolved_.insert(suspect);

  NodeId claimed = kNoNode;
  if (auto g = generator_claims_.find(suspect); g != generator_claims_.end()) {
    claimed = g->second.nhn;
  } else if (reported && reported->nhn != kNoNode && reported->nhn != suspect) {
    claimed = reported->nhn;
  }
  if (reported && reported->nhn != kNoNode) claims_.try_emplace(suspect, *reported);

  if (current_target_ != suspect && current_target_ != final_destination_ && !resolved(current_target_)) {
    outstanding_.push_front(current_target_);
  }
  if (claimed != kNoNode) outstanding_.push_front(claimed);
  return next_target();
}

NodeId CheckSession::on_target_resolved() {
  resolved_.insert(current_target_);
  return next_target();
}

std::vector<NodeId> CheckSession::subjects_for(NodeId target) const {
  std::set<NodeId> subjects(blackhole_queue_.begin(), blackhole_queue_.end());
  for (const auto& [claimant, c] : claims_) {
    if (c.nhn == target) subjects.insert(claimant);
  }
  subjects.erase(target);
  return {subjects.begin(), subjects.end()};
}

std::vector<NodeId> CheckSession::cross_check(NodeId target, std::span<const BchEntryView> reply) {
  evidence_[target].assign(reply.begin(), reply.end());
  std::vector<NodeId> confirmed;
  for (const auto& [claimant, c] : claims_) {
    if (c.nhn != target) continue;
    TrustState theirs = TrustState::Null;
    for (const auto& e : reply) {
      if (e.subject == claimant) theirs = e.entry;
    }
    if (is_malicious(c.entry, theirs)) {
      add_suspect(claimant);
      confirmed.push_back(claimant);
    }
  }
  return confirmed;
}

std::set<NodeId> adjudicate_queues(const CheckSession& s) {
  std::set<NodeId> malicious(s.blackhole_queue().begin(), s.blackhole_queue().end());
  for (NodeId g : s.rrep_generator_queue()) {
    if (s.verified(g) || malicious.count(g)) continue;
    auto claim = s.generator_claim(g);
    if (!claim) continue;
    if (malicious.count(claim->nhn)) {
      malicious.insert(g);
      continue;
    }
    if (const auto* ev = s.evidence(claim->nhn)) {
      auto it = std::find_if(ev->begin(), ev->end(), [g](const BchEntryView& e) { return e.subject == g; });
      bool has_way = it != ev->end() && (it->has_route || it->entry == TrustState::Trusted);
      if (!has_way) malicious.insert(g);
    }
  }
  return malicious;
}

std::string AuditLog::format_queue(const std::vector<NodeId>& q) {
  if (q.empty()) return "-";
  std::string out;
  for (NodeId n : q) {
    if (!out.empty()) out += ' ';
    out += std::to_string(n);
  }
  return out;
}

std::string AuditLog::format_row(const AuditRow& r) {
  return format_time(r.time) + "," + std::to_string(r.source) + "," + std::to_string(r.path_number) + "," + r.event +
         "," + r.subject + "," + format_queue(r.blackhole_queue) + "," + format_queue(r.rrep_generator_queue);
}

void AuditLog::write(std::ostream& out) const {
  out << kHeader << '\n';
  for (const auto& r : rows_) out << format_row(r) << '\n';
}

}  // namespace debh::pathcheck
