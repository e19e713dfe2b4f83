#include "debh/sim_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <ostream>

namespace debh {

SimTime SimTime::from_seconds(double s) {
  return SimTime(static_cast<std::int64_t>(std::llround(s * 1e6)));
}

std::string format_time(SimTime t) {
  std::int64_t us = t.micros();
  const char* sign = "";
  if (us < 0) {
    sign = "-";
    us = -us;
  }
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s%lld.%06lld", sign, static_cast<long long>(us / 1'000'000),
                static_cast<long long>(us % 1'000'000));
  return buf;
}

namespace sim {

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Deliver: return "deliver";
    case EventKind::Timer: return "timer";
    case EventKind::Mobility: return "mobility";
    case EventKind::Traffic: return "traffic";
  }
  return "?";
}

EventHandle Scheduler::schedule(SimTime at, NodeId node, EventKind kind, std::string detail, Action action) {
  if (at < now_) {
    throw ConfigError("event scheduled at " + format_time(at) + " before clock " + format_time(now_));
  }
  std::uint64_t id = next_seq_++;
  queue_.push(Entry{at, id, node, kind, std::move(detail), std::move(action)});
  live_.insert(id);
  return EventHandle{id};
}

bool Scheduler::cancel(EventHandle handle) {
  return live_.erase(handle.id) > 0;
}

std::size_t Scheduler::run_until(SimTime t_end) {
  if (t_end < now_) throw ConfigError("run_until target precedes the clock");
  std::size_t processed = 0;
  while (!queue_.empty() && queue_.top().at <= t_end) {
    // priority_queue::top is const; the entry is moved out before popping.
    Entry e = std::move(const_cast<Entry&>(queue_.top()));
    queue_.pop();
    if (live_.erase(e.seq) == 0) continue;
    now_ = e.at;
    ++processed;
    if (trace_ || keep_log_) {
      std::string line = format_time(e.at) + "," + std::to_string(e.node) + "," + to_string(e.kind) + "," + e.detail;
      if (trace_) *trace_ << line << '\n';
      if (keep_log_) log_.push_back(std::move(line));
    }
    if (e.action) e.action();
  }
  now_ = t_end;
  return processed;
}

double distance(Vec2 a, Vec2 b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

Topology Topology::geometric(std::vector<Vec2> positions, double range_m) {
  if (range_m <= 0.0) throw ConfigError("range_m must be positive");
  Topology t;
  t.mode_ = Mode::Geometric;
  t.count_ = positions.size();
  t.range_m_ = range_m;
  t.positions_ = std::move(positions);
  return t;
}

Topology Topology::static_adjacency(std::size_t node_count, const std::vector<std::pair<NodeId, NodeId>>& edges) {
  Topology t;
  t.mode_ = Mode::StaticAdjacency;
  t.count_ = node_count;
  t.positions_.assign(node_count, Vec2{});
  t.adjacency_.assign(node_count, {});
  for (auto [u, v] : edges) {
    if (!t.contains(u) || !t.contains(v)) {
      throw ConfigError("edge " + std::to_string(u) + " " + std::to_string(v) + " names an unknown node");
    }
    if (u == v) throw ConfigError("self-loop edge on node " + std::to_string(u));
    t.adjacency_[u - 1].insert(v);
    t.adjacency_[v - 1].insert(u);
  }
  return t;
}

void Topology::check(NodeId n) const {
  if (!contains(n)) throw ConfigError("unknown node " + std::to_string(n));
}

std::vector<NodeId> Topology::neighbors(NodeId node) const {
  check(node);
  if (mode_ == Mode::StaticAdjacency) {
    const auto& adj = adjacency_[node - 1];
    return {adj.begin(), adj.end()};
  }
  std::vector<NodeId> out;
  const Vec2 p = positions_[node - 1];
  for (NodeId other = 1; other <= count_; ++other) {
    if (other != node && distance(p, positions_[other - 1]) <= range_m_) out.push_back(other);
  }
  return out;
}

bool Topology::linked(NodeId a, NodeId b) const {
  check(a);
  check(b);
  if (a == b) return false;
  if (mode_ == Mode::StaticAdjacency) return adjacency_[a - 1].count(b) > 0;
  return distance(positions_[a - 1], positions_[b - 1]) <= range_m_;
}

Vec2 Topology::position(NodeId n) const {
  check(n);
  return positions_[n - 1];
}

void Topology::set_position(NodeId n, Vec2 p) {
  check(n);
  positions_[n - 1] = p;
}

std::vector<std::size_t> Topology::hop_distances(NodeId from) const {
  check(from);
  std::vector<std::size_t> dist(count_ + 1, 0);
  std::vector<bool> seen(count_ + 1, false);
  std::deque<NodeId> frontier{from};
  seen[from] = true;
  while (!frontier.empty()) {
    NodeId u = frontier.front();
    frontier.pop_front();
    for (NodeId v : neighbors(u)) {
      if (seen[v]) continue;
      seen[v] = true;
      dist[v] = dist[u] + 1;
      frontier.push_back(v);
    }
  }
  return dist;
}

RandomWaypoint::RandomWaypoint(MobilityParams params, const Topology& topo, Rng& rng)
    : params_(params), rng_(rng) {
  if (params_.min_speed <= 0.0 || params_.max_speed < params_.min_speed) {
    throw ConfigError("speed range must satisfy 0 < min_speed <= max_speed");
  }
  nodes_.resize(topo.node_count());
  for (NodeId n = 1; n <= topo.node_count(); ++n) {
    auto& k = nodes_[n - 1];
    k.node_id = n;
    k.position = topo.position(n);
    k.waypoint = k.position;
    k.pause_until = params_.pause;
  }
}

const NodeKinematics& RandomWaypoint::step(Topology& topo, NodeId node, SimTime now, SimTime dt) {
  auto& k = nodes_.at(node - 1);
  if (topo.mode() != Topology::Mode::Geometric) return k;
  if (now < k.pause_until) return k;
  if (!k.moving) {
    std::uniform_real_distribution<double> ux(0.0, params_.arena_w);
    std::uniform_real_distribution<double> uy(0.0, params_.arena_h);
    std::uniform_real_distribution<double> us(params_.min_speed, params_.max_speed);
    k.waypoint = Vec2{ux(rng_), uy(rng_)};
    k.speed = us(rng_);
    k.moving = true;
    // Movement starts at this tick.
    return k;
  }
  const double remaining = distance(k.position, k.waypoint);
  const double travel = k.speed * dt.seconds();
  if (travel >= remaining) {
    k.position = k.waypoint;
    k.moving = false;
    k.pause_until = now + params_.pause;
  } else {
    const double f = travel / remaining;
    k.position.x += (k.waypoint.x - k.position.x) * f;
    k.position.y += (k.waypoint.y - k.position.y) * f;
  }
  k.position.x = std::clamp(k.position.x, 0.0, params_.arena_w);
  k.position.y = std::clamp(k.position.y, 0.0, params_.arena_h);
  topo.set_position(node, k.position);
  return k;
}

}  // namespace sim
}  // namespace debh
