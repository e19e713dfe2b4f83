#pragma once

// Discrete-event kernel: virtual clock, cancellable event queue, node
// placement, random-waypoint mobility and radio reachability.

#include <compare>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace debh {

using NodeId = std::uint32_t;

/// Node ids are 1-based; 0 never names a node.
inline constexpr NodeId kNoNode = 0;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Simulated time, stored as integer microseconds so that event ordering and
/// trace output are exact.
class SimTime {
 public:
  constexpr SimTime() = default;

  static constexpr SimTime from_micros(std::int64_t us) { return SimTime(us); }
  static SimTime from_seconds(double s);

  constexpr std::int64_t micros() const { return us_; }
  constexpr double seconds() const { return static_cast<double>(us_) / 1e6; }

  constexpr SimTime operator+(SimTime o) const { return SimTime(us_ + o.us_); }
  constexpr SimTime operator-(SimTime o) const { return SimTime(us_ - o.us_); }
  constexpr SimTime operator*(std::int64_t k) const { return SimTime(us_ * k); }
  constexpr SimTime& operator+=(SimTime o) {
    us_ += o.us_;
    return *this;
  }
  constexpr auto operator<=>(const SimTime&) const = default;

 private:
  constexpr explicit SimTime(std::int64_t us) : us_(us) {}
  std::int64_t us_ = 0;
};

/// "12.340000" style rendering used by every log format.
std::string format_time(SimTime t);

using Rng = std::mt19937_64;

namespace sim {

enum class EventKind { Deliver, Timer, Mobility, Traffic };

const char* to_string(EventKind kind);

struct EventHandle {
  std::uint64_t id = 0;
  bool valid() const { return id != 0; }
};

/// Event queue with a stable tie-break: events at equal time fire in
/// insertion order.
class Scheduler {
 public:
  using Action = std::function<void()>;

  SimTime now() const { return now_; }

  /// Throws ConfigError when `at` lies before the current clock.
  EventHandle schedule(SimTime at, NodeId node, EventKind kind, std::string detail, Action action);
  EventHandle schedule_in(SimTime delay, NodeId node, EventKind kind, std::string detail, Action action) {
    return schedule(now_ + delay, node, kind, std::move(detail), std::move(action));
  }

  /// Returns false when the event already fired or was cancelled.
  bool cancel(EventHandle handle);

  std::size_t run_until(SimTime t_end);

  std::size_t pending() const { return live_.size(); }

  /// One `time,node,event_kind,detail` line per processed event.
  void set_trace(std::ostream* out) { trace_ = out; }
  void keep_log(bool on) { keep_log_ = on; }
  const std::vector<std::string>& log() const { return log_; }

 private:
  struct Entry {
    SimTime at;
    std::uint64_t seq;
    NodeId node;
    EventKind kind;
    std::string detail;
    Action action;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      if (a.at != b.at) return a.at > b.at;
      return a.seq > b.seq;
    }
  };

  SimTime now_{};
  std::uint64_t next_seq_ = 1;
  std::priority_queue<Entry, std::vector<Entry>, Later> queue_;
  std::unordered_set<std::uint64_t> live_;
  std::ostream* trace_ = nullptr;
  bool keep_log_ = false;
  std::vector<std::string> log_;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

double distance(Vec2 a, Vec2 b);

/// Who can hear whom. Geometric mode derives links from positions and the
/// radio range; static mode pins an explicit undirected edge set.
class Topology {
 public:
  enum class Mode { Geometric, StaticAdjacency };

  static Topology geometric(std::vector<Vec2> positions, double range_m);
  static Topology static_adjacency(std::size_t node_count, const std::vector<std::pair<NodeId, NodeId>>& edges);

  Mode mode() const { return mode_; }
  std::size_t node_count() const { return count_; }
  double range_m() const { return range_m_; }
  bool contains(NodeId n) const { return n >= 1 && n <= count_; }

  /// Sorted ascending. Throws ConfigError for unknown nodes.
  std::vector<NodeId> neighbors(NodeId node) const;
  bool linked(NodeId a, NodeId b) const;

  Vec2 position(NodeId n) const;
  void set_position(NodeId n, Vec2 p);

  /// Minimum hop counts from `from` over current links (0 = unreachable,
  /// except for `from` itself).
  std::vector<std::size_t> hop_distances(NodeId from) const;

 private:
  Topology() = default;
  void check(NodeId n) const;

  Mode mode_ = Mode::Geometric;
  std::size_t count_ = 0;
  double range_m_ = 0.0;
  std::vector<Vec2> positions_;
  std::vector<std::set<NodeId>> adjacency_;
};

struct MobilityParams {
  double arena_w = 1000.0;
  double arena_h = 1000.0;
  double min_speed = 2.0;
  double max_speed = 20.0;
  SimTime pause = SimTime::from_micros(15'000'000);
};

struct NodeKinematics {
  NodeId node_id = kNoNode;
  Vec2 position;
  Vec2 waypoint;
  double speed = 0.0;
  SimTime pause_until;
  bool moving = false;
};

/// Random waypoint: every node starts paused at its initial position, then
/// repeatedly draws a uniform waypoint and speed, travels, and pauses.
class RandomWaypoint {
 public:
  RandomWaypoint(MobilityParams params, const Topology& topo, Rng& rng);

  /// Advances `node` by `dt` ending at `now`. No-op on static topologies.
  const NodeKinematics& step(Topology& topo, NodeId node, SimTime now, SimTime dt);

  const NodeKinematics& state(NodeId node) const { return nodes_.at(node - 1); }
  NodeKinematics& mutable_state(NodeId node) { return nodes_.at(node - 1); }
  const MobilityParams& params() const { return params_; }

 private:
  MobilityParams params_;
  Rng& rng_;
  std::vector<NodeKinematics> nodes_;
};

/// Ideal radio channel: no loss between linked nodes, one fixed per-hop
/// latency. Reachability is evaluated at send time.
template <typename Message>
class Channel {
 public:
  using Receiver = std::function<void(NodeId to, NodeId from, const Message&)>;

  Channel(Scheduler& sched, const Topology& topo, SimTime latency)
      : sched_(sched), topo_(topo), latency_(latency) {}

  void set_receiver(Receiver r) { receiver_ = std::move(r); }
  SimTime latency() const { return latency_; }

  /// One copy to every current neighbor; returns the number of copies.
  std::size_t broadcast(NodeId sender, const Message& msg, const std::string& detail) {
    auto targets = topo_.neighbors(sender);
    ++sends_;
    for (NodeId to : targets) deliver(sender, to, msg, detail);
    return targets.size();
  }

  /// False (and nothing scheduled) when `next_hop` is out of reach.
  bool unicast(NodeId sender, NodeId next_hop, const Message& msg, const std::string& detail) {
    if (!topo_.contains(sender)) throw ConfigError("unicast from unknown node");
    if (!topo_.contains(next_hop) || !topo_.linked(sender, next_hop)) return false;
    ++sends_;
    deliver(sender, next_hop, msg, detail);
    return true;
  }

  std::uint64_t sends() const { return sends_; }
  std::uint64_t deliveries() const { return deliveries_; }

 private:
  void deliver(NodeId from, NodeId to, const Message& msg, const std::string& detail) {
    sched_.schedule_in(latency_, to, EventKind::Deliver, detail + " from " + std::to_string(from),
                       [this, from, to, msg] {
                         ++deliveries_;
                         if (receiver_) receiver_(to, from, msg);
                       });
  }

  Scheduler& sched_;
  const Topology& topo_;
  SimTime latency_;
  Receiver receiver_;
  std::uint64_t sends_ = 0;
  std::uint64_t deliveries_ = 0;
};

}  // namespace sim
}  // namespace debh
