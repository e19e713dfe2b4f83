#include "debh/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

namespace debh::scenario {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void bad(const std::string& field, const std::string& what) {
  throw ConfigError(field + ": " + what);
}

double to_double(const std::string& field, const std::string& v) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) bad(field, "expected a number, got '" + v + "'");
    return d;
  } catch (const std::logic_error&) {
    bad(field, "expected a number, got '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& field, const std::string& v) {
  try {
    std::size_t used = 0;
    if (v.empty() || v[0] == '-') bad(field, "expected a non-negative integer, got '" + v + "'");
    unsigned long long n = std::stoull(v, &used);
    if (used != v.size()) bad(field, "expected a non-negative integer, got '" + v + "'");
    return n;
  } catch (const std::logic_error&) {
    bad(field, "expected a non-negative integer, got '" + v + "'");
  }
}

unsigned to_unsigned(const std::string& field, const std::string& v) {
  std::uint64_t n = to_u64(field, v);
  if (n > 1'000'000'000ULL) bad(field, "value too large");
  return static_cast<unsigned>(n);
}

bool to_bool(const std::string& field, const std::string& v) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  bad(field, "expected true or false, got '" + v + "'");
}

std::vector<NodeId> to_ids(const std::string& field, const std::string& v) {
  std::vector<NodeId> out;
  std::istringstream in(v);
  std::string tok;
  while (in >> tok) {
    if (tok == "-") continue;
    out.push_back(static_cast<NodeId>(to_unsigned(field, tok)));
  }
  return out;
}

std::vector<std::pair<NodeId, NodeId>> to_pairs(const std::string& field, const std::string& v) {
  std::vector<std::pair<NodeId, NodeId>> out;
  for (const auto& item : split(v, ',')) {
    auto dash = item.find('-');
    if (dash == std::string::npos) bad(field, "expected source-destination pairs, got '" + item + "'");
    out.emplace_back(to_unsigned(field, trim(item.substr(0, dash))), to_unsigned(field, trim(item.substr(dash + 1))));
  }
  return out;
}

SimTime to_time(const std::string& field, const std::string& v) {
  double s = to_double(field, v);
  if (s < 0) bad(field, "must not be negative");
  return SimTime::from_seconds(s);
}

void apply(ScenarioConfig& c, const std::string& field, const std::string& v) {
  if (field == "scenario.name") c.name = v;
  else if (field == "scenario.seed") c.seed = to_u64(field, v);
  else if (field == "scenario.duration_s") c.duration_s = to_double(field, v);
  else if (field == "scenario.defense") {
    try {
      c.defense = parse_defense(v);
    } catch (const ConfigError& e) {
      bad(field, e.what());
    }
  } else if (field == "network.node_count") c.node_count = to_unsigned(field, v);
  else if (field == "network.arena_width_m") c.arena_w_m = to_double(field, v);
  else if (field == "network.arena_height_m") c.arena_h_m = to_double(field, v);
  else if (field == "network.range_m") c.range_m = to_double(field, v);
  else if (field == "network.topology") {
    if (v == "geometric") c.static_topology = false;
    else if (v == "static") c.static_topology = true;
    else bad(field, "expected geometric or static, got '" + v + "'");
  } else if (field == "mobility.model") {
    if (v == "random_waypoint") c.mobile = true;
    else if (v == "none") c.mobile = false;
    else bad(field, "expected random_waypoint or none, got '" + v + "'");
  } else if (field == "mobility.min_speed_mps") c.min_speed = to_double(field, v);
  else if (field == "mobility.max_speed_mps") c.max_speed = to_double(field, v);
  else if (field == "mobility.pause_s") c.pause_s = to_double(field, v);
  else if (field == "attack.mode") {
    if (v == "none") {
      c.attack.mode.reset();
    } else {
      try {
        c.attack.mode = adversary::parse_attack_mode(v);
      } catch (const ConfigError& e) {
        bad(field, e.what());
      }
    }
  } else if (field == "attack.count") c.attack.count = to_unsigned(field, v);
  else if (field == "attack.group_count") c.attack.group_count = to_unsigned(field, v);
  else if (field == "attack.groups") {
    c.attack.groups.clear();
    for (const auto& g : split(v, ';')) c.attack.groups.push_back(to_ids(field, g));
  } else if (field == "attack.cluster_radius_m") c.attack.cluster_radius_m = to_double(field, v);
  else if (field == "attack.group_separation_m") c.attack.group_separation_m = to_double(field, v);
  else if (field == "attack.probe_answer") {
    if (v == "forged") c.attack.probe_answer = adversary::ProbeAnswer::Forged;
    else if (v == "silent") c.attack.probe_answer = adversary::ProbeAnswer::Silent;
    else bad(field, "expected forged or silent, got '" + v + "'");
  } else if (field == "attack.seq_inflation") c.attack.seq_inflation = to_u64(field, v);
  else if (field == "attack.one_victim") c.attack.one_victim_at_a_time = to_bool(field, v);
  else if (field == "traffic.connections") c.traffic.connections = to_unsigned(field, v);
  else if (field == "traffic.packets") c.traffic.packets = to_unsigned(field, v);
  else if (field == "traffic.rate_pps") c.traffic.rate_pps = to_double(field, v);
  else if (field == "traffic.payload_bytes") c.traffic.payload_bytes = to_unsigned(field, v);
  else if (field == "traffic.start_s") c.traffic.start_s = to_double(field, v);
  else if (field == "traffic.start_jitter_s") c.traffic.start_jitter_s = to_double(field, v);
  else if (field == "traffic.pairs") c.traffic.pairs = to_pairs(field, v);
  else if (field == "traffic.checks") c.traffic.checks = to_pairs(field, v);
  else if (field == "protocol.hop_latency_s") c.protocol.hop_latency = to_time(field, v);
  else if (field == "protocol.reply_timeout_s") c.protocol.reply_timeout = to_time(field, v);
  else if (field == "protocol.rrep_window_s") c.protocol.rrep_window = to_time(field, v);
  else if (field == "protocol.discovery_timeout_s") c.protocol.discovery_timeout = to_time(field, v);
  else if (field == "protocol.discovery_attempts") c.protocol.discovery_attempts = to_unsigned(field, v);
  else if (field == "protocol.session_watchdog_s") c.protocol.session_watchdog = to_time(field, v);
  else if (field == "protocol.bch_query_timeout_s") c.protocol.bch_query_timeout = to_time(field, v);
  else if (field == "protocol.mobility_tick_s") c.protocol.mobility_tick = to_time(field, v);
  else if (field == "protocol.max_path_number") c.protocol.max_path_number = to_unsigned(field, v);
  else if (field == "protocol.cache_reply") c.protocol.cache_reply = to_bool(field, v);
  else if (field == "replay.suspects_include") {
    auto ids = to_ids(field, v);
    c.expect.suspects_include = std::set<NodeId>(ids.begin(), ids.end());
  } else if (field == "replay.malicious") {
    auto ids = to_ids(field, v);
    c.expect.malicious = std::set<NodeId>(ids.begin(), ids.end());
  } else if (field == "replay.rreq_count") c.expect.rreq_count = to_unsigned(field, v);
  else throw ConfigError("unknown field '" + field + "'");
}

ExpectedRow parse_expect_row(const std::string& line) {
  auto cols = std::vector<std::string>();
  std::string item;
  std::istringstream in(line);
  while (std::getline(in, item, ',')) cols.push_back(trim(item));
  if (cols.size() != 5) bad("expect", "rows need node,nhn,path_number,generators,blackholes: '" + line + "'");
  ExpectedRow r;
  r.node = to_unsigned("expect.node", cols[0]);
  r.nhn = to_unsigned("expect.nhn", cols[1]);
  r.path_number = to_unsigned("expect.path_number", cols[2]);
  r.generators = to_ids("expect.generators", cols[3]);
  r.blackholes = to_ids("expect.blackholes", cols[4]);
  return r;
}

std::string describe(const ExpectedRow& r) {
  return std::to_string(r.node) + ">" + std::to_string(r.nhn) + " path " + std::to_string(r.path_number) +
         " generators [" + pathcheck::AuditLog::format_queue(r.generators) + "] blackholes [" +
         pathcheck::AuditLog::format_queue(r.blackholes) + "]";
}

bool valid_id(const ScenarioConfig& c, NodeId n) { return n >= 1 && n <= c.node_count; }

std::set<NodeId> attacker_ids(const ScenarioConfig& c) {
  std::set<NodeId> out;
  for (const auto& g : c.attack.groups) out.insert(g.begin(), g.end());
  return out;
}

}  // namespace

ScenarioConfig parse_config(std::istream& in, const std::string& origin) {
  ScenarioConfig c;
  std::string section;
  std::string raw;
  unsigned lineno = 0;
  try {
    while (std::getline(in, raw)) {
      ++lineno;
      if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
      std::string line = trim(raw);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') bad("line " + std::to_string(lineno), "unterminated section header");
        section = trim(std::string_view(line).substr(1, line.size() - 2));
        continue;
      }
      if (section == "edges") {
        auto ids = to_ids("edges", line);
        if (ids.size() != 2) bad("edges", "expected 'u v', got '" + line + "'");
        c.edges.emplace_back(ids[0], ids[1]);
        continue;
      }
      if (section == "positions") {
        std::istringstream ps(line);
        std::string id, x, y;
        if (!(ps >> id >> x >> y)) bad("positions", "expected 'id x y', got '" + line + "'");
        c.positions.emplace_back(to_unsigned("positions", id),
                                 sim::Vec2{to_double("positions", x), to_double("positions", y)});
        continue;
      }
      if (section == "expect") {
        c.expect.rows.push_back(parse_expect_row(line));
        continue;
      }
      auto eq = line.find('=');
      if (eq == std::string::npos) bad("line " + std::to_string(lineno), "expected key = value");
      std::string key = trim(std::string_view(line).substr(0, eq));
      std::string value = trim(std::string_view(line).substr(eq + 1));
      apply(c, section.empty() ? key : section + "." + key, value);
    }
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  try {
    validate(c);
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in, path);
}

void validate(const ScenarioConfig& c) {
  if (c.node_count == 0) bad("network.node_count", "must be at least 1");
  if (c.duration_s <= 0) bad("scenario.duration_s", "must be positive");
  if (c.arena_w_m <= 0) bad("network.arena_width_m", "must be positive");
  if (c.arena_h_m <= 0) bad("network.arena_height_m", "must be positive");
  if (c.range_m <= 0) bad("network.range_m", "must be positive");
  if (c.mobile && !c.static_topology) {
    if (c.min_speed <= 0) bad("mobility.min_speed_mps", "must be positive");
    if (c.max_speed < c.min_speed) bad("mobility.max_speed_mps", "must be at least min_speed_mps");
    if (c.pause_s < 0) bad("mobility.pause_s", "must not be negative");
  }
  for (const auto& [u, v] : c.edges) {
    if (!valid_id(c, u) || !valid_id(c, v)) bad("edges", "node id out of range in edge " + std::to_string(u) + " " +
                                                             std::to_string(v));
    if (u == v) bad("edges", "self loop at node " + std::to_string(u));
  }
  if (!c.static_topology && !c.edges.empty()) bad("edges", "only allowed with network.topology = static");
  for (const auto& [id, p] : c.positions) {
    if (!valid_id(c, id)) bad("positions", "node id " + std::to_string(id) + " out of range");
    if (p.x < 0 || p.y < 0 || p.x > c.arena_w_m || p.y > c.arena_h_m) {
      bad("positions", "node " + std::to_string(id) + " lies outside the arena");
    }
  }

  const AttackSpec& a = c.attack;
  if (a.mode) {
    if (a.seq_inflation == 0) bad("attack.seq_inflation", "must be at least 1");
    if (!a.groups.empty()) {
      std::set<NodeId> seen;
      for (const auto& g : a.groups) {
        if (g.empty()) bad("attack.groups", "empty group");
        for (NodeId n : g) {
          if (!valid_id(c, n)) bad("attack.groups", "node id " + std::to_string(n) + " out of range");
          if (!seen.insert(n).second) bad("attack.groups", "node " + std::to_string(n) + " listed twice");
        }
      }
      switch (*a.mode) {
        case adversary::AttackMode::Single:
          if (a.groups.size() != 1 || a.groups[0].size() != 1) bad("attack.groups", "single mode takes one node");
          break;
        case adversary::AttackMode::Cooperative:
          if (a.groups.size() != 1 || a.groups[0].size() < 2) {
            bad("attack.groups", "cooperative mode takes one group of at least two nodes");
          }
          break;
        case adversary::AttackMode::Distributed:
          if (a.groups.size() < 2) bad("attack.groups", "distributed mode takes at least two groups");
          break;
      }
      if (*a.mode == adversary::AttackMode::Cooperative) {
        const auto& g = a.groups[0];
        std::set<std::pair<NodeId, NodeId>> links;
        for (auto [u, v] : c.edges) links.insert({std::min(u, v), std::max(u, v)});
        std::map<NodeId, sim::Vec2> pos(c.positions.begin(), c.positions.end());
        for (std::size_t i = 0; i < g.size(); ++i) {
          for (std::size_t j = i + 1; j < g.size(); ++j) {
            bool in_range = true;
            if (c.static_topology) {
              in_range = links.count({std::min(g[i], g[j]), std::max(g[i], g[j])}) > 0;
            } else if (pos.count(g[i]) && pos.count(g[j])) {
              in_range = sim::distance(pos[g[i]], pos[g[j]]) <= c.range_m;
            }
            if (!in_range) {
              bad("attack.groups", "cooperative attackers " + std::to_string(g[i]) + " and " + std::to_string(g[j]) +
                                       " are not within range of each other");
            }
          }
        }
      }
    } else {
      if (c.static_topology) bad("attack.groups", "required with a static topology");
      switch (*a.mode) {
        case adversary::AttackMode::Single:
          if (a.count != 1) bad("attack.count", "single mode plants exactly one attacker");
          break;
        case adversary::AttackMode::Cooperative:
          if (a.count < 2) bad("attack.count", "cooperative mode needs at least two attackers");
          if (2 * a.cluster_radius_m > c.range_m) {
            bad("attack.cluster_radius_m", "cooperative attackers must stay within range of each other");
          }
          break;
        case adversary::AttackMode::Distributed:
          if (a.group_count < 2) bad("attack.group_count", "distributed mode needs at least two groups");
          if (a.count < a.group_count) bad("attack.count", "must be at least attack.group_count");
          break;
      }
      if (a.count + 2 > c.node_count) bad("attack.count", "leaves fewer than two honest nodes");
      if (a.cluster_radius_m < 0) bad("attack.cluster_radius_m", "must not be negative");
    }
  } else if (!a.groups.empty() || a.count > 0) {
    bad("attack.mode", "attackers listed but mode is none");
  }

  const TrafficSpec& t = c.traffic;
  if (t.packets == 0) bad("traffic.packets", "must be at least 1");
  if (t.rate_pps <= 0) bad("traffic.rate_pps", "must be positive");
  if (t.start_s < 0) bad("traffic.start_s", "must not be negative");
  if (t.start_jitter_s < 0) bad("traffic.start_jitter_s", "must not be negative");
  if (t.start_s + t.start_jitter_s >= c.duration_s) bad("traffic.start_s", "must lie before the end of the run");
  auto attackers = attacker_ids(c);
  for (const auto* list : {&t.pairs, &t.checks}) {
    for (auto [s, d] : *list) {
      if (!valid_id(c, s) || !valid_id(c, d)) bad("traffic.pairs", "node id out of range");
      if (s == d) bad("traffic.pairs", "source equals destination " + std::to_string(s));
      if (attackers.count(s) || attackers.count(d)) bad("traffic.pairs", "endpoints must be honest nodes");
    }
  }
  if (c.protocol.hop_latency <= SimTime{}) bad("protocol.hop_latency_s", "must be positive");
  if (c.protocol.rrep_window <= SimTime{}) bad("protocol.rrep_window_s", "must be positive");
  if (c.protocol.discovery_attempts == 0) bad("protocol.discovery_attempts", "must be at least 1");
  if (c.protocol.max_path_number == 0) bad("protocol.max_path_number", "must be at least 1");
  if (c.protocol.mobility_tick <= SimTime{}) bad("protocol.mobility_tick_s", "must be positive");
}

// ---------------------------------------------------------------------------
// Placement

namespace {

sim::Vec2 uniform_point(Rng& rng, double w, double h) {
  std::uniform_real_distribution<double> ux(0.0, w), uy(0.0, h);
  double x = ux(rng);
  return {x, uy(rng)};
}

sim::Vec2 point_in_disc(Rng& rng, sim::Vec2 c, double r, double w, double h) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (;;) {
    double rad = r * std::sqrt(u(rng));
    double ang = 2.0 * 3.14159265358979323846 * u(rng);
    sim::Vec2 p{c.x + rad * std::cos(ang), c.y + rad * std::sin(ang)};
    if (p.x >= 0 && p.y >= 0 && p.x <= w && p.y <= h) return p;
  }
}

/// Largest connected component among `members` using links of `topo`; ties
/// go to the component holding the smallest id.
std::set<NodeId> largest_component(const sim::Topology& topo, const std::set<NodeId>& members) {
  std::set<NodeId> best, seen;
  for (NodeId start : members) {
    if (seen.count(start)) continue;
    std::set<NodeId> comp{start};
    std::vector<NodeId> stack{start};
    seen.insert(start);
    while (!stack.empty()) {
      NodeId n = stack.back();
      stack.pop_back();
      for (NodeId m : topo.neighbors(n)) {
        if (members.count(m) && seen.insert(m).second) {
          comp.insert(m);
          stack.push_back(m);
        }
      }
    }
    if (comp.size() > best.size()) best = std::move(comp);
  }
  return best;
}

/// Every forger is reached by the source's flood for the destination without
/// passing the destination (which does not rebroadcast) or another group.
bool forgers_hear_source(const sim::Topology& topo, const std::vector<std::vector<NodeId>>& groups,
                         std::pair<NodeId, NodeId> pair) {
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    std::set<NodeId> members;
    for (NodeId i = 1; i <= topo.node_count(); ++i) members.insert(i);
    members.erase(pair.second);
    for (std::size_t gj = 0; gj < groups.size(); ++gj) {
      if (gj == gi) continue;
      for (NodeId m : groups[gj]) members.erase(m);
    }
    std::set<NodeId> reached{pair.first};
    std::vector<NodeId> stack{pair.first};
    while (!stack.empty()) {
      NodeId n = stack.back();
      stack.pop_back();
      for (NodeId m : topo.neighbors(n)) {
        if (members.count(m) && reached.insert(m).second) stack.push_back(m);
      }
    }
    if (!reached.count(groups[gi].back())) return false;
  }
  return true;
}

std::vector<std::vector<NodeId>> split_groups(unsigned first_id, unsigned count, unsigned groups) {
  std::vector<std::vector<NodeId>> out(groups);
  NodeId id = first_id;
  for (unsigned g = 0; g < groups; ++g) {
    unsigned size = count / groups + (g < count % groups ? 1 : 0);
    for (unsigned i = 0; i < size; ++i) out[g].push_back(id++);
  }
  return out;
}

std::vector<std::pair<NodeId, NodeId>> draw_pairs(Rng& rng, const sim::Topology& topo, const std::set<NodeId>& pool,
                                                  unsigned count) {
  std::vector<NodeId> ids(pool.begin(), pool.end());
  std::vector<std::pair<NodeId, NodeId>> out;
  if (ids.size() < 2) return out;
  std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
  for (unsigned tries = 0; out.size() < count && tries < 1000 * (count + 1); ++tries) {
    NodeId s = ids[pick(rng)];
    NodeId d = ids[pick(rng)];
    if (s == d || topo.linked(s, d)) continue;
    out.emplace_back(s, d);
  }
  return out;
}

std::vector<SimTime> draw_starts(Rng& rng, const TrafficSpec& t, std::size_t n) {
  std::vector<SimTime> out;
  std::uniform_real_distribution<double> u(0.0, t.start_jitter_s);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(SimTime::from_seconds(t.start_s + (t.start_jitter_s > 0 ? u(rng) : 0.0)));
  }
  return out;
}

}  // namespace

Placement place(const ScenarioConfig& cfg, Rng& rng) {
  Placement p;
  const unsigned n = cfg.node_count;
  const AttackSpec& a = cfg.attack;

  if (cfg.static_topology) {
    p.groups = a.mode ? a.groups : std::vector<std::vector<NodeId>>{};
    p.positions.assign(n, sim::Vec2{});
    for (const auto& [id, pos] : cfg.positions) p.positions[id - 1] = pos;
    auto topo = sim::Topology::static_adjacency(n, cfg.edges);
    p.pairs = cfg.traffic.pairs;
    if (p.pairs.empty() && cfg.traffic.checks.empty()) {
      std::set<NodeId> honest;
      auto bad_ids = attacker_ids(cfg);
      for (NodeId i = 1; i <= n; ++i) {
        if (!bad_ids.count(i)) honest.insert(i);
      }
      p.pairs = draw_pairs(rng, topo, largest_component(topo, honest), cfg.traffic.connections);
    }
    p.starts = draw_starts(rng, cfg.traffic, p.pairs.size());
    p.attempts = 1;
    return p;
  }

  const bool fixed_layout = cfg.positions.size() == n;
  for (unsigned attempt = 1; attempt <= 20000; ++attempt) {
    p = Placement{};
    p.attempts = attempt;
    p.positions.resize(n);
    for (auto& pos : p.positions) pos = uniform_point(rng, cfg.arena_w_m, cfg.arena_h_m);
    for (const auto& [id, pos] : cfg.positions) p.positions[id - 1] = pos;

    if (a.mode) {
      if (!a.groups.empty()) {
        p.groups = a.groups;
      } else {
        unsigned groups = *a.mode == adversary::AttackMode::Distributed ? a.group_count : 1;
        p.groups = split_groups(n - a.count + 1, a.count, groups);
        std::vector<sim::Vec2> centres;
        const double margin = a.cluster_radius_m;
        for (const auto& g : p.groups) {
          sim::Vec2 c{};
          for (unsigned tries = 0; tries < 1000; ++tries) {
            c = sim::Vec2{margin, margin};
            auto q = uniform_point(rng, cfg.arena_w_m - 2 * margin, cfg.arena_h_m - 2 * margin);
            c.x += q.x;
            c.y += q.y;
            bool far = std::all_of(centres.begin(), centres.end(), [&](sim::Vec2 o) {
              return sim::distance(o, c) >= a.group_separation_m;
            });
            if (far) break;
          }
          centres.push_back(c);
          for (NodeId id : g) p.positions[id - 1] = point_in_disc(rng, c, a.cluster_radius_m, cfg.arena_w_m,
                                                                  cfg.arena_h_m);
        }
      }
    }

    auto topo = sim::Topology::geometric(p.positions, cfg.range_m);
    std::set<NodeId> attackers;
    for (const auto& g : p.groups) attackers.insert(g.begin(), g.end());
    std::set<NodeId> honest;
    for (NodeId i = 1; i <= n; ++i) {
      if (!attackers.count(i)) honest.insert(i);
    }
    const auto core = largest_component(topo, honest);

    if (fixed_layout) {
      p.pairs = cfg.traffic.pairs;
      if (p.pairs.empty() && cfg.traffic.checks.empty()) {
        p.pairs = draw_pairs(rng, topo, core, cfg.traffic.connections);
      }
      p.starts = draw_starts(rng, cfg.traffic, p.pairs.size());
      return p;
    }

    bool ok = std::all_of(attackers.begin(), attackers.end(), [&](NodeId m) {
      auto nb = topo.neighbors(m);
      return std::any_of(nb.begin(), nb.end(), [&](NodeId x) { return core.count(x) > 0; });
    });
    if (!ok) continue;

    if (!cfg.traffic.pairs.empty() || !cfg.traffic.checks.empty()) {
      p.pairs = cfg.traffic.pairs;
      bool inside = true;
      for (const auto* list : {&cfg.traffic.pairs, &cfg.traffic.checks}) {
        for (auto [s, d] : *list) inside = inside && core.count(s) && core.count(d);
      }
      if (!inside) continue;
    } else {
      p.pairs = draw_pairs(rng, topo, core, cfg.traffic.connections);
      if (p.pairs.size() < cfg.traffic.connections) continue;
    }
    if (!p.pairs.empty() && !forgers_hear_source(topo, p.groups, p.pairs.front())) continue;
    p.starts = draw_starts(rng, cfg.traffic, p.pairs.size());
    return p;
  }
  throw ConfigError("placement: no layout satisfied the connectivity constraints");
}

Built build(const ScenarioConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);
  Built b;
  b.placement = place(cfg, rng);
  const Placement& p = b.placement;

  auto topo = cfg.static_topology ? sim::Topology::static_adjacency(cfg.node_count, cfg.edges)
                                  : sim::Topology::geometric(p.positions, cfg.range_m);
  std::optional<sim::MobilityParams> mob;
  if (cfg.mobile && !cfg.static_topology) {
    mob = sim::MobilityParams{cfg.arena_w_m, cfg.arena_h_m, cfg.min_speed, cfg.max_speed,
                              SimTime::from_seconds(cfg.pause_s)};
  }
  ProtocolConfig proto = cfg.protocol;
  proto.defense = cfg.defense;
  proto.victim_release_packets = cfg.traffic.packets;
  b.network = std::make_unique<Network>(proto, std::move(topo), mob, rng());

  std::vector<NodeId> all_bad;
  for (const auto& g : p.groups) all_bad.insert(all_bad.end(), g.begin(), g.end());
  for (std::size_t gi = 0; gi < p.groups.size(); ++gi) {
    const auto& g = p.groups[gi];
    for (std::size_t i = 0; i < g.size(); ++i) {
      adversary::AdversaryProfile prof;
      prof.id = g[i];
      prof.mode = *cfg.attack.mode;
      prof.role = i + 1 == g.size() ? adversary::Role::Forger : adversary::Role::Cover;
      prof.group = g;
      prof.group_index = i;
      prof.seq_inflation = cfg.attack.seq_inflation;
      prof.one_victim_at_a_time = cfg.attack.one_victim_at_a_time;
      prof.probe_answer = cfg.attack.probe_answer;
      const auto& pool = prof.mode == adversary::AttackMode::Distributed ? all_bad : g;
      for (NodeId m : pool) {
        if (m != g[i] && prof.mode != adversary::AttackMode::Single) prof.peer_ids.push_back(m);
      }
      b.network->add_adversary(prof, gi);
    }
  }
  for (std::size_t i = 0; i < p.pairs.size(); ++i) {
    ConnectionSpec c;
    c.source = p.pairs[i].first;
    c.destination = p.pairs[i].second;
    c.packets = cfg.traffic.packets;
    c.rate_pps = cfg.traffic.rate_pps;
    c.payload_bytes = cfg.traffic.payload_bytes;
    c.start = p.starts[i];
    b.network->add_connection(c);
  }
  for (auto [s, d] : cfg.traffic.checks) {
    b.checks.push_back(b.network->schedule_check(s, d, SimTime::from_seconds(cfg.traffic.start_s)));
  }
  return b;
}

RunResult run_scenario(const ScenarioConfig& cfg, std::ostream* trace) {
  Built b = build(cfg);
  Network& net = *b.network;
  net.scheduler().set_trace(trace);
  net.run_until(SimTime::from_seconds(cfg.duration_s));
  RunResult r;
  r.scenario = cfg.name;
  r.seed = cfg.seed;
  r.planted = net.planted();
  r.metrics = net.metrics();
  r.audit = net.audit();
  r.sessions = net.sessions();
  r.last_alarm = net.last_alarm_time();
  r.any_alarm = !net.announced().empty();
  return r;
}

// ---------------------------------------------------------------------------
// Suite

std::vector<ScenarioConfig> standard_suite(const ScenarioConfig& base) {
  struct Entry {
    adversary::AttackMode mode;
    unsigned count;
    unsigned groups;
  };
  const std::vector<Entry> entries{
      {adversary::AttackMode::Single, 1, 1},      {adversary::AttackMode::Cooperative, 2, 1},
      {adversary::AttackMode::Cooperative, 3, 1}, {adversary::AttackMode::Cooperative, 5, 1},
      {adversary::AttackMode::Cooperative, 7, 1}, {adversary::AttackMode::Cooperative, 9, 1},
      {adversary::AttackMode::Distributed, 4, 2},
  };
  std::vector<ScenarioConfig> out;
  for (const auto& e : entries) {
    ScenarioConfig c = base;
    c.name = std::string(adversary::to_string(e.mode)) + "-" + std::to_string(e.count);
    c.static_topology = false;
    c.edges.clear();
    c.positions.clear();
    c.attack.mode = e.mode;
    c.attack.groups.clear();
    c.attack.count = e.count;
    c.attack.group_count = e.groups;
    c.traffic.pairs.clear();
    c.traffic.checks.clear();
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<SuiteRow> run_suite(const std::vector<ScenarioConfig>& suite, const std::vector<std::uint64_t>& seeds,
                                unsigned jobs) {
  std::vector<ScenarioConfig> work;
  for (const auto& sc : suite) {
    for (auto seed : seeds) {
      ScenarioConfig c = sc;
      c.seed = seed;
      work.push_back(std::move(c));
    }
  }
  std::vector<SuiteRow> rows(work.size());
  auto run_one = [&](std::size_t i) {
    rows[i].scenario = work[i].name;
    rows[i].seed = work[i].seed;
    rows[i].result = run_scenario(work[i]);
    rows[i].planted = static_cast<unsigned>(rows[i].result.planted.size());
  };
  jobs = std::max(1u, jobs);
  for (std::size_t begin = 0; begin < work.size(); begin += jobs) {
    std::vector<std::future<void>> batch;
    for (std::size_t i = begin; i < std::min(work.size(), begin + jobs); ++i) {
      batch.push_back(std::async(jobs == 1 ? std::launch::deferred : std::launch::async, run_one, i));
    }
    for (auto& f : batch) f.get();
  }
  return rows;
}

void write_suite_csv(std::ostream& out, const std::vector<SuiteRow>& rows) {
  out << metrics::kCsvHeader << '\n';
  for (const auto& row : rows) {
    for (const auto& r : metrics::csv_rows(row.scenario, row.seed, row.planted, row.result.metrics)) {
      metrics::write_csv_row(out, r);
    }
  }
}

void write_suite_summary(std::ostream& out, const std::vector<SuiteRow>& rows) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const SuiteRow*>> by;
  for (const auto& r : rows) {
    if (!by.count(r.scenario)) order.push_back(r.scenario);
    by[r.scenario].push_back(&r);
  }
  out << std::left << std::setw(18) << "scenario" << std::setw(10) << "planted" << std::setw(16) << "detected(mean)"
      << std::setw(12) << "exact" << std::setw(12) << "rreq(mean)" << "delivered/sent\n";
  for (const auto& name : order) {
    const auto& list = by[name];
    std::vector<metrics::RunMetrics> runs;
    unsigned exact = 0, sent = 0, delivered = 0;
    for (const auto* r : list) {
      runs.push_back(r->result.metrics);
      if (r->result.metrics.detected_malicious == r->result.planted) ++exact;
      sent += r->result.metrics.packets_sent();
      delivered += r->result.metrics.packets_delivered();
    }
    auto s = metrics::aggregate(runs);
    std::ostringstream det, rreq;
    det << std::fixed << std::setprecision(2) << s.detected.mean;
    rreq << std::fixed << std::setprecision(2) << s.rreq_count.mean;
    out << std::left << std::setw(18) << name << std::setw(10) << list.front()->planted << std::setw(16) << det.str()
        << std::setw(12) << (std::to_string(exact) + "/" + std::to_string(list.size())) << std::setw(12)
        << rreq.str() << delivered << "/" << sent << '\n';
  }
}

// ---------------------------------------------------------------------------
// Throughput

ScenarioConfig throughput_config(const ScenarioConfig& base, unsigned attackers, unsigned connections) {
  constexpr unsigned kSlots = 9;
  if (attackers > kSlots) throw ConfigError("attack.count: at most 9 nested attacker slots");
  if (base.node_count < kSlots + 3) throw ConfigError("network.node_count: throughput layout needs at least 12 nodes");
  ScenarioConfig c = base;
  c.name = "throughput-" + std::to_string(attackers) + "x" + std::to_string(connections);
  c.static_topology = false;
  c.mobile = false;
  c.edges.clear();
  c.traffic.checks.clear();
  c.traffic.start_jitter_s = 0.0;

  const unsigned n = c.node_count;
  const NodeId first_slot = n - kSlots + 1;
  const sim::Vec2 centre{c.arena_w_m / 2, c.arena_h_m / 2};
  Rng rng(base.seed);
  for (unsigned attempt = 0; attempt < 20000; ++attempt) {
    std::vector<sim::Vec2> pos(n);
    for (NodeId i = 1; i < first_slot; ++i) pos[i - 1] = uniform_point(rng, c.arena_w_m, c.arena_h_m);
    pos[first_slot - 1] = centre;
    for (NodeId i = first_slot + 1; i <= n; ++i) {
      pos[i - 1] = point_in_disc(rng, centre, c.attack.cluster_radius_m, c.arena_w_m, c.arena_h_m);
    }
    auto topo = sim::Topology::geometric(pos, c.range_m);
    std::set<NodeId> never_bad;
    for (NodeId i = 1; i < first_slot; ++i) never_bad.insert(i);
    auto core = largest_component(topo, never_bad);
    bool ok = core.size() >= n / 2;
    for (NodeId s = first_slot; ok && s <= n; ++s) {
      auto nb = topo.neighbors(s);
      ok = std::any_of(nb.begin(), nb.end(), [&](NodeId x) { return core.count(x) > 0; });
    }
    if (!ok) continue;
    auto pairs = draw_pairs(rng, topo, core, 30);
    if (pairs.size() < std::max(30u, connections)) continue;
    pairs.resize(connections);

    c.positions.clear();
    for (NodeId i = 1; i <= n; ++i) c.positions.emplace_back(i, pos[i - 1]);
    c.traffic.pairs = pairs;
    c.traffic.connections = connections;
    c.attack.groups.clear();
    c.attack.count = 0;
    if (attackers == 0) {
      c.attack.mode.reset();
    } else {
      // Slot 0 sits at the centre and always forges.
      std::vector<NodeId> group;
      for (unsigned k = attackers; k-- > 0;) group.push_back(first_slot + k);
      c.attack.mode = attackers == 1 ? adversary::AttackMode::Single : adversary::AttackMode::Cooperative;
      c.attack.groups = {group};
    }
    validate(c);
    return c;
  }
  throw ConfigError("placement: no throughput layout satisfied the connectivity constraints");
}

std::vector<SweepPoint> throughput_sweep(const ScenarioConfig& base, unsigned attackers) {
  std::vector<SweepPoint> out;
  for (unsigned n = 5; n <= 30; n += 5) {
    for (Defense d : {Defense::None, Defense::Debh}) {
      ScenarioConfig c = throughput_config(base, attackers, n);
      c.defense = d;
      auto r = run_scenario(c);
      SweepPoint p;
      p.connections = n;
      p.defense = d;
      p.sent = r.metrics.packets_sent();
      p.delivered = r.metrics.packets_delivered();
      p.sent_after_alarm = r.metrics.sent_after_detection;
      p.delivered_after_alarm = r.metrics.delivered_after_detection;
      out.push_back(p);
    }
  }
  return out;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& points) {
  out << "connections,defense,sent,delivered,sent_after_alarm,delivered_after_alarm\n";
  for (const auto& p : points) {
    out << p.connections << ',' << to_string(p.defense) << ',' << p.sent << ',' << p.delivered << ','
        << p.sent_after_alarm << ',' << p.delivered_after_alarm << '\n';
  }
}

// ---------------------------------------------------------------------------
// Replay

ReplayResult replay(const ScenarioConfig& fixture) {
  if (fixture.traffic.checks.size() != 1) throw ConfigError("traffic.checks: a fixture runs exactly one path check");
  Built b = build(fixture);
  Network& net = *b.network;
  net.run_until(SimTime::from_seconds(fixture.duration_s));

  ReplayResult out;
  out.audit = net.audit();
  for (const auto& row : out.audit.rows()) {
    if (row.event != "probe" && row.event != "trusted_probe") continue;
    auto gt = row.subject.find('>');
    ExpectedRow r;
    r.node = static_cast<NodeId>(std::stoul(row.subject.substr(0, gt)));
    r.nhn = static_cast<NodeId>(std::stoul(row.subject.substr(gt + 1)));
    r.path_number = row.path_number;
    r.generators = row.rrep_generator_queue;
    r.blackholes = row.blackhole_queue;
    out.actual.push_back(std::move(r));
  }
  const NodeId source = fixture.traffic.checks.front().first;
  if (auto s = net.session(b.checks.front())) {
    out.final_suspects = s->blackhole_queue;
    out.malicious = s->malicious;
    if (!s->finished) out.mismatches.push_back("path check did not finish");
  }
  auto rc = net.metrics().rreq_count_by_source.find(source);
  out.rreq_count = rc == net.metrics().rreq_count_by_source.end() ? 0 : rc->second;

  const auto& exp = fixture.expect;
  const std::size_t common = std::min(exp.rows.size(), out.actual.size());
  for (std::size_t i = 0; i < common; ++i) {
    if (!(exp.rows[i] == out.actual[i])) {
      out.mismatches.push_back("row " + std::to_string(i + 1) + ": expected " + describe(exp.rows[i]) + ", got " +
                               describe(out.actual[i]));
    }
  }
  for (std::size_t i = common; i < exp.rows.size(); ++i) {
    out.mismatches.push_back("row " + std::to_string(i + 1) + ": expected " + describe(exp.rows[i]) + ", got nothing");
  }
  for (std::size_t i = common; i < out.actual.size(); ++i) {
    out.mismatches.push_back("row " + std::to_string(i + 1) + ": unexpected " + describe(out.actual[i]));
  }
  if (exp.suspects_include) {
    for (NodeId n : *exp.suspects_include) {
      if (std::find(out.final_suspects.begin(), out.final_suspects.end(), n) == out.final_suspects.end()) {
        out.mismatches.push_back("suspect " + std::to_string(n) + " missing from final black hole queue");
      }
    }
  }
  if (exp.malicious && *exp.malicious != out.malicious) {
    out.mismatches.push_back("malicious set differs: expected " +
                             pathcheck::AuditLog::format_queue({exp.malicious->begin(), exp.malicious->end()}) +
                             ", got " + pathcheck::AuditLog::format_queue({out.malicious.begin(), out.malicious.end()}));
  }
  if (exp.rreq_count && *exp.rreq_count != out.rreq_count) {
    out.mismatches.push_back("route requests: expected " + std::to_string(*exp.rreq_count) + ", got " +
                             std::to_string(out.rreq_count));
  }
  return out;
}

ReplayResult replay_fixture(const std::string& name, const std::string& dir) {
  return replay(load_config(dir + "/" + name + ".cfg"));
}

}  // namespace debh::scenario
