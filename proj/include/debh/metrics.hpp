#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "debh/sim_engine.hpp"

namespace debh::metrics {

class MetricsError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Per-run counters for overhead, delay, detection and throughput.
struct RunMetrics {
  // Route discoveries originated, by source (rebroadcasts not counted).
  std::map<NodeId, unsigned> rreq_count_by_source;
  // First secure path found per (source, destination), in seconds.
  std::map<std::pair<NodeId, NodeId>, SimTime> secure_path_delay;
  std::set<NodeId> detected_malicious;
  std::map<NodeId, unsigned> sent_by_source;
  std::map<NodeId, unsigned> delivered_by_source;
  // Data packets put on a verified route after the last elimination alarm.
  unsigned sent_after_detection = 0;
  unsigned delivered_after_detection = 0;
  unsigned data_control_packets = 0;
  unsigned routing_anomalies = 0;

  unsigned packets_sent() const;
  unsigned packets_delivered() const;

  void record_rreq(NodeId source) { ++rreq_count_by_source[source]; }
  void record_sent(NodeId source) { ++sent_by_source[source]; }
  void record_delivery(NodeId source);
  void record_detection(const std::set<NodeId>& ids) { detected_malicious.insert(ids.begin(), ids.end()); }

  /// Throws MetricsError when the same discovery is marked twice.
  void mark_secure_path(std::uint64_t discovery, NodeId source, NodeId dest, SimTime t0, SimTime t1);

 private:
  std::set<std::uint64_t> marked_;
};

struct Stat {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct Summary {
  std::size_t runs = 0;
  Stat rreq_count;
  Stat delay_s;
  Stat detected;
  Stat sent;
  Stat delivered;
};

/// Deterministic aggregate over runs, in run order. Throws MetricsError on an
/// empty input. Runs without a secure path do not contribute to delay.
Summary aggregate(const std::vector<RunMetrics>& runs);

/// One CSV row per (scenario, seed, source).
struct CsvRow {
  std::string scenario;
  std::uint64_t seed = 0;
  NodeId source = kNoNode;
  unsigned rreq_count = 0;
  std::optional<double> delay_s;
  unsigned detected = 0;
  unsigned planted = 0;
  unsigned sent = 0;
  unsigned delivered = 0;
};

inline constexpr const char* kCsvHeader = "scenario,seed,source,rreq_count,delay_s,detected,planted,sent,delivered";

std::vector<CsvRow> csv_rows(const std::string& scenario, std::uint64_t seed, unsigned planted, const RunMetrics& m);
void write_csv_row(std::ostream& out, const CsvRow& row);

}  // namespace debh::metrics
