#include "debh/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

namespace debh::metrics {

unsigned RunMetrics::packets_sent() const {
  unsigned n = 0;
  for (const auto& [src, c] : sent_by_source) n += c;
  return n;
}

unsigned RunMetrics::packets_delivered() const {
  unsigned n = 0;
  for (const auto& [src, c] : delivered_by_source) n += c;
  return n;
}

void RunMetrics::record_delivery(NodeId source) {
  if (delivered_by_source[source] >= sent_by_source[source]) {
    throw MetricsError("delivery from source " + std::to_string(source) + " exceeds packets sent");
  }
  ++delivered_by_source[source];
}

void RunMetrics::mark_secure_path(std::uint64_t discovery, NodeId source, NodeId dest, SimTime t0, SimTime t1) {
  if (!marked_.insert(discovery).second) {
    throw MetricsError("secure path marked twice for discovery " + std::to_string(discovery));
  }
  secure_path_delay.try_emplace({source, dest}, t1 - t0);
}

namespace {

class StatAcc {
 public:
  void add(double v) {
    if (n_ == 0) {
      min_ = max_ = v;
    } else {
      min_ = std::min(min_, v);
      max_ = std::max(max_, v);
    }
    sum_ += v;
    ++n_;
  }
  Stat get() const { return n_ == 0 ? Stat{} : Stat{sum_ / static_cast<double>(n_), min_, max_}; }

 private:
  double sum_ = 0.0, min_ = 0.0, max_ = 0.0;
  std::size_t n_ = 0;
};

unsigned total_rreq(const RunMetrics& m) {
  unsigned n = 0;
  for (const auto& [src, c] : m.rreq_count_by_source) n += c;
  return n;
}

}  // namespace

Summary aggregate(const std::vector<RunMetrics>& runs) {
  if (runs.empty()) throw MetricsError("aggregate needs at least one run");
  StatAcc rreq, delay, det, sent, deliv;
  for (const auto& m : runs) {
    rreq.add(total_rreq(m));
    for (const auto& [pair, d] : m.secure_path_delay) delay.add(d.seconds());
    det.add(static_cast<double>(m.detected_malicious.size()));
    sent.add(m.packets_sent());
    deliv.add(m.packets_delivered());
  }
  return Summary{runs.size(), rreq.get(), delay.get(), det.get(), sent.get(), deliv.get()};
}

std::vector<CsvRow> csv_rows(const std::string& scenario, std::uint64_t seed, unsigned planted, const RunMetrics& m) {
  std::set<NodeId> sources;
  for (const auto& [s, c] : m.rreq_count_by_source) sources.insert(s);
  for (const auto& [s, c] : m.sent_by_source) sources.insert(s);
  std::vector<CsvRow> rows;
  for (NodeId s : sources) {
    CsvRow r;
    r.scenario = scenario;
    r.seed = seed;
    r.source = s;
    if (auto it = m.rreq_count_by_source.find(s); it != m.rreq_count_by_source.end()) r.rreq_count = it->second;
    for (const auto& [pair, d] : m.secure_path_delay) {
      if (pair.first == s) {
        r.delay_s = d.seconds();
        break;
      }
    }
    r.detected = static_cast<unsigned>(m.detected_malicious.size());
    r.planted = planted;
    if (auto it = m.sent_by_source.find(s); it != m.sent_by_source.end()) r.sent = it->second;
    if (auto it = m.delivered_by_source.find(s); it != m.delivered_by_source.end()) r.delivered = it->second;
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_csv_row(std::ostream& out, const CsvRow& r) {
  out << r.scenario << ',' << r.seed << ',' << r.source << ',' << r.rreq_count << ',';
  if (r.delay_s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *r.delay_s);
    out << buf;
  } else {
    out << "NA";
  }
  out << ',' << r.detected << ',' << r.planted << ',' << r.sent << ',' << r.delivered << '\n';
}

}  // namespace debh::metrics
