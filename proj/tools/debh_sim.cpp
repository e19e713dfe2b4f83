// Command-line front end: single runs, the scenario suite, the throughput
// sweep and fixture replay.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include "debh/scenario.hpp"

namespace fs = std::filesystem;
using namespace debh;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kMismatch = 2;

std::vector<std::uint64_t> parse_seed_range(const std::string& s) {
  auto dots = s.find("..");
  try {
    if (dots == std::string::npos) return {std::stoull(s)};
    std::uint64_t lo = std::stoull(s.substr(0, dots));
    std::uint64_t hi = std::stoull(s.substr(dots + 2));
    if (hi < lo) throw ConfigError("--seeds: range end before start");
    std::vector<std::uint64_t> out;
    for (auto v = lo; v <= hi; ++v) out.push_back(v);
    return out;
  } catch (const std::logic_error&) {
    throw ConfigError("--seeds: expected n or n..m, got '" + s + "'");
  }
}

std::ofstream open_out(const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream f(dir / name);
  if (!f) throw ConfigError("cannot write " + (dir / name).string());
  return f;
}

scenario::ScenarioConfig base_config(const std::string& path) {
  return path.empty() ? scenario::ScenarioConfig{} : scenario::load_config(path);
}

void print_run(std::ostream& out, const scenario::RunResult& r) {
  const auto& m = r.metrics;
  out << "scenario " << r.scenario << " seed " << r.seed << '\n';
  out << "planted: " << pathcheck::AuditLog::format_queue({r.planted.begin(), r.planted.end()}) << '\n';
  out << "detected: "
      << pathcheck::AuditLog::format_queue({m.detected_malicious.begin(), m.detected_malicious.end()}) << '\n';
  out << "data: " << m.packets_delivered() << " delivered of " << m.packets_sent() << " sent\n";
  for (const auto& s : r.sessions) {
    out << "check " << s.id << ": " << s.source << " -> " << s.destination << ", path number " << s.path_number
        << ", " << (s.finished ? (s.safe ? "secure" : "no secure path") : "unfinished") << ", "
        << s.data_control_packets << " data control packets\n";
  }
}

int cmd_run(const std::string& config, std::optional<std::uint64_t> seed, const std::string& out,
            const std::string& defense, bool trace) {
  auto cfg = base_config(config);
  if (seed) cfg.seed = *seed;
  if (!defense.empty()) cfg.defense = parse_defense(defense);
  std::ofstream trace_file;
  std::ostream* trace_out = nullptr;
  if (trace) {
    if (out.empty()) {
      trace_out = &std::cout;
    } else {
      trace_file = open_out(out, "trace.log");
      trace_out = &trace_file;
    }
  }
  auto r = scenario::run_scenario(cfg, trace_out);
  if (!out.empty()) {
    auto csv = open_out(out, "metrics.csv");
    csv << metrics::kCsvHeader << '\n';
    for (const auto& row : metrics::csv_rows(r.scenario, r.seed, static_cast<unsigned>(r.planted.size()), r.metrics)) {
      metrics::write_csv_row(csv, row);
    }
    auto audit = open_out(out, "audit.csv");
    r.audit.write(audit);
    auto summary = open_out(out, "summary.txt");
    print_run(summary, r);
  }
  print_run(std::cout, r);
  return kOk;
}

int cmd_suite(const std::string& config, const std::string& seeds, const std::string& out,
              const std::string& defense, unsigned jobs) {
  auto base = base_config(config);
  if (!defense.empty()) base.defense = parse_defense(defense);
  auto rows = scenario::run_suite(scenario::standard_suite(base), parse_seed_range(seeds), jobs);
  if (!out.empty()) {
    auto csv = open_out(out, "suite.csv");
    scenario::write_suite_csv(csv, rows);
    auto summary = open_out(out, "summary.txt");
    scenario::write_suite_summary(summary, rows);
  }
  scenario::write_suite_summary(std::cout, rows);
  return kOk;
}

int cmd_sweep(const std::string& config, std::optional<std::uint64_t> seed, unsigned attackers,
              const std::string& out) {
  auto base = base_config(config);
  if (seed) base.seed = *seed;
  auto points = scenario::throughput_sweep(base, attackers);
  if (!out.empty()) {
    auto csv = open_out(out, "sweep.csv");
    scenario::write_sweep_csv(csv, points);
  }
  scenario::write_sweep_csv(std::cout, points);
  return kOk;
}

int cmd_replay(const std::string& fixture, const std::string& dir) {
  auto r = scenario::replay_fixture(fixture, dir);
  std::cout << "node,nhn,path_number,rrep_generator_queue,blackhole_queue\n";
  for (const auto& row : r.actual) {
    std::cout << row.node << ',' << row.nhn << ',' << row.path_number << ','
              << pathcheck::AuditLog::format_queue(row.generators) << ','
              << pathcheck::AuditLog::format_queue(row.blackholes) << '\n';
  }
  std::cout << "final black hole queue: " << pathcheck::AuditLog::format_queue(r.final_suspects) << '\n';
  std::cout << "malicious: " << pathcheck::AuditLog::format_queue({r.malicious.begin(), r.malicious.end()}) << '\n';
  std::cout << "route requests: " << r.rreq_count << '\n';
  if (!r.ok()) {
    for (const auto& m : r.mismatches) std::cerr << "mismatch: " << m << '\n';
    return kMismatch;
  }
  std::cout << "replay " << fixture << ": match\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Black hole detection simulator"};
  app.require_subcommand(1);

  std::string config, out, defense, seeds = "1..10", fixture, fixture_dir = DEBH_FIXTURE_DIR;
  std::optional<std::uint64_t> seed;
  bool trace = false;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  unsigned attackers = 5;

  auto* run = app.add_subcommand("run", "Run one scenario");
  run->add_option("--config", config, "Scenario file (defaults apply when omitted)");
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--out", out, "Directory for metrics.csv, audit.csv and summary.txt");
  run->add_option("--defense", defense, "debh or none")->check(CLI::IsMember({"debh", "none"}));
  run->add_flag("--trace", trace, "Emit the event trace");

  auto* suite = app.add_subcommand("suite", "Run the seven attack scenarios over a seed range");
  suite->add_option("--seeds", seeds, "Seed or range n..m");
  suite->add_option("--config", config, "Base scenario file");
  suite->add_option("--out", out, "Directory for suite.csv and summary.txt");
  suite->add_option("--defense", defense, "debh or none")->check(CLI::IsMember({"debh", "none"}));
  suite->add_option("--jobs", jobs, "Parallel simulations");

  auto* sweep = app.add_subcommand("sweep", "Throughput for 5 to 30 simultaneous connections");
  sweep->add_option("--config", config, "Base scenario file");
  sweep->add_option("--seed", seed, "Layout seed");
  sweep->add_option("--attackers", attackers, "Cooperating attackers (0-9)");
  sweep->add_option("--out", out, "Directory for sweep.csv");

  auto* replay = app.add_subcommand("replay", "Replay a bundled walk-through and compare its rows");
  replay->add_option("--fixture", fixture, "Fixture name, e.g. cooperative15")->required();
  replay->add_option("--fixture-dir", fixture_dir, "Fixture directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (*run) return cmd_run(config, seed, out, defense, trace);
    if (*suite) return cmd_suite(config, seeds, out, defense, jobs);
    if (*sweep) return cmd_sweep(config, seed, attackers, out);
    if (*replay) return cmd_replay(fixture, fixture_dir);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  }
  return kOk;
}
