#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fluxsim/scenario.hpp"

namespace fluxsim {

// A scenario materialized into a kernel with all nodes, registrations,
// timers and faults in place but not yet run.
struct BuiltSim {
    Scenario scenario;
    std::unique_ptr<sim::Sim> sim;
    nodes::BotmasterNode* botmaster = nullptr;
    std::vector<nodes::ServerNode*> servers;
    std::vector<nodes::BotNode*> bots;
    std::shared_ptr<const dga::DomainList> domains;
    dga::WindowConfig window;
};

BuiltSim build_sim(const Scenario& sc);

// Runs to the scenario duration.
sim::RunSummary run_to_end(BuiltSim& built);

struct PerBotMetrics {
    std::string device;
    uint64_t bot_id = 0;
    uint64_t bytes_up = 0;
    uint64_t bytes_down = 0;
    uint64_t polls = 0;
    uint64_t nx_misses = 0;
    uint64_t commands_ok = 0;
    uint64_t commands_denied = 0;
    double battery_end_mah = 0.0;
};

std::vector<PerBotMetrics> collect_metrics(BuiltSim& built);

// Serialized run journal, one JSON object per line, stable key order.
std::string render_events_jsonl(const std::vector<sim::JournalRecord>& journal);
std::string render_metrics_csv(const std::vector<PerBotMetrics>& metrics);

// Writes events.jsonl, metrics.csv, scenario.json, then renders report.csv
// and summary.md from the written files (so `report` re-renders are
// byte-identical by construction).
void write_artifacts(BuiltSim& built, const std::string& out_dir);

// Recomputes report.csv from a run directory's saved artifacts.
void render_report_dir(const std::string& run_dir);

// parse + env seed + build + run + artifacts.
void run_scenario_file(const std::string& path, const std::string& out_dir);

}  // namespace fluxsim
