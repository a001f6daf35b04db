#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fluxsim/detector.hpp"
#include "fluxsim/nodes.hpp"

namespace fluxsim {

struct BotGroup {
    std::string profile = "default";
    uint64_t count = 1;
    nodes::JitterSpec jitter;
    SimTime hop_interval_ms = 600'000;
};

struct CommandScheduleEntry {
    SimTime at_ms = 0;
    std::vector<uint64_t> targets;  // explicit bot ids
    uint64_t targets_first_n = 0;   // or ids 1..n (exclusive with targets)
    proto::CommandKind kind = proto::CommandKind::CaptureImage;
    proto::ParamMap params;
};

struct ScenarioFault {
    enum class Kind { ServerTakedown, BotmasterCompromise, IpReassign };
    Kind kind = Kind::ServerTakedown;
    uint64_t server_index = 0;  // takedown: 0-based initial server
    std::string device;         // ip_reassign
    SimTime at_ms = 0;
    SimTime period_ms = 0;  // ip_reassign: 0 = one-shot
};

struct Scenario {
    uint64_t master_seed = 42;
    SimTime duration_ms = 3'600'000;

    std::string dga_seed = "s1";
    dga::Date dga_date{2021, 1, 1};
    uint64_t alpha = 10'000;
    uint64_t beta = 100;
    std::vector<std::string> tlds = {"com", "net", "org"};
    std::optional<std::vector<std::string>> dictionary;

    uint64_t server_count = 2;
    SimTime heartbeat_ms = 30'000;
    bool auto_replace = true;

    std::vector<BotGroup> bots;
    std::map<std::string, nodes::DeviceProfile> profiles;  // includes builtins
    nodes::PayloadModel payload;

    sim::NetModel net;

    std::vector<ScenarioFault> faults;
    std::vector<CommandScheduleEntry> schedule;

    detect::Thresholds thresholds;
    double baseline_bytes_per_host = 20'000'000.0;

    std::optional<std::string> output_dir;

    uint64_t total_bots() const {
        uint64_t n = 0;
        for (const auto& g : bots) n += g.count;
        return n;
    }
};

// Built-in device profiles: "default" (grants everything) and
// "notify_deny" (user is notified and never grants).
std::map<std::string, nodes::DeviceProfile> builtin_profiles();

// Strict parse: unknown keys are rejected with their full path.
Scenario parse_scenario(const std::string& path);
Scenario parse_scenario_text(const std::string& text, const std::string& origin);

// Canonical JSON of a resolved scenario; parse_scenario_text round-trips it.
std::string scenario_to_json(const Scenario& sc);

// FLUXSIM_SEED, when set, overrides master_seed.
void apply_env_seed(Scenario& sc);

// Deterministic device naming: "bot001", "bot002", ...
std::string device_name(uint64_t index, uint64_t total);

}  // namespace fluxsim
