#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fluxsim/registrar.hpp"
#include "fluxsim/simkernel.hpp"

namespace fluxsim::detect {

struct Thresholds {
    double regularity_cv = 0.1;        // flag below
    double persistence = 0.6;          // flag above
    SimTime persistence_window_ms = 600'000;
    double nxdomain_per_hour = 50.0;   // flag above
};

// Coefficient of variation (population stddev / mean) of the gaps between
// a host's consecutive outbound rows. Needs at least 3 rows.
std::optional<double> regularity_score(const std::vector<sim::TraceRow>& trace,
                                       const std::string& host);

// Max over destinations of the fraction of observation windows containing
// at least one contact.
double persistence_score(const std::vector<sim::TraceRow>& trace,
                         const std::string& host, SimTime window_ms,
                         SimTime horizon_ms);

// NXDOMAIN responses per hour over the horizon.
double nxdomain_rate(const std::vector<Registrar::NxRecord>& nx_log,
                     const std::string& host, SimTime horizon_ms);

// (infected - baseline) / baseline * 100.
double bandwidth_overhead(double baseline_bytes, double infected_bytes);

// Extra battery decline attributable to the bot, in percentage points of
// capacity.
double battery_decline(double capacity_mah, double baseline_end_mah,
                       double bot_end_mah);

struct HostReport {
    std::string host;
    std::optional<double> regularity;
    bool regularity_flag = false;
    double persistence = 0.0;
    bool persistence_flag = false;
    double nx_per_hour = 0.0;
    bool nx_flag = false;
};

struct DetectionReport {
    std::vector<HostReport> hosts;  // sorted by host name
    double overhead_percent = 0.0;
    double battery_decline_percent = 0.0;
};

struct RunLevelInputs {
    // per bot host: total C&C bytes (up + down) and end-of-run battery
    std::map<std::string, uint64_t> c2_bytes;
    std::map<std::string, double> battery_end_mah;
    std::map<std::string, double> battery_capacity_mah;
    std::map<std::string, double> baseline_drain_mah_per_h;
    double baseline_bytes_per_host = 0.0;
    SimTime horizon_ms = 0;
};

DetectionReport build_report(const std::vector<sim::TraceRow>& trace,
                             const std::vector<Registrar::NxRecord>& nx_log,
                             const Thresholds& thresholds, SimTime horizon_ms,
                             const RunLevelInputs& run);

// CSV: one row per host, fixed columns, summary as a trailing commented
// block. Byte-stable for identical inputs.
std::string render_report_csv(const DetectionReport& report);

}  // namespace fluxsim::detect
