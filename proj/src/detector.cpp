#include "fluxsim/detector.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace fluxsim::detect {

std::optional<double> regularity_score(const std::vector<sim::TraceRow>& trace,
                                       const std::string& host) {
    std::vector<SimTime> sends;
    for (const auto& row : trace)
        if (row.src == host) sends.push_back(row.t);
    if (sends.size() < 3) return std::nullopt;

    std::vector<double> gaps;
    gaps.reserve(sends.size() - 1);
    for (size_t i = 1; i < sends.size(); ++i)
        gaps.push_back(double(sends[i] - sends[i - 1]));
    double mean = 0;
    for (double g : gaps) mean += g;
    mean /= double(gaps.size());
    if (mean == 0.0) return 0.0;  // all sends at one instant: fully regular
    double var = 0;
    for (double g : gaps) var += (g - mean) * (g - mean);
    var /= double(gaps.size());  // population variance
    return std::sqrt(var) / mean;
}

double persistence_score(const std::vector<sim::TraceRow>& trace,
                         const std::string& host, SimTime window_ms,
                         SimTime horizon_ms) {
    if (window_ms == 0 || horizon_ms < 2 * window_ms)
        throw ConfigError("persistence horizon must cover at least 2 windows");
    uint64_t total = (horizon_ms + window_ms - 1) / window_ms;
    std::map<std::string, std::set<uint64_t>> windows_by_dst;
    for (const auto& row : trace) {
        if (row.src != host || row.t >= horizon_ms) continue;
        windows_by_dst[row.dst].insert(row.t / window_ms);
    }
    double best = 0.0;
    for (const auto& [dst, wins] : windows_by_dst)
        best = std::max(best, double(wins.size()) / double(total));
    return best;
}

double nxdomain_rate(const std::vector<Registrar::NxRecord>& nx_log,
                     const std::string& host, SimTime horizon_ms) {
    if (horizon_ms == 0) throw ConfigError("nxdomain horizon must be positive");
    uint64_t count = 0;
    for (const auto& rec : nx_log)
        if (rec.querier == host) ++count;
    return double(count) / (double(horizon_ms) / 3'600'000.0);
}

double bandwidth_overhead(double baseline_bytes, double infected_bytes) {
    if (baseline_bytes <= 0.0)
        throw ConfigError("baseline bytes must be positive");
    return (infected_bytes - baseline_bytes) / baseline_bytes * 100.0;
}

double battery_decline(double capacity_mah, double baseline_end_mah,
                       double bot_end_mah) {
    if (capacity_mah <= 0.0) throw ConfigError("capacity must be positive");
    return (baseline_end_mah - bot_end_mah) / capacity_mah * 100.0;
}

DetectionReport build_report(const std::vector<sim::TraceRow>& trace,
                             const std::vector<Registrar::NxRecord>& nx_log,
                             const Thresholds& th, SimTime horizon_ms,
                             const RunLevelInputs& run) {
    std::set<std::string> hosts;
    for (const auto& row : trace) hosts.insert(row.src);
    for (const auto& rec : nx_log) hosts.insert(rec.querier);

    DetectionReport report;
    for (const auto& host : hosts) {
        HostReport hr;
        hr.host = host;
        hr.regularity = regularity_score(trace, host);
        hr.regularity_flag = hr.regularity && *hr.regularity < th.regularity_cv;
        if (horizon_ms >= 2 * th.persistence_window_ms) {
            hr.persistence = persistence_score(trace, host,
                                               th.persistence_window_ms,
                                               horizon_ms);
            hr.persistence_flag = hr.persistence > th.persistence;
        }  // horizons under two windows leave persistence at zero, unflagged
        hr.nx_per_hour = nxdomain_rate(nx_log, host, horizon_ms);
        hr.nx_flag = hr.nx_per_hour > th.nxdomain_per_hour;
        report.hosts.push_back(std::move(hr));
    }

    if (!run.c2_bytes.empty() && run.baseline_bytes_per_host > 0.0) {
        double sum = 0.0;
        for (const auto& [host, bytes] : run.c2_bytes)
            sum += bandwidth_overhead(run.baseline_bytes_per_host,
                                      run.baseline_bytes_per_host + double(bytes));
        report.overhead_percent = sum / double(run.c2_bytes.size());
    }
    if (!run.battery_end_mah.empty() && run.horizon_ms > 0) {
        double hours = double(run.horizon_ms) / 3'600'000.0;
        double sum = 0.0;
        for (const auto& [host, end] : run.battery_end_mah) {
            double cap = run.battery_capacity_mah.at(host);
            double baseline_end =
                std::max(0.0, cap - run.baseline_drain_mah_per_h.at(host) * hours);
            sum += battery_decline(cap, baseline_end, end);
        }
        report.battery_decline_percent = sum / double(run.battery_end_mah.size());
    }
    return report;
}

std::string render_report_csv(const DetectionReport& report) {
    std::string out =
        "host,regularity_score,regularity_flag,persistence_score,"
        "persistence_flag,nxdomain_per_hour,nxdomain_flag\n";
    char buf[128];
    for (const auto& hr : report.hosts) {
        out += hr.host;
        out.push_back(',');
        if (hr.regularity) {
            std::snprintf(buf, sizeof(buf), "%.6f", *hr.regularity);
            out += buf;
        }
        std::snprintf(buf, sizeof(buf), ",%d,%.6f,%d,%.6f,%d\n",
                      hr.regularity_flag ? 1 : 0, hr.persistence,
                      hr.persistence_flag ? 1 : 0, hr.nx_per_hour,
                      hr.nx_flag ? 1 : 0);
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "# summary\n# overhead_percent=%.1f\n",
                  report.overhead_percent);
    out += buf;
    std::snprintf(buf, sizeof(buf), "# battery_decline_percent=%.1f\n",
                  report.battery_decline_percent);
    out += buf;
    return out;
}

}  // namespace fluxsim::detect
