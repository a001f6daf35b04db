// fluxsim CLI: scenario-driven runs, domain generation, windowing cost
// tables and report re-rendering. Everything goes through the C API in
// fluxsim.h; the simulation itself never touches a real network.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "fluxsim.h"

namespace {

int report_error(int code) {
    std::cerr << "error: " << fluxsim_last_error() << "\n";
    return code;
}

std::vector<std::string> split_commas(const std::vector<std::string>& raw) {
    std::vector<std::string> out;
    for (const auto& item : raw) {
        size_t start = 0;
        while (start <= item.size()) {
            size_t comma = item.find(',', start);
            std::string piece = item.substr(
                start, comma == std::string::npos ? std::string::npos
                                                  : comma - start);
            if (!piece.empty()) out.push_back(piece);
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
    }
    return out;
}

int cmd_gen_domains(const std::string& seed, const std::string& date,
                    uint64_t alpha, const std::vector<std::string>& tlds_raw,
                    const std::string& dict_path, const std::string& out_path) {
    std::vector<std::string> tlds = split_commas(tlds_raw);
    std::vector<std::string> dict;
    if (!dict_path.empty()) {
        std::ifstream in(dict_path);
        if (!in) {
            std::cerr << "error: cannot open dictionary " << dict_path << "\n";
            return 2;
        }
        std::string word;
        while (std::getline(in, word))
            if (!word.empty() && word[0] != '#') dict.push_back(word);
    }
    std::vector<const char*> tld_ptrs, dict_ptrs;
    for (const auto& t : tlds) tld_ptrs.push_back(t.c_str());
    for (const auto& w : dict) dict_ptrs.push_back(w.c_str());

    fluxsim_domains* domains = nullptr;
    int rc = fluxsim_generate_domains(
        seed.c_str(), date.c_str(), alpha, tld_ptrs.data(), tld_ptrs.size(),
        dict_ptrs.empty() ? nullptr : dict_ptrs.data(), dict_ptrs.size(),
        &domains);
    if (rc != FLUXSIM_OK) return report_error(rc);

    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path, std::ios::binary | std::ios::trunc);
        if (!file) {
            fluxsim_domains_free(domains);
            std::cerr << "error: cannot write " << out_path << "\n";
            return 1;
        }
        out = &file;
    }
    for (size_t i = 0; i < fluxsim_domains_count(domains); ++i)
        *out << fluxsim_domains_get(domains, i) << "\n";
    fluxsim_domains_free(domains);
    return 0;
}

int cmd_windows(uint64_t alpha, uint64_t beta, uint64_t bytes_per_access,
                double seconds_per_access, const std::vector<uint64_t>& betas,
                const std::string& curve_out) {
    fluxsim_lookup_cost windowed{}, baseline{};
    int rc = fluxsim_window_cost(alpha, beta, bytes_per_access,
                                 seconds_per_access, 0, &windowed);
    if (rc != FLUXSIM_OK) return report_error(rc);
    rc = fluxsim_window_cost(alpha, beta, bytes_per_access, seconds_per_access,
                             1, &baseline);
    if (rc != FLUXSIM_OK) return report_error(rc);

    std::printf("window cost model: alpha=%llu beta=%llu gamma=%llu\n\n",
                (unsigned long long)alpha, (unsigned long long)beta,
                (unsigned long long)(alpha / beta));
    std::printf("%-18s %10s %12s %10s %10s\n", "mode", "accesses", "bytes",
                "kb", "time");
    std::printf("%-18s %10llu %12llu %7llu KB %7g s\n", "windowed",
                (unsigned long long)windowed.accesses,
                (unsigned long long)windowed.bytes,
                (unsigned long long)windowed.kilobytes, windowed.seconds);
    std::printf("%-18s %10llu %12llu %7llu KB %7g s\n", "baseline-average",
                (unsigned long long)baseline.accesses,
                (unsigned long long)baseline.bytes,
                (unsigned long long)baseline.kilobytes, baseline.seconds);

    // Fig-2-style inverse proportionality curve over divisors of alpha
    // (or the requested list).
    std::vector<uint64_t> candidates = betas;
    if (candidates.empty()) {
        for (uint64_t b = 1; b * b <= alpha; ++b) {
            if (alpha % b) continue;
            candidates.push_back(b);
            if (b != alpha / b) candidates.push_back(alpha / b);
        }
        std::sort(candidates.begin(), candidates.end());
    }
    fluxsim_curve* curve = nullptr;
    rc = fluxsim_curve_data(alpha, candidates.data(), candidates.size(), &curve);
    if (rc != FLUXSIM_OK) return report_error(rc);
    for (size_t i = 0; i < fluxsim_curve_skipped_count(curve); ++i)
        std::fprintf(stderr, "warning: beta %llu does not divide alpha, skipped\n",
                     (unsigned long long)fluxsim_curve_skipped_get(curve, i));

    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!curve_out.empty()) {
        file.open(curve_out, std::ios::binary | std::ios::trunc);
        if (!file) {
            fluxsim_curve_free(curve);
            std::cerr << "error: cannot write " << curve_out << "\n";
            return 1;
        }
        out = &file;
    } else {
        std::printf("\n");
    }
    *out << "beta,gamma\n";
    for (size_t i = 0; i < fluxsim_curve_count(curve); ++i) {
        uint64_t b = 0, g = 0;
        fluxsim_curve_get(curve, i, &b, &g);
        *out << b << "," << g << "\n";
    }
    fluxsim_curve_free(curve);
    return 0;
}

int cmd_run(const std::vector<std::string>& scenarios, const std::string& out_dir,
            unsigned jobs) {
    namespace fs = std::filesystem;
    if (scenarios.size() == 1) {
        int rc = fluxsim_run_scenario(scenarios[0].c_str(), out_dir.c_str());
        if (rc != FLUXSIM_OK) return report_error(rc);
        std::cout << "wrote " << out_dir << "\n";
        return 0;
    }
    // Several scenarios: one subdirectory per file, independent kernels,
    // optionally in parallel.
    std::atomic<size_t> next{0};
    std::atomic<int> worst{0};
    auto worker = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= scenarios.size()) return;
            fs::path dir =
                fs::path(out_dir) / fs::path(scenarios[i]).stem().string();
            int rc = fluxsim_run_scenario(scenarios[i].c_str(), dir.string().c_str());
            if (rc != FLUXSIM_OK) {
                std::cerr << "error: " << scenarios[i] << ": "
                          << fluxsim_last_error() << "\n";
                int cur = worst.load();
                while (cur < rc && !worst.compare_exchange_weak(cur, rc)) {}
            }
        }
    };
    unsigned n = std::max(1u, std::min<unsigned>(jobs, scenarios.size()));
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (worst.load() == 0) std::cout << "wrote " << out_dir << "\n";
    return worst.load();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fluxsim: deterministic botnet C&C simulator for defensive "
                 "research. All traffic is synthetic; there is no way to "
                 "configure a real endpoint."};
    app.require_subcommand(1);

    // gen-domains
    std::string seed = "s1", date = "2021-01-01", dict_path, domains_out;
    uint64_t alpha = 10000;
    std::vector<std::string> tlds{"com", "net", "org"};
    auto* gen = app.add_subcommand("gen-domains",
                                   "Generate the deterministic domain list");
    gen->add_option("--seed", seed, "Seed string");
    gen->add_option("--date", date, "Date YYYY-MM-DD");
    gen->add_option("--alpha", alpha, "Number of domains");
    gen->add_option("--tlds", tlds, "TLDs (comma separated or repeated)");
    gen->add_option("--dict", dict_path, "Word list file for dictionary mode");
    gen->add_option("--out", domains_out, "Write to file instead of stdout");

    // windows
    uint64_t w_alpha = 10000, w_beta = 100, w_bytes = 500;
    double w_seconds = 0.2;
    std::vector<uint64_t> w_betas;
    std::string curve_out;
    auto* windows = app.add_subcommand(
        "windows", "Windowed vs baseline lookup cost table and curve CSV");
    windows->add_option("--alpha", w_alpha, "Number of domains");
    windows->add_option("--beta", w_beta, "Number of windows");
    windows->add_option("--bytes", w_bytes, "Bytes per domain access");
    windows->add_option("--seconds", w_seconds, "Seconds per domain access");
    windows->add_option("--betas", w_betas, "Curve betas (default: all divisors)")
        ->delimiter(',');
    windows->add_option("--curve-out", curve_out, "Write curve CSV to file");

    // run
    std::vector<std::string> scenarios;
    std::string run_out;
    unsigned jobs = 1;
    auto* run = app.add_subcommand("run", "Run one or more scenario files");
    run->add_option("scenario", scenarios, "Scenario JSON file(s)")->required();
    run->add_option("--out", run_out, "Output directory")->required();
    run->add_option("--jobs", jobs, "Parallel workers for multiple scenarios");

    // report
    std::string report_dir;
    auto* report = app.add_subcommand(
        "report", "Re-render report.csv from a saved run directory");
    report->add_option("dir", report_dir, "Run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (gen->parsed())
        return cmd_gen_domains(seed, date, alpha, tlds, dict_path, domains_out);
    if (windows->parsed())
        return cmd_windows(w_alpha, w_beta, w_bytes, w_seconds, w_betas, curve_out);
    if (run->parsed()) return cmd_run(scenarios, run_out, jobs);
    if (report->parsed()) {
        int rc = fluxsim_render_report(report_dir.c_str());
        if (rc != FLUXSIM_OK) return report_error(rc);
        std::cout << "wrote " << report_dir << "/report.csv\n";
        return 0;
    }
    return 2;
}
