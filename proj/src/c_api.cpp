#include "fluxsim.h"

#include <string>
#include <vector>

#include "fluxsim/dga.hpp"
#include "fluxsim/runner.hpp"

namespace {

thread_local std::string g_last_error;

int fail(int code, const std::string& msg) {
    g_last_error = msg;
    return code;
}

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        fn();
        return FLUXSIM_OK;
    } catch (const fluxsim::ConfigError& e) {
        return fail(FLUXSIM_ERR_CONFIG, e.what());
    } catch (const std::exception& e) {
        return fail(FLUXSIM_ERR_RUNTIME, e.what());
    }
}

}  // namespace

struct fluxsim_domains {
    fluxsim::dga::DomainList list;
};

struct fluxsim_curve {
    fluxsim::dga::CurveData data;
};

extern "C" {

const char* fluxsim_version(void) { return "fluxsim 1.0.0"; }

const char* fluxsim_last_error(void) { return g_last_error.c_str(); }

int fluxsim_generate_domains(const char* seed, const char* date, uint64_t alpha,
                             const char* const* tlds, size_t tld_count,
                             const char* const* dictionary, size_t dict_count,
                             fluxsim_domains** out) {
    if (!seed || !date || !out || (tld_count && !tlds) ||
        (dict_count && !dictionary))
        return fail(FLUXSIM_ERR_CONFIG, "null argument");
    *out = nullptr;
    return guarded([&] {
        fluxsim::dga::DgaSeed s{seed, fluxsim::dga::parse_date(date)};
        std::vector<std::string> tld_vec(tlds, tlds + tld_count);
        std::optional<std::vector<std::string>> dict;
        if (dict_count)
            dict = std::vector<std::string>(dictionary, dictionary + dict_count);
        auto handle = new fluxsim_domains{
            fluxsim::dga::generate_domains(s, alpha, std::move(tld_vec), dict)};
        *out = handle;
    });
}

size_t fluxsim_domains_count(const fluxsim_domains* d) {
    return d ? d->list.domains.size() : 0;
}

const char* fluxsim_domains_get(const fluxsim_domains* d, size_t index) {
    if (!d || index >= d->list.domains.size()) return nullptr;
    return d->list.domains[index].c_str();
}

void fluxsim_domains_free(fluxsim_domains* d) { delete d; }

int fluxsim_window_cost(uint64_t alpha, uint64_t beta, uint64_t bytes_per_access,
                        double seconds_per_access, int baseline_average,
                        fluxsim_lookup_cost* out) {
    if (!out) return fail(FLUXSIM_ERR_CONFIG, "null argument");
    return guarded([&] {
        auto cfg = fluxsim::dga::WindowConfig::make(alpha, beta);
        auto cost = fluxsim::dga::lookup_cost(
            cfg, bytes_per_access, seconds_per_access,
            baseline_average ? fluxsim::dga::CostMode::BaselineAverage
                             : fluxsim::dga::CostMode::Windowed);
        out->accesses = cost.accesses;
        out->bytes = cost.bytes;
        out->kilobytes = cost.kilobytes;
        out->seconds = cost.seconds;
    });
}

int fluxsim_curve_data(uint64_t alpha, const uint64_t* betas, size_t beta_count,
                       fluxsim_curve** out) {
    if (!out || (beta_count && !betas))
        return fail(FLUXSIM_ERR_CONFIG, "null argument");
    *out = nullptr;
    return guarded([&] {
        std::vector<uint64_t> list(betas, betas + beta_count);
        *out = new fluxsim_curve{fluxsim::dga::curve_data(alpha, list)};
    });
}

size_t fluxsim_curve_count(const fluxsim_curve* c) {
    return c ? c->data.points.size() : 0;
}

int fluxsim_curve_get(const fluxsim_curve* c, size_t index, uint64_t* beta,
                      uint64_t* gamma) {
    if (!c || index >= c->data.points.size() || !beta || !gamma)
        return fail(FLUXSIM_ERR_CONFIG, "bad curve access");
    *beta = c->data.points[index].first;
    *gamma = c->data.points[index].second;
    return FLUXSIM_OK;
}

size_t fluxsim_curve_skipped_count(const fluxsim_curve* c) {
    return c ? c->data.skipped.size() : 0;
}

uint64_t fluxsim_curve_skipped_get(const fluxsim_curve* c, size_t index) {
    if (!c || index >= c->data.skipped.size()) return 0;
    return c->data.skipped[index];
}

void fluxsim_curve_free(fluxsim_curve* c) { delete c; }

int fluxsim_run_scenario(const char* scenario_path, const char* out_dir) {
    if (!scenario_path) return fail(FLUXSIM_ERR_CONFIG, "null scenario path");
    return guarded([&] {
        fluxsim::run_scenario_file(scenario_path, out_dir ? out_dir : "");
    });
}

int fluxsim_render_report(const char* run_dir) {
    if (!run_dir) return fail(FLUXSIM_ERR_CONFIG, "null run directory");
    return guarded([&] { fluxsim::render_report_dir(run_dir); });
}

}  // extern "C"
