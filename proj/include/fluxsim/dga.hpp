#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fluxsim/types.hpp"

namespace fluxsim::dga {

// Calendar date, day granularity, UTC. Equality of (seed_string, date)
// makes two seeds interchangeable everywhere.
struct Date {
    int year = 0;
    unsigned month = 0;
    unsigned day = 0;

    friend bool operator==(const Date&, const Date&) = default;
};

Date parse_date(const std::string& iso);  // "YYYY-MM-DD", validated
std::string format_date(const Date& d);

struct DgaSeed {
    std::string seed_string;
    Date date;

    friend bool operator==(const DgaSeed&, const DgaSeed&) = default;
};

// alpha generated domains split into beta windows of gamma each.
struct WindowConfig {
    uint64_t alpha = 0;
    uint64_t beta = 0;
    uint64_t gamma = 0;  // always alpha / beta

    static WindowConfig make(uint64_t alpha, uint64_t beta);  // validates
};

struct DomainList {
    std::vector<std::string> domains;
    DgaSeed seed;
    std::vector<std::string> tlds;
    std::optional<std::vector<std::string>> dictionary;
};

struct RegistrationPlan {
    struct Entry {
        uint64_t window_index;
        uint64_t domain_index;
    };
    std::vector<Entry> entries;  // exactly one per window, in window order
};

struct LookupCost {
    uint64_t accesses = 0;
    uint64_t bytes = 0;
    uint64_t kilobytes = 0;  // 1 KB = 1024 B, rounded to nearest
    double seconds = 0.0;
};

enum class CostMode { Windowed, BaselineAverage };

struct LookupResult {
    std::optional<std::string> domain;  // empty = RegDomainFailed
    uint64_t polls = 0;
    uint64_t windows_tried = 0;
};

// Dictionary words must be lowercase a-z, 1..15 chars, so labels fit
// the label grammar.
void validate_dictionary(const std::vector<std::string>& words);

// Deterministic generation: PRNG state seeded with
// fnv1a64(seed_string + "|" + YYYY-MM-DD). Random mode emits
// [a-z]{8..16} labels; dictionary mode emits word-word labels.
DomainList generate_domains(const DgaSeed& seed, uint64_t alpha,
                            std::vector<std::string> tlds,
                            std::optional<std::vector<std::string>> dictionary = std::nullopt);

// One uniformly random domain per window, from a dedicated xorshift64*
// stream seeded with rng_seed.
RegistrationPlan plan_registrations(const DomainList& domains,
                                    const WindowConfig& cfg, uint64_t rng_seed);

// Windows visited uniformly at random without replacement (Fisher-Yates
// order over the rng_seed stream); domains inside a window polled in
// ascending index order. First hit wins; exhausting all windows means
// exactly alpha polls and no domain.
LookupResult enhanced_lookup(const DomainList& domains, const WindowConfig& cfg,
                             const std::function<bool(const std::string&)>& resolve,
                             uint64_t rng_seed);

// Worst-case windowed budget (gamma accesses) vs the non-windowed average
// linear scan (alpha / 2 accesses).
LookupCost lookup_cost(const WindowConfig& cfg, uint64_t bytes_per_access,
                       double seconds_per_access, CostMode mode);

struct CurveData {
    std::vector<std::pair<uint64_t, uint64_t>> points;  // (beta, gamma)
    std::vector<uint64_t> skipped;                      // non-divisor betas
};

CurveData curve_data(uint64_t alpha, const std::vector<uint64_t>& betas);

}  // namespace fluxsim::dga
