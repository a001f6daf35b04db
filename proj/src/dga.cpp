#include "fluxsim/dga.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fluxsim/prng.hpp"

namespace fluxsim::dga {

namespace {

bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

unsigned days_in_month(int y, unsigned m) {
    static constexpr unsigned kDays[] = {31, 28, 31, 30, 31, 30,
                                         31, 31, 30, 31, 30, 31};
    if (m == 2 && leap(y)) return 29;
    return kDays[m - 1];
}

char digit_at(const std::string& s, size_t i) {
    char c = s[i];
    if (c < '0' || c > '9') throw ConfigError("bad date: " + s);
    return c;
}

}  // namespace

void validate_dictionary(const std::vector<std::string>& words) {
    if (words.empty()) throw ConfigError("dictionary must not be empty");
    for (const auto& w : words) {
        if (w.empty() || w.size() > 15)
            throw ConfigError("dictionary word length must be 1..15: " + w);
        for (char c : w)
            if (c < 'a' || c > 'z')
                throw ConfigError("dictionary words must be lowercase a-z: " + w);
    }
}

Date parse_date(const std::string& iso) {
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-')
        throw ConfigError("bad date, expected YYYY-MM-DD: " + iso);
    for (size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) digit_at(iso, i);
    Date d;
    d.year = std::stoi(iso.substr(0, 4));
    d.month = static_cast<unsigned>(std::stoi(iso.substr(5, 2)));
    d.day = static_cast<unsigned>(std::stoi(iso.substr(8, 2)));
    if (d.month < 1 || d.month > 12 || d.day < 1 ||
        d.day > days_in_month(d.year, d.month))
        throw ConfigError("bad calendar date: " + iso);
    return d;
}

std::string format_date(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", d.year, d.month, d.day);
    return buf;
}

WindowConfig WindowConfig::make(uint64_t alpha, uint64_t beta) {
    if (beta < 1) throw ConfigError("beta must be >= 1");
    if (alpha < beta) throw ConfigError("alpha must be >= beta");
    if (alpha % beta != 0)
        throw ConfigError("alpha must be divisible by beta (alpha=" +
                          std::to_string(alpha) + ", beta=" + std::to_string(beta) + ")");
    return WindowConfig{alpha, beta, alpha / beta};
}

DomainList generate_domains(const DgaSeed& seed, uint64_t alpha,
                            std::vector<std::string> tlds,
                            std::optional<std::vector<std::string>> dictionary) {
    if (alpha == 0) throw ConfigError("alpha must be >= 1");
    if (tlds.empty()) throw ConfigError("at least one TLD is required");
    if (dictionary) validate_dictionary(*dictionary);

    Xorshift64Star rng(fnv1a64(seed.seed_string + "|" + format_date(seed.date)));

    DomainList out;
    out.seed = seed;
    out.tlds = tlds;
    out.dictionary = dictionary;
    out.domains.reserve(alpha);

    std::string label;
    for (uint64_t i = 0; i < alpha; ++i) {
        label.clear();
        if (!dictionary) {
            uint64_t len = 8 + rng.next_below(9);
            for (uint64_t k = 0; k < len; ++k)
                label.push_back(static_cast<char>('a' + rng.next_below(26)));
        } else {
            const auto& dict = *dictionary;
            label = dict[rng.next_below(dict.size())];
            label.push_back('-');
            label += dict[rng.next_below(dict.size())];
        }
        out.domains.push_back(label + "." + tlds[rng.next_below(tlds.size())]);
    }
    return out;
}

RegistrationPlan plan_registrations(const DomainList& domains,
                                    const WindowConfig& cfg, uint64_t rng_seed) {
    if (cfg.alpha != domains.domains.size())
        throw ConfigError("window config alpha does not match domain list size");
    Xorshift64Star rng(rng_seed);
    RegistrationPlan plan;
    plan.entries.reserve(cfg.beta);
    for (uint64_t w = 0; w < cfg.beta; ++w)
        plan.entries.push_back({w, w * cfg.gamma + rng.next_below(cfg.gamma)});
    return plan;
}

LookupResult enhanced_lookup(const DomainList& domains, const WindowConfig& cfg,
                             const std::function<bool(const std::string&)>& resolve,
                             uint64_t rng_seed) {
    if (cfg.alpha != domains.domains.size())
        throw ConfigError("window config alpha does not match domain list size");

    Xorshift64Star rng(rng_seed);
    std::vector<uint64_t> order(cfg.beta);
    std::iota(order.begin(), order.end(), 0);
    for (uint64_t i = cfg.beta; i > 1; --i)
        std::swap(order[i - 1], order[rng.next_below(i)]);

    LookupResult res;
    for (uint64_t w : order) {
        ++res.windows_tried;
        for (uint64_t j = 0; j < cfg.gamma; ++j) {
            const std::string& d = domains.domains[w * cfg.gamma + j];
            ++res.polls;
            if (resolve(d)) {
                res.domain = d;
                return res;
            }
        }
    }
    return res;  // RegDomainFailed: alpha polls, no domain
}

LookupCost lookup_cost(const WindowConfig& cfg, uint64_t bytes_per_access,
                       double seconds_per_access, CostMode mode) {
    if (bytes_per_access == 0 || seconds_per_access <= 0.0)
        throw ConfigError("per-access rates must be positive");
    LookupCost c;
    c.accesses = mode == CostMode::Windowed ? cfg.gamma : cfg.alpha / 2;
    c.bytes = c.accesses * bytes_per_access;
    c.kilobytes = static_cast<uint64_t>(
        std::llround(static_cast<double>(c.bytes) / 1024.0));
    c.seconds = static_cast<double>(c.accesses) * seconds_per_access;
    return c;
}

CurveData curve_data(uint64_t alpha, const std::vector<uint64_t>& betas) {
    CurveData out;
    for (uint64_t b : betas) {
        if (b == 0 || alpha % b != 0)
            out.skipped.push_back(b);
        else
            out.points.emplace_back(b, alpha / b);
    }
    return out;
}

}  // namespace fluxsim::dga
