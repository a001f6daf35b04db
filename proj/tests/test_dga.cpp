#include <fstream>
#include <set>

#include "doctest.h"
#include "fluxsim/dga.hpp"
#include "fluxsim/prng.hpp"

using namespace fluxsim;
using namespace fluxsim::dga;

namespace {

// Independent straight-line re-derivation of the generator, kept free of
// any code shared with the implementation.
std::vector<std::string> oracle_generate(const std::string& seed_string,
                                         const std::string& date,
                                         uint64_t alpha,
                                         const std::vector<std::string>& tlds) {
    uint64_t h = 14695981039346656037ULL;
    std::string input = seed_string + "|" + date;
    for (unsigned char c : input) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    uint64_t x = h != 0 ? h : 14695981039346656037ULL;
    auto next = [&x]() {
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        return x * 2685821657736338717ULL;
    };
    std::vector<std::string> out;
    for (uint64_t i = 0; i < alpha; ++i) {
        uint64_t len = 8 + next() % 9;
        std::string label;
        for (uint64_t k = 0; k < len; ++k)
            label.push_back(char('a' + next() % 26));
        out.push_back(label + "." + tlds[next() % tlds.size()]);
    }
    return out;
}

const std::vector<std::string> kTlds = {"com", "net", "org"};
const DgaSeed kSeed{"s1", Date{2021, 1, 1}};

}  // namespace

TEST_CASE("window config validates the alpha/beta relation") {
    auto cfg = WindowConfig::make(10000, 100);
    CHECK(cfg.gamma == 100);
    CHECK(cfg.alpha == cfg.beta * cfg.gamma);
    CHECK_THROWS_AS(WindowConfig::make(10000, 3), ConfigError);
    CHECK_THROWS_AS(WindowConfig::make(10, 0), ConfigError);
    CHECK_THROWS_AS(WindowConfig::make(5, 10), ConfigError);
}

TEST_CASE("generate_domains is deterministic and matches the frozen oracle") {
    auto a = generate_domains(kSeed, 10000, kTlds);
    auto b = generate_domains(kSeed, 10000, kTlds);
    CHECK(a.domains == b.domains);

    // First five, frozen from the one-shot oracle run.
    CHECK(a.domains[0] == "hfswxcmxxmnajt.org");
    CHECK(a.domains[1] == "fnzkcxtv.com");
    CHECK(a.domains[2] == "pqsklwsul.net");
    CHECK(a.domains[3] == "xvcfxzbmah.net");
    CHECK(a.domains[4] == "rbmjtgguwd.org");

    auto expected = oracle_generate("s1", "2021-01-01", 64, kTlds);
    for (size_t i = 0; i < expected.size(); ++i)
        CHECK(a.domains[i] == expected[i]);
}

TEST_CASE("generate_domains matches the committed golden vector") {
    std::ifstream golden(std::string(FLUXSIM_DATA_DIR) + "/dga_golden.txt");
    REQUIRE(golden.good());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(golden, line)) lines.push_back(line);
    REQUIRE(lines.size() == 32);

    auto list = generate_domains(kSeed, 32, kTlds);
    CHECK(list.domains == lines);
}

TEST_CASE("a one-day date change perturbs position 0") {
    auto a = generate_domains(kSeed, 5, kTlds);
    auto b = generate_domains(DgaSeed{"s1", Date{2021, 1, 2}}, 5, kTlds);
    CHECK(a.domains[0] != b.domains[0]);
    CHECK(b.domains[0] == "weapstrzyveu.org");  // frozen oracle value
}

TEST_CASE("every generated domain is well formed") {
    auto list = generate_domains(kSeed, 2000, kTlds);
    for (const auto& d : list.domains) {
        size_t dot = d.rfind('.');
        REQUIRE(dot != std::string::npos);
        std::string label = d.substr(0, dot);
        std::string tld = d.substr(dot + 1);
        CHECK(label.size() >= 2);
        CHECK(label.size() <= 32);
        for (char c : label) CHECK(((c >= 'a' && c <= 'z') || c == '-'));
        CHECK(std::set<std::string>(kTlds.begin(), kTlds.end()).count(tld));
    }
}

TEST_CASE("dictionary mode builds word-word labels") {
    std::vector<std::string> words{"cloud", "mail", "news", "shop", "blog", "data"};
    auto list = generate_domains(kSeed, 3, kTlds, words);
    // frozen from the oracle run
    CHECK(list.domains[0] == "cloud-shop.com");
    CHECK(list.domains[1] == "blog-news.org");
    CHECK(list.domains[2] == "news-cloud.com");

    CHECK_THROWS_AS(
        generate_domains(kSeed, 3, kTlds, std::vector<std::string>{}),
        ConfigError);
    CHECK_THROWS_AS(
        generate_domains(kSeed, 3, kTlds, std::vector<std::string>{"BAD"}),
        ConfigError);
}

TEST_CASE("generation rejects bad configuration") {
    CHECK_THROWS_AS(generate_domains(kSeed, 0, kTlds), ConfigError);
    CHECK_THROWS_AS(generate_domains(kSeed, 10, {}), ConfigError);
}

TEST_CASE("date parsing is strict") {
    CHECK(parse_date("2021-01-01") == Date{2021, 1, 1});
    CHECK(format_date(Date{2021, 1, 1}) == "2021-01-01");
    CHECK_THROWS_AS(parse_date("2021-13-01"), ConfigError);
    CHECK_THROWS_AS(parse_date("2021-02-29"), ConfigError);
    CHECK(parse_date("2020-02-29") == Date{2020, 2, 29});  // leap year
    CHECK_THROWS_AS(parse_date("2021/01/01"), ConfigError);
    CHECK_THROWS_AS(parse_date("garbage"), ConfigError);
}

TEST_CASE("plan_registrations picks one in-window index per window") {
    auto list = generate_domains(kSeed, 20, kTlds);
    auto cfg = WindowConfig::make(20, 5);
    auto plan = plan_registrations(list, cfg, 7);
    REQUIRE(plan.entries.size() == 5);
    // frozen from the oracle: seed 7, beta=5, gamma=4
    std::vector<uint64_t> expected{2, 6, 10, 14, 17};
    for (size_t i = 0; i < plan.entries.size(); ++i) {
        CHECK(plan.entries[i].window_index == i);
        CHECK(plan.entries[i].domain_index == expected[i]);
        CHECK(plan.entries[i].domain_index >= i * cfg.gamma);
        CHECK(plan.entries[i].domain_index < (i + 1) * cfg.gamma);
    }
}

TEST_CASE("plan with gamma=1 selects every domain in order") {
    auto list = generate_domains(kSeed, 8, kTlds);
    auto cfg = WindowConfig::make(8, 8);
    auto plan = plan_registrations(list, cfg, 123);
    for (size_t i = 0; i < 8; ++i) CHECK(plan.entries[i].domain_index == i);
}

TEST_CASE("window containment holds for random plans") {
    auto list = generate_domains(kSeed, 600, kTlds);
    Xorshift64Star rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        uint64_t beta = 1 + rng.next_below(20);
        while (600 % beta) beta = 1 + rng.next_below(20);
        auto cfg = WindowConfig::make(600, beta);
        auto plan = plan_registrations(list, cfg, rng.next());
        REQUIRE(plan.entries.size() == beta);
        for (const auto& e : plan.entries) {
            CHECK(e.domain_index >= e.window_index * cfg.gamma);
            CHECK(e.domain_index < (e.window_index + 1) * cfg.gamma);
        }
    }
}

TEST_CASE("enhanced_lookup finds a registered domain and meters polls") {
    auto list = generate_domains(kSeed, 100, kTlds);
    auto cfg = WindowConfig::make(100, 10);
    auto plan = plan_registrations(list, cfg, 5);
    std::set<std::string> registered;
    for (const auto& e : plan.entries) registered.insert(list.domains[e.domain_index]);

    uint64_t polls = 0;
    auto res = enhanced_lookup(list, cfg,
                               [&](const std::string& d) {
                                   ++polls;
                                   return registered.count(d) != 0;
                               },
                               42);
    REQUIRE(res.domain.has_value());
    CHECK(registered.count(*res.domain) == 1);
    CHECK(res.polls == polls);
    CHECK(res.polls <= cfg.gamma);  // every window holds one
    CHECK(res.windows_tried == 1);
}

TEST_CASE("enhanced_lookup returns NotFound after exactly alpha polls") {
    auto list = generate_domains(kSeed, 60, kTlds);
    auto cfg = WindowConfig::make(60, 6);
    uint64_t polls = 0;
    auto res = enhanced_lookup(list, cfg,
                               [&](const std::string&) {
                                   ++polls;
                                   return false;
                               },
                               9);
    CHECK_FALSE(res.domain.has_value());
    CHECK(res.polls == 60);
    CHECK(polls == 60);
    CHECK(res.windows_tried == 6);
}

TEST_CASE("first-window registration bounds polls by gamma") {
    auto list = generate_domains(kSeed, 100, kTlds);
    auto cfg = WindowConfig::make(100, 10);
    std::set<std::string> registered;
    for (uint64_t w = 0; w < cfg.beta; ++w)
        registered.insert(list.domains[w * cfg.gamma]);  // index 0 of each window
    for (uint64_t seed = 0; seed < 20; ++seed) {
        auto res = enhanced_lookup(list, cfg,
                                   [&](const std::string& d) {
                                       return registered.count(d) != 0;
                                   },
                                   seed);
        REQUIRE(res.domain.has_value());
        CHECK(res.polls == 1);  // first index of the first window tried
    }
}

TEST_CASE("lookup_cost reproduces the alpha=10000 beta=100 arithmetic") {
    auto cfg = WindowConfig::make(10000, 100);
    auto win = lookup_cost(cfg, 500, 0.2, CostMode::Windowed);
    CHECK(win.accesses == 100);
    CHECK(win.bytes == 50000);
    CHECK(win.kilobytes == 49);
    CHECK(win.seconds == doctest::Approx(20.0));

    auto base = lookup_cost(cfg, 500, 0.2, CostMode::BaselineAverage);
    CHECK(base.accesses == 5000);
    CHECK(base.bytes == 2500000);
    CHECK(base.kilobytes == 2441);
    CHECK(base.seconds == doctest::Approx(1000.0));
}

TEST_CASE("windowed cost with beta=alpha is a single access") {
    auto cfg = WindowConfig::make(64, 64);
    auto c = lookup_cost(cfg, 500, 0.2, CostMode::Windowed);
    CHECK(c.accesses == 1);
}

TEST_CASE("cost model consistency: gamma x beta = alpha") {
    for (uint64_t beta : {1ull, 2ull, 10ull, 100ull, 10000ull}) {
        auto cfg = WindowConfig::make(10000, beta);
        auto c = lookup_cost(cfg, 500, 0.2, CostMode::Windowed);
        CHECK(c.accesses * beta == 10000);
    }
}

TEST_CASE("curve_data keeps divisors and skips the rest with a record") {
    auto curve = curve_data(10000, {100});
    REQUIRE(curve.points.size() == 1);
    CHECK(curve.points[0] == std::pair<uint64_t, uint64_t>{100, 100});

    curve = curve_data(10000, {1});
    CHECK(curve.points[0] == std::pair<uint64_t, uint64_t>{1, 10000});

    curve = curve_data(10000, {2, 4, 5});
    REQUIRE(curve.points.size() == 3);
    CHECK(curve.points[0] == std::pair<uint64_t, uint64_t>{2, 5000});
    CHECK(curve.points[1] == std::pair<uint64_t, uint64_t>{4, 2500});
    CHECK(curve.points[2] == std::pair<uint64_t, uint64_t>{5, 2000});

    curve = curve_data(10000, {3, 100, 7});
    CHECK(curve.points.size() == 1);
    CHECK(curve.skipped == std::vector<uint64_t>{3, 7});
}
