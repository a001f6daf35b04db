#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "fluxsim.h"

namespace fs = std::filesystem;

TEST_CASE("domain generation through the C surface") {
    const char* tlds[] = {"com", "net", "org"};
    fluxsim_domains* d = nullptr;
    REQUIRE(fluxsim_generate_domains("s1", "2021-01-01", 32, tlds, 3, nullptr, 0,
                                     &d) == FLUXSIM_OK);
    REQUIRE(d != nullptr);
    CHECK(fluxsim_domains_count(d) == 32);
    CHECK(std::strcmp(fluxsim_domains_get(d, 0), "hfswxcmxxmnajt.org") == 0);
    CHECK(fluxsim_domains_get(d, 32) == nullptr);
    fluxsim_domains_free(d);
}

TEST_CASE("bad configuration surfaces as the config status code") {
    fluxsim_domains* d = nullptr;
    CHECK(fluxsim_generate_domains("s1", "not-a-date", 5, nullptr, 0, nullptr, 0,
                                   &d) == FLUXSIM_ERR_CONFIG);
    CHECK(d == nullptr);
    CHECK(std::strlen(fluxsim_last_error()) > 0);
}

TEST_CASE("window cost through the C surface") {
    fluxsim_lookup_cost cost{};
    REQUIRE(fluxsim_window_cost(10000, 100, 500, 0.2, 0, &cost) == FLUXSIM_OK);
    CHECK(cost.accesses == 100);
    CHECK(cost.bytes == 50000);
    CHECK(cost.kilobytes == 49);
    CHECK(cost.seconds == doctest::Approx(20.0));
    REQUIRE(fluxsim_window_cost(10000, 100, 500, 0.2, 1, &cost) == FLUXSIM_OK);
    CHECK(cost.accesses == 5000);
    CHECK(cost.kilobytes == 2441);
    CHECK(fluxsim_window_cost(10000, 3, 500, 0.2, 0, &cost) == FLUXSIM_ERR_CONFIG);
}

TEST_CASE("curve data keeps divisors and reports skips") {
    uint64_t betas[] = {2, 3, 4};
    fluxsim_curve* c = nullptr;
    REQUIRE(fluxsim_curve_data(10000, betas, 3, &c) == FLUXSIM_OK);
    CHECK(fluxsim_curve_count(c) == 2);
    uint64_t b = 0, g = 0;
    REQUIRE(fluxsim_curve_get(c, 0, &b, &g) == FLUXSIM_OK);
    CHECK(b == 2);
    CHECK(g == 5000);
    CHECK(fluxsim_curve_skipped_count(c) == 1);
    CHECK(fluxsim_curve_skipped_get(c, 0) == 3);
    fluxsim_curve_free(c);
}

TEST_CASE("run and report round-trip through the C surface") {
    fs::path dir = fs::temp_directory_path() / "fluxsim_capi_run";
    fs::remove_all(dir);

    // a tiny scenario keeps this test quick
    fs::path scenario = fs::temp_directory_path() / "fluxsim_capi_scenario.json";
    {
        std::ofstream out(scenario);
        out << R"({
  "master_seed": 7,
  "duration_ms": 120000,
  "dga": {"alpha": 100, "beta": 10},
  "servers": {"count": 1},
  "bots": [{"profile": "default", "count": 2,
             "jitter": {"mode": "fixed", "period_ms": 30000}}]
})";
    }
    REQUIRE(fluxsim_run_scenario(scenario.string().c_str(),
                                 dir.string().c_str()) == FLUXSIM_OK);
    for (const char* name :
         {"events.jsonl", "metrics.csv", "report.csv", "summary.md",
          "scenario.json"})
        CHECK(fs::exists(dir / name));

    auto read = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    };
    std::string before = read(dir / "report.csv");
    REQUIRE(fluxsim_render_report(dir.string().c_str()) == FLUXSIM_OK);
    CHECK(read(dir / "report.csv") == before);  // re-render is byte identical

    CHECK(fluxsim_run_scenario("/missing/file.json", dir.string().c_str()) ==
          FLUXSIM_ERR_CONFIG);
    fs::remove_all(dir);
    fs::remove(scenario);
}

TEST_CASE("version string is present") {
    CHECK(std::strlen(fluxsim_version()) > 0);
}
