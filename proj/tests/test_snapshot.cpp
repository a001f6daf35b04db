#include <filesystem>

#include "doctest.h"
#include "fluxsim/prng.hpp"
#include "fluxsim/snapshot.hpp"

using namespace fluxsim;

namespace {

RegistryRecord rec(uint64_t n) {
    return RegistryRecord{"dev" + std::to_string(n),
                          Address{static_cast<uint32_t>(n * 7 + 1)}, n * 100};
}

}  // namespace

TEST_CASE("a fresh tree is empty at version 0") {
    SnapshotTree t(8);
    CHECK_FALSE(t.get(0, 5).has_value());
    CHECK(t.range_count(0, 0, 7) == 0);
    CHECK(t.materialize(0).empty());
}

TEST_CASE("capacity rounds up to a power of two") {
    SnapshotTree t(5);
    CHECK(t.capacity() == 8);
    CHECK(SnapshotTree(1).capacity() == 1);
    CHECK(SnapshotTree(1024).capacity() == 1024);
    CHECK_THROWS_AS(SnapshotTree(0), ConfigError);
}

TEST_CASE("updates create new versions and never disturb old ones") {
    SnapshotTree t(8);
    auto v1 = t.update(0, 3, rec(1));
    CHECK(v1 == 1);
    CHECK(t.get(v1, 3) == rec(1));
    CHECK_FALSE(t.get(0, 3).has_value());

    auto v2 = t.update(v1, 3, rec(2));
    CHECK(t.get(v2, 3) == rec(2));
    CHECK(t.get(v1, 3) == rec(1));
}

TEST_CASE("a chain of 100 updates yields 101 coherent versions") {
    SnapshotTree t(128);
    SnapshotTree::Version v = 0;
    for (uint64_t i = 0; i < 100; ++i) v = t.update(v, i, rec(i));
    CHECK(t.version_count() == 101);
    for (uint64_t ver = 0; ver <= 100; ++ver)
        CHECK(t.range_count(ver, 0, 127) == ver);
    CHECK(t.materialize(100).size() == 100);
}

TEST_CASE("branching from one parent keeps both children readable") {
    SnapshotTree t(4);
    auto v1 = t.update(0, 1, rec(1));
    auto v2a = t.update(v1, 0, rec(10));
    auto v2b = t.update(v1, 0, rec(20));
    CHECK(t.get(v2a, 0) == rec(10));
    CHECK(t.get(v2b, 0) == rec(20));
    CHECK(t.get(v2a, 1) == rec(1));
    CHECK(t.get(v2b, 1) == rec(1));
}

TEST_CASE("unknown versions and bad slots raise the dedicated errors") {
    SnapshotTree t(8);
    CHECK_THROWS_AS(t.get(3, 0), UnknownVersion);
    CHECK_THROWS_AS(t.update(9, 0, rec(0)), UnknownVersion);
    CHECK_THROWS_AS(t.get(0, 8), OutOfRange);
    CHECK_THROWS_AS(t.range_count(0, 5, 3), OutOfRange);
    CHECK_THROWS_AS(t.range_count(0, 0, 8), OutOfRange);
    CHECK_THROWS_AS(t.materialize(1), UnknownVersion);
}

TEST_CASE("per-update allocation stays within log2(capacity)+1") {
    SnapshotTree t(1024);
    Xorshift64Star rng(77);
    SnapshotTree::Version v = 0;
    for (int i = 0; i < 500; ++i) {
        v = t.update(v, rng.next_below(1024), rec(i));
        CHECK(t.nodes_allocated_by_last_update() <= 11);  // log2(1024)+1
    }
}

TEST_CASE("full persistence against a flat-array-per-version oracle") {
    const uint64_t cap = 64;
    SnapshotTree t(cap);
    std::vector<std::vector<std::optional<RegistryRecord>>> oracle;
    oracle.emplace_back(cap);  // version 0

    Xorshift64Star rng(20240812);
    for (int step = 0; step < 1000; ++step) {
        uint64_t action = rng.next_below(4);
        auto version = rng.next_below(oracle.size());
        if (action == 0) {
            uint64_t slot = rng.next_below(cap);
            RegistryRecord r = rec(rng.next_below(1000));
            auto v = t.update(version, slot, r);
            CHECK(v == oracle.size());
            auto next = oracle[version];
            next[slot] = r;
            oracle.push_back(std::move(next));
        } else if (action == 1) {
            uint64_t slot = rng.next_below(cap);
            auto got = t.get(version, slot);
            auto want = oracle[version][slot];
            CHECK(got == want);
        } else if (action == 2) {
            uint64_t lo = rng.next_below(cap);
            uint64_t hi = lo + rng.next_below(cap - lo);
            uint64_t want = 0;
            for (uint64_t i = lo; i <= hi; ++i)
                if (oracle[version][i]) ++want;
            CHECK(t.range_count(version, lo, hi) == want);
        } else {
            auto mat = t.materialize(version);
            uint64_t want = 0;
            for (uint64_t i = 0; i < cap; ++i) {
                if (!oracle[version][i]) continue;
                ++want;
                REQUIRE(mat.count(i) == 1);
                CHECK(mat.at(i) == *oracle[version][i]);
            }
            CHECK(mat.size() == want);
        }
    }
}

TEST_CASE("updating past capacity grows by doubling and keeps history") {
    SnapshotTree t(4);
    auto v1 = t.update(0, 2, rec(1));
    auto v_grown = t.update(v1, 9, rec(2));  // needs capacity 16
    CHECK(t.capacity(v_grown) == 16);
    CHECK(t.capacity(v1) == 4);
    CHECK(t.get(v_grown, 2) == rec(1));
    CHECK(t.get(v_grown, 9) == rec(2));
    CHECK_THROWS_AS(t.get(v1, 9), OutOfRange);
    // growth inserted rebuild versions between v1 and v_grown
    CHECK(t.version_count() == 5);  // 0, v1, two growth steps, v_grown
}

TEST_CASE("dump and replay rebuild an identical version DAG") {
    namespace fs = std::filesystem;
    SnapshotTree t(8);
    Xorshift64Star rng(11);
    std::vector<SnapshotTree::Version> versions{0};
    for (int i = 0; i < 60; ++i) {
        auto parent = versions[rng.next_below(versions.size())];
        versions.push_back(t.update(parent, rng.next_below(20), rec(i)));
    }

    fs::path path = fs::temp_directory_path() / "fluxsim_snapshot_test.bin";
    t.dump_log(path.string());
    auto replayed = SnapshotTree::replay_log(path.string());
    fs::remove(path);

    REQUIRE(replayed.version_count() == t.version_count());
    for (uint64_t v = 0; v < t.version_count(); ++v) {
        CHECK(replayed.capacity(v) == t.capacity(v));
        CHECK(replayed.materialize(v) == t.materialize(v));
    }
}
