#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fluxsim/types.hpp"

namespace fluxsim {

// One registry row: the record a slot of the snapshot tree holds.
struct RegistryRecord {
    std::string device_id;
    Address ip;
    SimTime registered_at = 0;

    friend bool operator==(const RegistryRecord&, const RegistryRecord&) = default;
};

// Persistent (fully multi-version) segment tree. Updates copy only the
// root-to-leaf path; every version stays readable forever. Version 0 is
// the empty tree. Slots past the current capacity grow the tree by
// doubling: the old root becomes the left child of a wider root, which
// counts as its own version.
class SnapshotTree {
public:
    using Version = uint64_t;

    explicit SnapshotTree(uint64_t capacity);  // rounded up to a power of two

    Version update(Version version, uint64_t slot, RegistryRecord record);

    std::optional<RegistryRecord> get(Version version, uint64_t slot) const;

    // Occupied slots in [lo, hi] at that version, O(log capacity).
    uint64_t range_count(Version version, uint64_t lo, uint64_t hi) const;

    // All occupied slots at that version.
    std::map<uint64_t, RegistryRecord> materialize(Version version) const;

    Version latest_version() const { return roots_.size() - 1; }
    uint64_t version_count() const { return roots_.size(); }
    uint64_t capacity(Version version) const;
    uint64_t capacity() const { return caps_.back(); }

    // Diagnostics for the structural-sharing bound.
    uint64_t nodes_allocated_by_last_update() const { return last_alloc_; }
    uint64_t total_nodes() const { return pool_.size(); }

    // Versioned update log as length-prefixed binary frames; replaying it
    // reproduces the full version DAG.
    void dump_log(const std::string& path) const;
    static SnapshotTree replay_log(const std::string& path);

private:
    struct Node {
        int32_t left = -1;
        int32_t right = -1;
        uint64_t count = 0;
        std::optional<RegistryRecord> payload;
    };

    struct LogEntry {
        Version parent;
        bool grow;  // capacity doubling step (slot/record unused)
        uint64_t slot;
        RegistryRecord record;
    };

    void check_version(Version v) const;
    int32_t alloc(const Node& n);
    int32_t set_path(int32_t node, uint64_t lo, uint64_t hi, uint64_t slot,
                     const RegistryRecord& record);
    uint64_t count_in(int32_t node, uint64_t lo, uint64_t hi, uint64_t qlo,
                      uint64_t qhi) const;
    void collect(int32_t node, uint64_t lo, uint64_t hi,
                 std::map<uint64_t, RegistryRecord>& out) const;

    std::vector<Node> pool_;
    std::vector<int32_t> roots_;   // per version
    std::vector<uint64_t> caps_;   // per version
    std::vector<LogEntry> log_;    // entry i produced version i+1
    uint64_t last_alloc_ = 0;
};

}  // namespace fluxsim
