#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <queue>
#include <string>
#include <variant>
#include <vector>

#include "fluxsim/prng.hpp"
#include "fluxsim/protocol.hpp"
#include "fluxsim/registrar.hpp"
#include "fluxsim/types.hpp"

namespace fluxsim::sim {

enum class NodeKind { Bot, Server, Botmaster };

struct NetModel {
    SimTime latency_ms = 100;
    uint64_t header_overhead_bytes = 40;

    uint64_t message_bytes(const proto::Message& m) const {
        return proto::encode(m).size() + header_overhead_bytes;
    }
};

// --- run journal ------------------------------------------------------

struct TraceRow {
    SimTime t;
    std::string src;
    std::string dst;
    uint64_t bytes;
    std::string dir;  // "up" (bot outbound), "down" (to a bot), "lateral"
    std::string tag;
    bool ok;  // false = dropped (down or unknown destination)
};

struct NxRow {
    SimTime t;
    std::string querier;
    std::string domain;
};

struct FaultRow {
    SimTime t;
    std::string kind;
    std::string node;
    std::string detail;
};

struct RegistryRow {
    SimTime t;
    std::string op;  // "add" | "update_ip"
    uint64_t bot_id;
    std::string device;
    Address ip;
    uint64_t version;  // snapshot version after the mutation
};

struct RestoreRow {
    SimTime t;
    uint64_t version;
};

struct WarnRow {
    SimTime t;
    std::string msg;
};

using JournalRecord =
    std::variant<TraceRow, NxRow, FaultRow, RegistryRow, RestoreRow, WarnRow>;

std::vector<TraceRow> extract_trace(const std::vector<JournalRecord>& journal);

// --- faults -----------------------------------------------------------

struct ServerTakedown {
    Address address;
    SimTime at;
};
struct BotmasterCompromise {
    SimTime at;
};
struct IpReassign {
    std::string device;
    SimTime at;
    SimTime period;  // 0 = one-shot
};
using FaultSpec = std::variant<ServerTakedown, BotmasterCompromise, IpReassign>;

// --- nodes ------------------------------------------------------------

class Sim;

struct Delivery {
    const proto::Message& msg;
    const std::string& from;
    Address from_addr;  // sender address at send time
};

class Node {
public:
    Node(std::string name, NodeKind kind) : name_(std::move(name)), kind_(kind) {}
    virtual ~Node() = default;

    virtual void on_deliver(Sim& sim, const Delivery& d) = 0;
    virtual void on_timer(Sim& sim, uint64_t tag) { (void)sim, (void)tag; }
    virtual void on_address_change(Sim& sim, Address fresh) {
        (void)sim, (void)fresh;
    }
    virtual void on_restore(Sim& sim) { (void)sim; }

    const std::string& name() const { return name_; }
    NodeKind kind() const { return kind_; }
    Address address() const { return address_; }
    bool up() const { return up_; }

private:
    friend class Sim;
    std::string name_;
    NodeKind kind_;
    Address address_{};
    bool up_ = true;
};

// --- kernel -----------------------------------------------------------

struct RunSummary {
    uint64_t events_processed = 0;
    SimTime clock = 0;
};

// Strictly single-threaded deterministic event loop. Identical
// (scenario, master seed) means identical event order, journal and
// artifacts, byte for byte.
class Sim {
public:
    explicit Sim(uint64_t master_seed, NetModel net = {},
                 SimTime restore_delay_ms = 5000);

    SimTime now() const { return now_; }
    uint64_t master_seed() const { return master_seed_; }
    const NetModel& net() const { return net_; }
    Registrar& registrar() { return registrar_; }
    const Registrar& registrar() const { return registrar_; }

    Node& add_node(std::unique_ptr<Node> node, uint8_t address_pool);
    Node* find(const std::string& name);
    Node* holder_of(Address a);
    bool node_up(const std::string& name);
    const std::vector<std::unique_ptr<Node>>& nodes() const { return nodes_; }

    Address alloc_address(uint8_t pool);

    // Records the trace row and schedules delivery after the fixed
    // latency; down or unmapped destinations drop with a flagged row.
    void send(Node& from, Address to, proto::Message msg);

    void schedule_timer(Node& node, SimTime at, uint64_t tag);
    void inject_fault(const FaultSpec& spec);

    RunSummary run_until(SimTime t_end);

    // Resolution with journal-side NXDOMAIN accounting.
    std::optional<Address> resolve(const std::string& domain,
                                   const std::string& querier);

    Xorshift64Star stream(std::string_view owner, std::string_view purpose) const {
        return derive_stream(master_seed_, owner, purpose);
    }

    const std::vector<JournalRecord>& journal() const { return journal_; }
    void log_registry(const std::string& op, uint64_t bot_id,
                      const std::string& device, Address ip, uint64_t version);
    void log_restore(uint64_t version);
    void log_warn(const std::string& msg);

    void mark_down(Node& node);
    void mark_up(Node& node);
    // IpReassign uses this; also available to recovery flows.
    void reassign_address(Node& node, Address fresh);

private:
    struct DeliverEv {
        size_t to;
        proto::Message msg;
        std::string from_name;
        Address from_addr;
    };
    struct TimerEv {
        size_t node;
        uint64_t tag;
    };
    struct FaultEv {
        FaultSpec spec;
    };
    struct RestoreEv {
        size_t node;
    };
    using EventKind = std::variant<DeliverEv, TimerEv, FaultEv, RestoreEv>;

    struct Event {
        SimTime fire_at;
        uint64_t seq;
        EventKind kind;
    };
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            if (a.fire_at != b.fire_at) return a.fire_at > b.fire_at;
            return a.seq > b.seq;
        }
    };

    void push(SimTime at, EventKind kind);
    void dispatch(Event& ev);
    void apply_fault(const FaultSpec& spec);

    SimTime now_ = 0;
    uint64_t next_seq_ = 0;
    uint64_t master_seed_;
    NetModel net_;
    SimTime restore_delay_ms_;
    Registrar registrar_;
    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    std::vector<std::unique_ptr<Node>> nodes_;
    std::map<std::string, size_t> by_name_;
    std::map<uint32_t, size_t> by_addr_;
    std::map<uint8_t, uint16_t> addr_counters_;
    std::vector<JournalRecord> journal_;
};

}  // namespace fluxsim::sim
