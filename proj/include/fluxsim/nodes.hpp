#pragma once

#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "fluxsim/dga.hpp"
#include "fluxsim/simkernel.hpp"
#include "fluxsim/snapshot.hpp"

namespace fluxsim::nodes {

enum class PermissionModel { AutoGrant, NotifyDeny };
enum class Sensor { Camera, Mic, Gps };

struct DeviceProfile {
    std::string name = "default";
    double battery_capacity_mah = 3100.0;
    double battery_level_mah = 3100.0;
    double baseline_drain_mah_per_h = 59.1667;
    double bot_drain_mah_per_h = 12.5;
    double battery_threshold = 0.2;  // fraction of capacity
    PermissionModel permission_model = PermissionModel::AutoGrant;
    std::set<Sensor> sensors = {Sensor::Camera, Sensor::Mic, Sensor::Gps};
    uint64_t storage_free_bytes = 4'000'000'000;
};

// Synthetic payload sizes and lossy-compression ratios; defaults are
// configurable per scenario.
struct PayloadModel {
    uint64_t image_bytes = 2'000'000;
    double image_ratio = 0.40;  // JPEG
    uint64_t audio_bytes_per_minute = 1'000'000;
    double audio_ratio = 0.10;  // Opus
    uint64_t gps_bytes = 128;   // text, not compressed
};

enum class CommandStatus { Pending, HalfExecuted, Executed };

const char* to_string(CommandStatus s);

struct CommandRecord {
    proto::CommandKind kind;
    SimTime timestamp;  // publication time; also the dedupe key
    proto::ParamMap params;
    CommandStatus status = CommandStatus::Pending;
    std::optional<std::string> unique_id;
    std::optional<uint64_t> payload_size;
    std::optional<uint64_t> compressed_size;
    bool compressed = false;
    bool failed = false;          // missing sensor or storage
    bool denied_counted = false;  // NOTIFY_DENY counts a record once
    bool upload_in_flight = false;
    SimTime upload_sent_at = 0;
};

struct JitterSpec {
    bool enabled = true;  // false = fixed period
    SimTime min_ms = 60'000;
    SimTime max_ms = 600'000;
    SimTime period_ms = 300'000;
};

enum class BotPhase { Unregistered, Acquiring, Registered };

struct BotConfig {
    std::string device_id;
    DeviceProfile profile;
    PayloadModel payload;
    JitterSpec jitter;
    SimTime hop_interval_ms = 600'000;  // 0 disables hopping
    SimTime start_at_ms = 0;
    SimTime backoff_ms = 60'000;
    SimTime response_timeout_ms = 5'000;
    std::shared_ptr<const dga::DomainList> domains;
    dga::WindowConfig window;
    std::shared_ptr<const proto::SmsTemplateTable> sms_templates;  // optional
};

class BotNode : public sim::Node {
public:
    static constexpr uint64_t kTickTag = 1;

    BotNode(BotConfig cfg, uint64_t master_seed);

    void on_deliver(sim::Sim& s, const sim::Delivery& d) override;
    void on_timer(sim::Sim& s, uint64_t tag) override;
    void on_address_change(sim::Sim& s, Address fresh) override;

    // First tick; the bot reschedules itself afterwards.
    void start(sim::Sim& s);

    struct Metrics {
        uint64_t polls = 0;
        uint64_t nx_misses = 0;
        uint64_t acquisitions = 0;
        uint64_t commands_ok = 0;
        uint64_t commands_denied = 0;
        uint64_t commands_failed = 0;
        uint64_t uploads_sent = 0;
    };

    const Metrics& metrics() const { return metrics_; }
    BotPhase phase() const { return phase_; }
    std::optional<uint64_t> bot_id() const { return bot_id_; }
    std::optional<Address> current_server() const { return current_server_; }
    const std::vector<CommandRecord>& command_db() const { return command_db_; }
    const std::vector<std::pair<SimTime, Address>>& acquisition_log() const {
        return acquisition_log_;
    }
    uint64_t storage_free() const { return storage_free_; }
    double battery_at(SimTime t);  // advances the linear drain model
    const BotConfig& config() const { return cfg_; }

private:
    void schedule_tick(sim::Sim& s, SimTime at);
    SimTime next_gap();
    void update_battery(SimTime now);
    bool battery_gated() const;
    bool attempt_acquire(sim::Sim& s, std::optional<Address> exclude);
    void send_dcr(sim::Sim& s);
    void insert_command(sim::Sim& s, proto::CommandKind kind, SimTime ts,
                        proto::ParamMap params);
    void try_execute(sim::Sim& s, CommandRecord& rec);
    void try_upload(sim::Sim& s, CommandRecord& rec);
    void handle_ack(const std::string& unique_id);

    BotConfig cfg_;
    Xorshift64Star jitter_stream_;
    Xorshift64Star lookup_stream_;
    BotPhase phase_ = BotPhase::Unregistered;
    std::optional<uint64_t> bot_id_;
    std::optional<Address> current_server_;
    SimTime hop_deadline_ = 0;
    SimTime srr_sent_at_ = 0;
    bool awaiting_rgr_ = false;
    bool dcr_in_flight_ = false;
    SimTime dcr_sent_at_ = 0;
    std::vector<CommandRecord> command_db_;
    std::set<SimTime> seen_command_ts_;
    std::vector<std::pair<SimTime, Address>> acquisition_log_;
    Metrics metrics_;
    double battery_mah_;
    SimTime battery_updated_at_ = 0;
    bool gated_ = false;
    uint64_t storage_free_;
};

// One pending command row held by a C&C server (the published bot list
// entry plus the command itself). Exactly one copy exists across servers.
struct DispatchRow {
    uint64_t bot_id;
    Address bot_ip;
    proto::CommandKind kind;
    SimTime timestamp;
    proto::ParamMap params;
};

class ServerNode : public sim::Node {
public:
    ServerNode(std::string name, Address botmaster);

    void on_deliver(sim::Sim& s, const sim::Delivery& d) override;

    void seed(std::vector<DispatchRow> rows, std::map<uint64_t, Address> bot_cache) {
        rows_ = std::move(rows);
        bot_cache_ = std::move(bot_cache);
    }
    const std::vector<DispatchRow>& pending_rows() const { return rows_; }

private:
    void dispatch(sim::Sim& s, const proto::Dcr& dcr);

    Address botmaster_;
    std::vector<DispatchRow> rows_;
    std::map<uint64_t, Address> bot_cache_;            // bot_id -> last seen ip
    std::map<std::string, Address> pending_rgr_;       // device -> bot addr
    std::map<std::string, Address> pending_acks_;      // unique_id -> bot addr
};

struct PublishRequest {
    std::vector<uint64_t> targets;
    proto::CommandKind kind;
    proto::ParamMap params;
};

class BotmasterNode : public sim::Node {
public:
    static constexpr uint64_t kHeartbeatTag = 1;
    static constexpr uint64_t kPublishTagBase = 1000;

    struct Config {
        SimTime heartbeat_ms = 30'000;
        bool auto_replace = true;
        uint64_t snapshot_capacity = 1024;
        std::shared_ptr<const dga::DomainList> domains;
        dga::WindowConfig window;
        uint64_t next_server_index = 1;  // names replacements "s<k>"
    };

    BotmasterNode(std::string name, Config cfg, uint64_t master_seed);

    void on_deliver(sim::Sim& s, const sim::Delivery& d) override;
    void on_timer(sim::Sim& s, uint64_t tag) override;
    void on_restore(sim::Sim& s) override;

    void track_server(Address a) { servers_.push_back(a); }
    void arm_heartbeat(sim::Sim& s);
    void set_schedule(std::vector<PublishRequest> schedule) {
        schedule_ = std::move(schedule);
    }

    void publish_command(sim::Sim& s, const PublishRequest& req);

    const std::map<uint64_t, RegistryRecord>& registry() const { return registry_; }
    const SnapshotTree& snapshots() const { return snapshots_; }
    SnapshotTree::Version current_version() const { return current_version_; }
    uint64_t next_bot_id() const { return next_bot_id_; }
    uint64_t payload_bytes_received() const { return payload_bytes_received_; }
    uint64_t acked_uploads() const { return acked_uids_.size(); }
    const std::vector<Address>& servers() const { return servers_; }

private:
    void register_bot(sim::Sim& s, const proto::Srr& srr, Address via_server);
    void replace_server(sim::Sim& s, Address dead);

    struct Outstanding {
        uint64_t bot_id;
        proto::CommandKind kind;
        SimTime timestamp;
        proto::ParamMap params;
        Address assigned_server;
    };

    Config cfg_;
    Xorshift64Star replace_stream_;
    std::map<uint64_t, RegistryRecord> registry_;
    std::map<std::string, uint64_t> id_by_device_;
    SnapshotTree snapshots_;
    SnapshotTree::Version current_version_ = 0;
    uint64_t next_bot_id_ = 1;
    std::map<uint64_t, Address> current_server_of_;
    std::vector<Outstanding> outstanding_;
    std::vector<Address> servers_;
    std::set<uint32_t> replaced_;
    std::set<std::string> acked_uids_;
    uint64_t payload_bytes_received_ = 0;
    std::vector<PublishRequest> schedule_;
};

}  // namespace fluxsim::nodes
