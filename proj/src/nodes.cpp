#include "fluxsim/nodes.hpp"

#include <charconv>
#include <cmath>

namespace fluxsim::nodes {

namespace {

Sensor sensor_for(proto::CommandKind kind) {
    switch (kind) {
        case proto::CommandKind::CaptureImage: return Sensor::Camera;
        case proto::CommandKind::RecordAudio: return Sensor::Mic;
        case proto::CommandKind::RecordVoiceCall: return Sensor::Mic;
        case proto::CommandKind::GrabGpsLocation: return Sensor::Gps;
    }
    return Sensor::Camera;
}

uint64_t param_seconds(const proto::ParamMap& params, uint64_t fallback) {
    auto it = params.find("time");
    if (it == params.end()) return fallback;
    uint64_t v = 0;
    auto [p, ec] = std::from_chars(it->second.data(),
                                   it->second.data() + it->second.size(), v);
    if (ec != std::errc() || p != it->second.data() + it->second.size() || v == 0)
        return fallback;
    return v;
}

}  // namespace

const char* to_string(CommandStatus s) {
    switch (s) {
        case CommandStatus::Pending: return "PENDING";
        case CommandStatus::HalfExecuted: return "HALF-EXECUTED";
        case CommandStatus::Executed: return "EXECUTED";
    }
    return "?";
}

// --- BotNode ------------------------------------------------------------

BotNode::BotNode(BotConfig cfg, uint64_t master_seed)
    : Node(cfg.device_id, sim::NodeKind::Bot),
      cfg_(std::move(cfg)),
      jitter_stream_(derive_stream(master_seed, cfg_.device_id, "jitter")),
      lookup_stream_(derive_stream(master_seed, cfg_.device_id, "lookup")),
      battery_mah_(cfg_.profile.battery_level_mah),
      storage_free_(cfg_.profile.storage_free_bytes) {}

void BotNode::start(sim::Sim& s) { schedule_tick(s, cfg_.start_at_ms); }

void BotNode::schedule_tick(sim::Sim& s, SimTime at) {
    s.schedule_timer(*this, at, kTickTag);
}

SimTime BotNode::next_gap() {
    if (cfg_.jitter.enabled)
        return jitter_stream_.next_in(cfg_.jitter.min_ms, cfg_.jitter.max_ms);
    return cfg_.jitter.period_ms;
}

void BotNode::update_battery(SimTime now) {
    if (now <= battery_updated_at_) return;
    double hours = double(now - battery_updated_at_) / 3'600'000.0;
    double rate = cfg_.profile.baseline_drain_mah_per_h +
                  (gated_ ? 0.0 : cfg_.profile.bot_drain_mah_per_h);
    battery_mah_ = std::max(0.0, battery_mah_ - rate * hours);
    battery_updated_at_ = now;
    gated_ = battery_mah_ <
             cfg_.profile.battery_threshold * cfg_.profile.battery_capacity_mah;
}

bool BotNode::battery_gated() const { return gated_; }

double BotNode::battery_at(SimTime t) {
    update_battery(t);
    return battery_mah_;
}

bool BotNode::attempt_acquire(sim::Sim& s, std::optional<Address> exclude) {
    ++metrics_.acquisitions;
    Address found{};
    std::optional<std::pair<std::string, Address>> excluded_hit;
    auto resolve_cb = [&](const std::string& domain) {
        ++metrics_.polls;
        auto addr = s.resolve(domain, name());
        if (!addr) {
            ++metrics_.nx_misses;
            return false;
        }
        if (exclude && *addr == *exclude) {
            // A hop targets a *different* server; remember this one in
            // case nothing else is alive.
            if (!excluded_hit) excluded_hit = {domain, *addr};
            return false;
        }
        found = *addr;
        return true;
    };
    auto res = dga::enhanced_lookup(*cfg_.domains, cfg_.window, resolve_cb,
                                    lookup_stream_.next());
    Address target{};
    if (res.domain)
        target = found;
    else if (excluded_hit)
        target = excluded_hit->second;  // only the old server is left
    else
        return false;

    proto::Srr srr;
    srr.device_id = cfg_.device_id;
    srr.device_details = {{"profile", cfg_.profile.name},
                          {"ip", fluxsim::to_string(address())}};
    s.send(*this, target, srr);
    phase_ = BotPhase::Acquiring;
    awaiting_rgr_ = true;
    srr_sent_at_ = s.now();
    return true;
}

void BotNode::send_dcr(sim::Sim& s) {
    if (dcr_in_flight_ && s.now() - dcr_sent_at_ < cfg_.response_timeout_ms)
        return;  // at most one DCR in flight
    proto::Dcr dcr;
    dcr.bot_id = *bot_id_;
    dcr.bot_ip = address();
    s.send(*this, *current_server_, dcr);
    dcr_in_flight_ = true;
    dcr_sent_at_ = s.now();
}

void BotNode::on_timer(sim::Sim& s, uint64_t tag) {
    if (tag != kTickTag) return;
    SimTime now = s.now();
    update_battery(now);
    if (battery_gated()) {
        // Sleep until the battery recovers; recheck on a slow cadence.
        schedule_tick(s, now + 60'000);
        return;
    }

    if (phase_ == BotPhase::Registered && cfg_.hop_interval_ms > 0 &&
        now >= hop_deadline_) {
        Address old = *current_server_;
        current_server_.reset();
        phase_ = BotPhase::Unregistered;
        if (!attempt_acquire(s, old)) {
            schedule_tick(s, now + cfg_.backoff_ms);
            return;
        }
    } else if (phase_ == BotPhase::Registered) {
        for (auto& rec : command_db_)
            if (rec.status == CommandStatus::HalfExecuted) try_upload(s, rec);
        send_dcr(s);
    } else if (awaiting_rgr_ && now - srr_sent_at_ < cfg_.response_timeout_ms) {
        // registration response still pending
    } else {
        if (!attempt_acquire(s, std::nullopt)) {
            schedule_tick(s, now + cfg_.backoff_ms);
            return;
        }
    }
    schedule_tick(s, now + next_gap());
}

void BotNode::on_address_change(sim::Sim& s, Address fresh) {
    (void)s, (void)fresh;  // next DCR simply carries the new address
}

void BotNode::insert_command(sim::Sim& s, proto::CommandKind kind, SimTime ts,
                             proto::ParamMap params) {
    if (!seen_command_ts_.insert(ts).second) return;  // duplicate delivery
    CommandRecord rec;
    rec.kind = kind;
    rec.timestamp = ts;
    rec.params = std::move(params);
    command_db_.push_back(std::move(rec));
    try_execute(s, command_db_.back());
    try_upload(s, command_db_.back());
}

void BotNode::try_execute(sim::Sim& s, CommandRecord& rec) {
    (void)s;
    if (rec.status != CommandStatus::Pending || rec.failed) return;
    const DeviceProfile& prof = cfg_.profile;
    if (prof.permission_model == PermissionModel::NotifyDeny) {
        // The user is notified and never grants: the record keeps waiting.
        if (!rec.denied_counted) {
            rec.denied_counted = true;
            ++metrics_.commands_denied;
        }
        return;
    }
    if (!prof.sensors.count(sensor_for(rec.kind))) {
        rec.failed = true;
        ++metrics_.commands_failed;
        return;
    }

    uint64_t raw = 0, packed = 0;
    bool compressed = false;
    switch (rec.kind) {
        case proto::CommandKind::CaptureImage:
            raw = cfg_.payload.image_bytes;
            packed = uint64_t(std::llround(double(raw) * cfg_.payload.image_ratio));
            compressed = true;
            break;
        case proto::CommandKind::RecordAudio:
        case proto::CommandKind::RecordVoiceCall:
            raw = cfg_.payload.audio_bytes_per_minute *
                  param_seconds(rec.params, 60) / 60;
            packed = uint64_t(std::llround(double(raw) * cfg_.payload.audio_ratio));
            compressed = true;
            break;
        case proto::CommandKind::GrabGpsLocation:
            raw = cfg_.payload.gps_bytes;
            packed = raw;  // GPS text stays uncompressed
            break;
    }
    if (packed > storage_free_) {
        rec.failed = true;
        ++metrics_.commands_failed;
        return;
    }
    storage_free_ -= packed;
    rec.payload_size = raw;
    rec.compressed_size = packed;
    rec.compressed = compressed;
    rec.unique_id = proto::make_unique_id(cfg_.device_id, rec.timestamp);
    rec.status = CommandStatus::HalfExecuted;
}

void BotNode::try_upload(sim::Sim& s, CommandRecord& rec) {
    if (rec.status != CommandStatus::HalfExecuted) return;
    if (!current_server_) return;
    if (rec.upload_in_flight &&
        s.now() - rec.upload_sent_at < cfg_.response_timeout_ms)
        return;
    proto::Upload up;
    up.bot_id = bot_id_.value_or(0);
    up.unique_id = *rec.unique_id;
    up.payload_bytes = *rec.compressed_size;
    up.compressed = rec.compressed;
    s.send(*this, *current_server_, up);
    rec.upload_in_flight = true;
    rec.upload_sent_at = s.now();
    ++metrics_.uploads_sent;
}

void BotNode::handle_ack(const std::string& unique_id) {
    for (auto it = command_db_.begin(); it != command_db_.end(); ++it) {
        if (it->unique_id != unique_id ||
            it->status != CommandStatus::HalfExecuted)
            continue;
        it->status = CommandStatus::Executed;
        ++metrics_.commands_ok;
        // Sanitizer: drop the record and free its payload immediately.
        storage_free_ += it->compressed_size.value_or(0);
        command_db_.erase(it);
        return;
    }
}

void BotNode::on_deliver(sim::Sim& s, const sim::Delivery& d) {
    if (const auto* rgr = std::get_if<proto::Rgr>(&d.msg)) {
        if (rgr->device_id != cfg_.device_id) return;
        bot_id_ = rgr->assigned_bot_id;
        phase_ = BotPhase::Registered;
        awaiting_rgr_ = false;
        current_server_ = d.from_addr;
        acquisition_log_.emplace_back(s.now(), d.from_addr);
        if (cfg_.hop_interval_ms > 0)
            hop_deadline_ = s.now() + cfg_.hop_interval_ms;
        dcr_in_flight_ = false;
    } else if (const auto* cmd = std::get_if<proto::Command>(&d.msg)) {
        dcr_in_flight_ = false;
        insert_command(s, cmd->kind, cmd->timestamp, cmd->params);
    } else if (std::get_if<proto::NothingForYou>(&d.msg)) {
        dcr_in_flight_ = false;
    } else if (const auto* rcad = std::get_if<proto::Rcad>(&d.msg)) {
        current_server_ = rcad->new_server_address;
    } else if (const auto* ack = std::get_if<proto::UploadAck>(&d.msg)) {
        handle_ack(ack->unique_id);
    } else if (const auto* sms = std::get_if<proto::SpamSms>(&d.msg)) {
        if (!cfg_.sms_templates) return;
        auto decoded = proto::sms_decode(*sms, *cfg_.sms_templates);
        if (!decoded) return;  // not for us; discarded completely
        insert_command(s, decoded->kind, s.now(), decoded->params);
    }
}

// --- ServerNode ---------------------------------------------------------

ServerNode::ServerNode(std::string name, Address botmaster)
    : Node(std::move(name), sim::NodeKind::Server), botmaster_(botmaster) {}

void ServerNode::dispatch(sim::Sim& s, const proto::Dcr& dcr) {
    for (size_t i = 0; i < rows_.size(); ++i) {
        DispatchRow& row = rows_[i];
        if (row.bot_id != dcr.bot_id) continue;
        if (row.bot_ip != dcr.bot_ip) {
            // The device moved: relocate its address and tell the botmaster.
            row.bot_ip = dcr.bot_ip;
            proto::Rcipb rcipb;
            rcipb.bot_id = dcr.bot_id;
            rcipb.new_ip = dcr.bot_ip;
            s.send(*this, botmaster_, rcipb);
        }
        proto::Command cmd;
        cmd.kind = row.kind;
        cmd.timestamp = row.timestamp;
        cmd.params = row.params;
        cmd.upload_ip = address();
        s.send(*this, dcr.bot_ip, cmd);
        bot_cache_[dcr.bot_id] = dcr.bot_ip;
        rows_.erase(rows_.begin() + static_cast<ptrdiff_t>(i));
        return;
    }
    s.send(*this, dcr.bot_ip, proto::NothingForYou{});
}

void ServerNode::on_deliver(sim::Sim& s, const sim::Delivery& d) {
    if (const auto* srr = std::get_if<proto::Srr>(&d.msg)) {
        pending_rgr_[srr->device_id] = d.from_addr;
        s.send(*this, botmaster_, *srr);
    } else if (const auto* rgr = std::get_if<proto::Rgr>(&d.msg)) {
        auto it = pending_rgr_.find(rgr->device_id);
        if (it == pending_rgr_.end()) return;
        bot_cache_[rgr->assigned_bot_id] = it->second;
        s.send(*this, it->second, *rgr);
        pending_rgr_.erase(it);
    } else if (const auto* dcr = std::get_if<proto::Dcr>(&d.msg)) {
        dispatch(s, *dcr);
    } else if (const auto* pub = std::get_if<proto::PublishCommand>(&d.msg)) {
        for (const auto& t : pub->targets)
            rows_.push_back({t.bot_id, t.bot_ip, pub->kind, pub->timestamp,
                             pub->params});
    } else if (const auto* up = std::get_if<proto::Upload>(&d.msg)) {
        pending_acks_[up->unique_id] = d.from_addr;
        s.send(*this, botmaster_, *up);
    } else if (const auto* ack = std::get_if<proto::UploadAck>(&d.msg)) {
        auto it = pending_acks_.find(ack->unique_id);
        if (it == pending_acks_.end()) return;
        s.send(*this, it->second, *ack);
        pending_acks_.erase(it);
    }
}

// --- BotmasterNode -------------------------------------------------------

BotmasterNode::BotmasterNode(std::string name, Config cfg, uint64_t master_seed)
    : Node(std::move(name), sim::NodeKind::Botmaster),
      cfg_(std::move(cfg)),
      replace_stream_(derive_stream(master_seed, this->name(), "replace")),
      snapshots_(cfg_.snapshot_capacity) {}

void BotmasterNode::arm_heartbeat(sim::Sim& s) {
    s.schedule_timer(*this, s.now() + cfg_.heartbeat_ms, kHeartbeatTag);
}

void BotmasterNode::register_bot(sim::Sim& s, const proto::Srr& srr,
                                 Address via_server) {
    auto known = id_by_device_.find(srr.device_id);
    uint64_t id;
    if (known != id_by_device_.end()) {
        id = known->second;  // idempotent: same id, registry untouched
    } else {
        id = next_bot_id_++;
        RegistryRecord rec;
        rec.device_id = srr.device_id;
        auto ip_it = srr.device_details.find("ip");
        rec.ip = ip_it != srr.device_details.end() ? parse_address(ip_it->second)
                                                   : Address{};
        rec.registered_at = s.now();
        registry_[id] = rec;
        id_by_device_[srr.device_id] = id;
        current_version_ = snapshots_.update(current_version_, id, rec);
        s.log_registry("add", id, srr.device_id, rec.ip, current_version_);
    }
    current_server_of_[id] = via_server;
    proto::Rgr rgr;
    rgr.device_id = srr.device_id;
    rgr.assigned_bot_id = id;
    s.send(*this, via_server, rgr);
}

void BotmasterNode::publish_command(sim::Sim& s, const PublishRequest& req) {
    std::map<uint32_t, std::vector<uint64_t>> by_server;
    uint64_t skipped = 0;
    for (uint64_t id : req.targets) {
        auto it = registry_.find(id);
        if (it == registry_.end()) {
            ++skipped;
            continue;
        }
        by_server[current_server_of_.at(id).value].push_back(id);
    }
    if (skipped)
        s.log_warn("publish: skipped " + std::to_string(skipped) +
                   " unregistered targets");
    if (by_server.empty()) {
        s.log_warn("publish: no registered targets");
        return;
    }
    SimTime ts = s.now();
    for (const auto& [addr, ids] : by_server) {
        proto::PublishCommand pub;
        pub.kind = req.kind;
        pub.timestamp = ts;
        pub.params = req.params;
        for (uint64_t id : ids) {
            pub.targets.push_back({id, registry_.at(id).ip});
            outstanding_.push_back({id, req.kind, ts, req.params, Address{addr}});
        }
        s.send(*this, Address{addr}, pub);
    }
}

void BotmasterNode::replace_server(sim::Sim& s, Address dead) {
    replaced_.insert(dead.value);
    std::string name = "s" + std::to_string(cfg_.next_server_index++);

    // Rebuild the dead server's state from what the botmaster holds: its
    // unconsumed rows and a bot cache straight from the registry.
    std::vector<DispatchRow> rows;
    std::map<uint64_t, Address> cache;
    for (const auto& [id, rec] : registry_) cache[id] = rec.ip;

    auto node = std::make_unique<ServerNode>(name, address());
    sim::Node& fresh = s.add_node(std::move(node), 2);
    Address fresh_addr = fresh.address();

    for (auto& o : outstanding_) {
        if (!(o.assigned_server == dead)) continue;
        rows.push_back({o.bot_id, registry_.at(o.bot_id).ip, o.kind, o.timestamp,
                        o.params});
        o.assigned_server = fresh_addr;
    }
    static_cast<ServerNode&>(fresh).seed(std::move(rows), std::move(cache));

    servers_.push_back(fresh_addr);
    for (auto& [id, srv] : current_server_of_)
        if (srv == dead) srv = fresh_addr;

    // The replacement registers one fresh domain in a random window.
    const auto& domains = cfg_.domains->domains;
    for (int attempt = 0; attempt < 128; ++attempt) {
        uint64_t w = replace_stream_.next_below(cfg_.window.beta);
        uint64_t idx = w * cfg_.window.gamma +
                       replace_stream_.next_below(cfg_.window.gamma);
        if (s.registrar().register_domain(domains[idx], fresh_addr, s.now()) ==
            Registrar::RegisterResult::Ok)
            break;
    }

    // RCAd broadcast, unicast to every registry ip, sent by the new server.
    for (const auto& [id, rec] : registry_) {
        proto::Rcad rcad;
        rcad.new_server_address = fresh_addr;
        s.send(fresh, rec.ip, rcad);
    }
    s.log_warn("replaced server at " + to_string(dead) + " with " + name);
}

void BotmasterNode::on_timer(sim::Sim& s, uint64_t tag) {
    if (tag == kHeartbeatTag) {
        for (Address a : std::vector<Address>(servers_)) {
            if (replaced_.count(a.value)) continue;
            sim::Node* n = s.holder_of(a);
            if (n && !n->up() && cfg_.auto_replace) replace_server(s, a);
        }
        arm_heartbeat(s);
    } else if (tag >= kPublishTagBase &&
               tag - kPublishTagBase < schedule_.size()) {
        publish_command(s, schedule_[tag - kPublishTagBase]);
    }
}

void BotmasterNode::on_deliver(sim::Sim& s, const sim::Delivery& d) {
    if (const auto* srr = std::get_if<proto::Srr>(&d.msg)) {
        register_bot(s, *srr, d.from_addr);
    } else if (const auto* rcipb = std::get_if<proto::Rcipb>(&d.msg)) {
        auto it = registry_.find(rcipb->bot_id);
        if (it == registry_.end()) {
            s.log_warn("rcipb for unknown bot " + std::to_string(rcipb->bot_id));
            return;
        }
        it->second.ip = rcipb->new_ip;
        current_version_ =
            snapshots_.update(current_version_, rcipb->bot_id, it->second);
        s.log_registry("update_ip", rcipb->bot_id, it->second.device_id,
                       rcipb->new_ip, current_version_);
    } else if (const auto* up = std::get_if<proto::Upload>(&d.msg)) {
        if (acked_uids_.insert(up->unique_id).second) {
            payload_bytes_received_ += up->payload_bytes;
            auto [device, ts] = proto::parse_unique_id(up->unique_id);
            auto dev = id_by_device_.find(device);
            if (dev != id_by_device_.end()) {
                for (auto it = outstanding_.begin(); it != outstanding_.end();) {
                    if (it->bot_id == dev->second && it->timestamp == ts)
                        it = outstanding_.erase(it);
                    else
                        ++it;
                }
            }
        }
        proto::UploadAck ack;
        ack.unique_id = up->unique_id;
        s.send(*this, d.from_addr, ack);
    }
}

void BotmasterNode::on_restore(sim::Sim& s) {
    // Registry comes back from the persistent tree; the id counter resumes
    // past the highest restored slot so ids are never reused.
    current_version_ = snapshots_.latest_version();
    auto restored = snapshots_.materialize(current_version_);
    registry_.clear();
    id_by_device_.clear();
    next_bot_id_ = 1;
    for (const auto& [slot, rec] : restored) {
        registry_[slot] = rec;
        id_by_device_[rec.device_id] = slot;
        next_bot_id_ = std::max(next_bot_id_, slot + 1);
    }
    s.log_restore(current_version_);
    arm_heartbeat(s);
}

}  // namespace fluxsim::nodes
