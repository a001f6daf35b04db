#include "fluxsim/scenario.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "json.hpp"

namespace fluxsim {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string join_path(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
}

// Strict object view: every key must be consumed, leftovers are errors
// naming the full path.
class Obj {
public:
    Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j.is_object())
            throw ConfigError("\"" + path_ + "\" must be an object");
    }

    const json* get(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    uint64_t u64(const std::string& key, uint64_t def) {
        const json* v = get(key);
        if (!v) return def;
        if (!v->is_number_unsigned())
            throw ConfigError("\"" + join_path(path_, key) +
                              "\" must be a non-negative integer");
        return v->get<uint64_t>();
    }

    double num(const std::string& key, double def) {
        const json* v = get(key);
        if (!v) return def;
        if (!v->is_number())
            throw ConfigError("\"" + join_path(path_, key) + "\" must be a number");
        return v->get<double>();
    }

    bool boolean(const std::string& key, bool def) {
        const json* v = get(key);
        if (!v) return def;
        if (!v->is_boolean())
            throw ConfigError("\"" + join_path(path_, key) + "\" must be a boolean");
        return v->get<bool>();
    }

    std::string str(const std::string& key, const std::string& def) {
        const json* v = get(key);
        if (!v) return def;
        if (!v->is_string())
            throw ConfigError("\"" + join_path(path_, key) + "\" must be a string");
        return v->get<std::string>();
    }

    std::vector<std::string> str_list(const std::string& key,
                                      std::vector<std::string> def) {
        const json* v = get(key);
        if (!v) return def;
        if (!v->is_array())
            throw ConfigError("\"" + join_path(path_, key) + "\" must be an array");
        std::vector<std::string> out;
        for (const auto& e : *v) {
            if (!e.is_string())
                throw ConfigError("\"" + join_path(path_, key) +
                                  "\" must contain strings");
            out.push_back(e.get<std::string>());
        }
        return out;
    }

    std::string path_of(const std::string& key) const {
        return join_path(path_, key);
    }

    void finish() {
        for (const auto& item : j_.items())
            if (!seen_.count(item.key()))
                throw ConfigError("unknown key \"" + join_path(path_, item.key()) +
                                  "\"");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

nodes::PermissionModel permission_from(const std::string& s, const std::string& path) {
    if (s == "AUTO_GRANT") return nodes::PermissionModel::AutoGrant;
    if (s == "NOTIFY_DENY") return nodes::PermissionModel::NotifyDeny;
    throw ConfigError("\"" + path + "\": unknown permission model " + s);
}

const char* permission_name(nodes::PermissionModel m) {
    return m == nodes::PermissionModel::AutoGrant ? "AUTO_GRANT" : "NOTIFY_DENY";
}

nodes::Sensor sensor_from(const std::string& s, const std::string& path) {
    if (s == "Camera") return nodes::Sensor::Camera;
    if (s == "Mic") return nodes::Sensor::Mic;
    if (s == "GPS") return nodes::Sensor::Gps;
    throw ConfigError("\"" + path + "\": unknown sensor " + s);
}

const char* sensor_name(nodes::Sensor s) {
    switch (s) {
        case nodes::Sensor::Camera: return "Camera";
        case nodes::Sensor::Mic: return "Mic";
        case nodes::Sensor::Gps: return "GPS";
    }
    return "?";
}

proto::CommandKind kind_from(const std::string& s, const std::string& path) {
    try {
        return proto::command_kind_from_string(s);
    } catch (const DecodeError&) {
        throw ConfigError("\"" + path + "\": unknown command kind " + s);
    }
}

nodes::DeviceProfile parse_profile(const json& j, const std::string& path,
                                   nodes::DeviceProfile base) {
    Obj o(j, path);
    base.battery_capacity_mah = o.num("battery_capacity_mah", base.battery_capacity_mah);
    base.battery_level_mah = o.num("battery_level_mah", base.battery_level_mah);
    base.baseline_drain_mah_per_h =
        o.num("baseline_drain_mah_per_h", base.baseline_drain_mah_per_h);
    base.bot_drain_mah_per_h = o.num("bot_drain_mah_per_h", base.bot_drain_mah_per_h);
    base.battery_threshold = o.num("battery_threshold", base.battery_threshold);
    base.permission_model = permission_from(
        o.str("permission_model", permission_name(base.permission_model)),
        o.path_of("permission_model"));
    if (const json* sensors = o.get("sensors")) {
        if (!sensors->is_array())
            throw ConfigError("\"" + o.path_of("sensors") + "\" must be an array");
        base.sensors.clear();
        for (const auto& e : *sensors)
            base.sensors.insert(
                sensor_from(e.get<std::string>(), o.path_of("sensors")));
    }
    base.storage_free_bytes = o.u64("storage_free_bytes", base.storage_free_bytes);
    o.finish();
    if (base.battery_capacity_mah <= 0 || base.battery_level_mah < 0 ||
        base.battery_level_mah > base.battery_capacity_mah)
        throw ConfigError("\"" + path + "\": bad battery levels");
    if (base.battery_threshold <= 0.0 || base.battery_threshold >= 1.0)
        throw ConfigError("\"" + path + "\": battery_threshold must be in (0,1)");
    return base;
}

nodes::JitterSpec parse_jitter(const json& j, const std::string& path) {
    Obj o(j, path);
    nodes::JitterSpec spec;
    std::string mode = o.str("mode", "uniform");
    if (mode == "uniform") {
        spec.enabled = true;
        spec.min_ms = o.u64("min_ms", 60'000);
        spec.max_ms = o.u64("max_ms", 600'000);
        if (spec.min_ms == 0 || spec.min_ms > spec.max_ms)
            throw ConfigError("\"" + path + "\": need 0 < min_ms <= max_ms");
    } else if (mode == "fixed") {
        spec.enabled = false;
        spec.period_ms = o.u64("period_ms", 300'000);
        if (spec.period_ms == 0)
            throw ConfigError("\"" + path + "\": period_ms must be positive");
    } else {
        throw ConfigError("\"" + o.path_of("mode") + "\": expected uniform|fixed");
    }
    o.finish();
    return spec;
}

}  // namespace

std::map<std::string, nodes::DeviceProfile> builtin_profiles() {
    nodes::DeviceProfile def;
    def.name = "default";
    nodes::DeviceProfile deny = def;
    deny.name = "notify_deny";
    deny.permission_model = nodes::PermissionModel::NotifyDeny;
    return {{"default", def}, {"notify_deny", deny}};
}

std::string device_name(uint64_t index, uint64_t total) {
    int width = 3;
    for (uint64_t t = total; t > 999; t /= 10) ++width;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "bot%0*llu", width,
                  static_cast<unsigned long long>(index + 1));
    return buf;
}

namespace {
Scenario scenario_from_json(const json& j);
}

Scenario parse_scenario_text(const std::string& text, const std::string& origin) {
    try {
        return scenario_from_json(json::parse(text));
    } catch (const json::exception& e) {
        // covers both syntax errors and wrong value types
        throw ConfigError(origin + ": " + e.what());
    }
}

namespace {

Scenario scenario_from_json(const json& j) {
    Scenario sc;
    sc.profiles = builtin_profiles();
    Obj root(j, "");

    sc.master_seed = root.u64("master_seed", sc.master_seed);
    sc.duration_ms = root.u64("duration_ms", sc.duration_ms);
    if (sc.duration_ms == 0) throw ConfigError("\"duration_ms\" must be positive");

    if (const json* dj = root.get("dga")) {
        Obj o(*dj, "dga");
        sc.dga_seed = o.str("seed", sc.dga_seed);
        sc.dga_date = dga::parse_date(o.str("date", dga::format_date(sc.dga_date)));
        sc.alpha = o.u64("alpha", sc.alpha);
        sc.beta = o.u64("beta", sc.beta);
        sc.tlds = o.str_list("tlds", sc.tlds);
        if (const json* dict = o.get("dictionary")) {
            if (!dict->is_null()) {
                if (!dict->is_array())
                    throw ConfigError("\"dga.dictionary\" must be an array or null");
                std::vector<std::string> words;
                for (const auto& w : *dict) words.push_back(w.get<std::string>());
                try {
                    dga::validate_dictionary(words);
                } catch (const ConfigError& e) {
                    throw ConfigError("\"dga.dictionary\": " +
                                      std::string(e.what()));
                }
                sc.dictionary = std::move(words);
            }
        }
        o.finish();
    }
    if (sc.tlds.empty()) throw ConfigError("\"dga.tlds\" must not be empty");
    dga::WindowConfig::make(sc.alpha, sc.beta);  // validates divisibility

    if (const json* sj = root.get("servers")) {
        Obj o(*sj, "servers");
        sc.server_count = o.u64("count", sc.server_count);
        sc.heartbeat_ms = o.u64("heartbeat_ms", sc.heartbeat_ms);
        sc.auto_replace = o.boolean("auto_replace", sc.auto_replace);
        o.finish();
        if (sc.server_count == 0)
            throw ConfigError("\"servers.count\" must be at least 1");
        if (sc.heartbeat_ms == 0)
            throw ConfigError("\"servers.heartbeat_ms\" must be positive");
    }

    if (const json* pj = root.get("profiles")) {
        if (!pj->is_object()) throw ConfigError("\"profiles\" must be an object");
        for (const auto& item : pj->items()) {
            nodes::DeviceProfile base;
            auto it = sc.profiles.find(item.key());
            if (it != sc.profiles.end()) base = it->second;
            base.name = item.key();
            sc.profiles[item.key()] =
                parse_profile(item.value(), "profiles." + item.key(), base);
        }
    }

    if (const json* bj = root.get("bots")) {
        if (!bj->is_array()) throw ConfigError("\"bots\" must be an array");
        for (size_t i = 0; i < bj->size(); ++i) {
            std::string path = "bots[" + std::to_string(i) + "]";
            Obj o((*bj)[i], path);
            BotGroup g;
            g.profile = o.str("profile", g.profile);
            if (!sc.profiles.count(g.profile))
                throw ConfigError("\"" + o.path_of("profile") +
                                  "\": unknown profile " + g.profile);
            g.count = o.u64("count", g.count);
            if (const json* jj = o.get("jitter"))
                g.jitter = parse_jitter(*jj, o.path_of("jitter"));
            g.hop_interval_ms = o.u64("hop_interval_ms", g.hop_interval_ms);
            o.finish();
            sc.bots.push_back(std::move(g));
        }
    }

    if (const json* pj = root.get("payload")) {
        Obj o(*pj, "payload");
        sc.payload.image_bytes = o.u64("image_bytes", sc.payload.image_bytes);
        sc.payload.image_ratio = o.num("image_compression_ratio", sc.payload.image_ratio);
        sc.payload.audio_bytes_per_minute =
            o.u64("audio_bytes_per_minute", sc.payload.audio_bytes_per_minute);
        sc.payload.audio_ratio = o.num("audio_compression_ratio", sc.payload.audio_ratio);
        sc.payload.gps_bytes = o.u64("gps_bytes", sc.payload.gps_bytes);
        o.finish();
    }

    if (const json* nj = root.get("net")) {
        Obj o(*nj, "net");
        sc.net.latency_ms = o.u64("latency_ms", sc.net.latency_ms);
        sc.net.header_overhead_bytes =
            o.u64("header_overhead_bytes", sc.net.header_overhead_bytes);
        o.finish();
        if (sc.net.latency_ms == 0)
            throw ConfigError("\"net.latency_ms\" must be positive");
    }

    if (const json* fj = root.get("faults")) {
        if (!fj->is_array()) throw ConfigError("\"faults\" must be an array");
        for (size_t i = 0; i < fj->size(); ++i) {
            std::string path = "faults[" + std::to_string(i) + "]";
            Obj o((*fj)[i], path);
            ScenarioFault f;
            std::string kind = o.str("kind", "");
            f.at_ms = o.u64("at_ms", 0);
            if (kind == "server_takedown") {
                f.kind = ScenarioFault::Kind::ServerTakedown;
                f.server_index = o.u64("server_index", 0);
                if (f.server_index >= sc.server_count)
                    throw ConfigError("\"" + o.path_of("server_index") +
                                      "\" out of range");
            } else if (kind == "botmaster_compromise") {
                f.kind = ScenarioFault::Kind::BotmasterCompromise;
            } else if (kind == "ip_reassign") {
                f.kind = ScenarioFault::Kind::IpReassign;
                f.device = o.str("device", "");
                if (f.device.empty())
                    throw ConfigError("\"" + o.path_of("device") + "\" is required");
                f.period_ms = o.u64("period_ms", 0);
            } else {
                throw ConfigError("\"" + o.path_of("kind") +
                                  "\": expected server_takedown|botmaster_compromise|"
                                  "ip_reassign");
            }
            o.finish();
            sc.faults.push_back(std::move(f));
        }
    }

    if (const json* cj = root.get("command_schedule")) {
        if (!cj->is_array())
            throw ConfigError("\"command_schedule\" must be an array");
        for (size_t i = 0; i < cj->size(); ++i) {
            std::string path = "command_schedule[" + std::to_string(i) + "]";
            Obj o((*cj)[i], path);
            CommandScheduleEntry e;
            e.at_ms = o.u64("at_ms", 0);
            e.kind = kind_from(o.str("kind", ""), o.path_of("kind"));
            if (const json* t = o.get("targets")) {
                if (!t->is_array())
                    throw ConfigError("\"" + o.path_of("targets") +
                                      "\" must be an array");
                for (const auto& id : *t) e.targets.push_back(id.get<uint64_t>());
            }
            e.targets_first_n = o.u64("targets_first_n", 0);
            if (!e.targets.empty() && e.targets_first_n > 0)
                throw ConfigError("\"" + path +
                                  "\": targets and targets_first_n are exclusive");
            if (const json* p = o.get("params")) {
                if (!p->is_object())
                    throw ConfigError("\"" + o.path_of("params") +
                                      "\" must be an object");
                for (const auto& item : p->items())
                    e.params[item.key()] = item.value().get<std::string>();
            }
            o.finish();
            sc.schedule.push_back(std::move(e));
        }
    }

    if (const json* dj = root.get("detector")) {
        Obj o(*dj, "detector");
        sc.thresholds.regularity_cv =
            o.num("regularity_cv_threshold", sc.thresholds.regularity_cv);
        sc.thresholds.persistence =
            o.num("persistence_threshold", sc.thresholds.persistence);
        sc.thresholds.persistence_window_ms =
            o.u64("persistence_window_ms", sc.thresholds.persistence_window_ms);
        sc.thresholds.nxdomain_per_hour =
            o.num("nxdomain_per_hour_threshold", sc.thresholds.nxdomain_per_hour);
        sc.baseline_bytes_per_host =
            o.num("baseline_bytes_per_host", sc.baseline_bytes_per_host);
        o.finish();
    }

    std::string out = root.str("output_dir", "");
    if (!out.empty()) sc.output_dir = out;

    root.finish();
    return sc;
}

}  // namespace

Scenario parse_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return parse_scenario_text(text, path);
}

std::string scenario_to_json(const Scenario& sc) {
    ordered_json j;
    j["master_seed"] = sc.master_seed;
    j["duration_ms"] = sc.duration_ms;
    ordered_json dj;
    dj["seed"] = sc.dga_seed;
    dj["date"] = dga::format_date(sc.dga_date);
    dj["alpha"] = sc.alpha;
    dj["beta"] = sc.beta;
    dj["tlds"] = sc.tlds;
    if (sc.dictionary) dj["dictionary"] = *sc.dictionary;
    j["dga"] = dj;
    j["servers"] = {{"count", sc.server_count},
                    {"heartbeat_ms", sc.heartbeat_ms},
                    {"auto_replace", sc.auto_replace}};
    ordered_json profiles = ordered_json::object();
    for (const auto& [name, p] : sc.profiles) {
        ordered_json pj;
        pj["battery_capacity_mah"] = p.battery_capacity_mah;
        pj["battery_level_mah"] = p.battery_level_mah;
        pj["baseline_drain_mah_per_h"] = p.baseline_drain_mah_per_h;
        pj["bot_drain_mah_per_h"] = p.bot_drain_mah_per_h;
        pj["battery_threshold"] = p.battery_threshold;
        pj["permission_model"] = permission_name(p.permission_model);
        std::vector<std::string> sensors;
        for (auto s : p.sensors) sensors.push_back(sensor_name(s));
        pj["sensors"] = sensors;
        pj["storage_free_bytes"] = p.storage_free_bytes;
        profiles[name] = pj;
    }
    j["profiles"] = profiles;
    ordered_json bots = ordered_json::array();
    for (const auto& g : sc.bots) {
        ordered_json gj;
        gj["profile"] = g.profile;
        gj["count"] = g.count;
        if (g.jitter.enabled)
            gj["jitter"] = {{"mode", "uniform"},
                            {"min_ms", g.jitter.min_ms},
                            {"max_ms", g.jitter.max_ms}};
        else
            gj["jitter"] = {{"mode", "fixed"}, {"period_ms", g.jitter.period_ms}};
        gj["hop_interval_ms"] = g.hop_interval_ms;
        bots.push_back(gj);
    }
    j["bots"] = bots;
    j["payload"] = {{"image_bytes", sc.payload.image_bytes},
                    {"image_compression_ratio", sc.payload.image_ratio},
                    {"audio_bytes_per_minute", sc.payload.audio_bytes_per_minute},
                    {"audio_compression_ratio", sc.payload.audio_ratio},
                    {"gps_bytes", sc.payload.gps_bytes}};
    j["net"] = {{"latency_ms", sc.net.latency_ms},
                {"header_overhead_bytes", sc.net.header_overhead_bytes}};
    ordered_json faults = ordered_json::array();
    for (const auto& f : sc.faults) {
        ordered_json fj;
        switch (f.kind) {
            case ScenarioFault::Kind::ServerTakedown:
                fj["kind"] = "server_takedown";
                fj["server_index"] = f.server_index;
                break;
            case ScenarioFault::Kind::BotmasterCompromise:
                fj["kind"] = "botmaster_compromise";
                break;
            case ScenarioFault::Kind::IpReassign:
                fj["kind"] = "ip_reassign";
                fj["device"] = f.device;
                fj["period_ms"] = f.period_ms;
                break;
        }
        fj["at_ms"] = f.at_ms;
        faults.push_back(fj);
    }
    j["faults"] = faults;
    ordered_json sched = ordered_json::array();
    for (const auto& e : sc.schedule) {
        ordered_json ej;
        ej["at_ms"] = e.at_ms;
        ej["kind"] = proto::to_string(e.kind);
        if (!e.targets.empty()) ej["targets"] = e.targets;
        if (e.targets_first_n) ej["targets_first_n"] = e.targets_first_n;
        ordered_json params = ordered_json::object();
        for (const auto& [k, v] : e.params) params[k] = v;
        ej["params"] = params;
        sched.push_back(ej);
    }
    j["command_schedule"] = sched;
    j["detector"] = {{"regularity_cv_threshold", sc.thresholds.regularity_cv},
                     {"persistence_threshold", sc.thresholds.persistence},
                     {"persistence_window_ms", sc.thresholds.persistence_window_ms},
                     {"nxdomain_per_hour_threshold", sc.thresholds.nxdomain_per_hour},
                     {"baseline_bytes_per_host", sc.baseline_bytes_per_host}};
    if (sc.output_dir) j["output_dir"] = *sc.output_dir;
    return j.dump(2) + "\n";
}

void apply_env_seed(Scenario& sc) {
    const char* env = std::getenv("FLUXSIM_SEED");
    if (!env || !*env) return;
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (!end || *end != '\0')
        throw ConfigError("FLUXSIM_SEED must be a decimal integer");
    sc.master_seed = v;
}

}  // namespace fluxsim
