#include "fluxsim/runner.hpp"

#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace fluxsim {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("short write to " + path);
}

}  // namespace

BuiltSim build_sim(const Scenario& sc) {
    BuiltSim built;
    built.scenario = sc;
    built.window = dga::WindowConfig::make(sc.alpha, sc.beta);
    built.domains = std::make_shared<const dga::DomainList>(dga::generate_domains(
        dga::DgaSeed{sc.dga_seed, sc.dga_date}, sc.alpha, sc.tlds, sc.dictionary));

    built.sim = std::make_unique<sim::Sim>(sc.master_seed, sc.net);
    sim::Sim& s = *built.sim;

    nodes::BotmasterNode::Config bm_cfg;
    bm_cfg.heartbeat_ms = sc.heartbeat_ms;
    bm_cfg.auto_replace = sc.auto_replace;
    bm_cfg.domains = built.domains;
    bm_cfg.window = built.window;
    bm_cfg.next_server_index = sc.server_count + 1;
    auto bm = std::make_unique<nodes::BotmasterNode>("botmaster", bm_cfg,
                                                     sc.master_seed);
    built.botmaster = bm.get();
    s.add_node(std::move(bm), 3);

    std::vector<Address> server_addrs;
    for (uint64_t k = 1; k <= sc.server_count; ++k) {
        std::string name = "s" + std::to_string(k);
        auto srv = std::make_unique<nodes::ServerNode>(name,
                                                       built.botmaster->address());
        built.servers.push_back(srv.get());
        sim::Node& n = s.add_node(std::move(srv), 2);
        server_addrs.push_back(n.address());
        built.botmaster->track_server(n.address());

        // Registration planning runs per server: each one registers its
        // own random domain in every window. If the drawn domain is already taken the
        // server walks to the next free index in the window, so every
        // window ends up covering every server.
        auto plan = dga::plan_registrations(
            *built.domains, built.window,
            derive_seed(sc.master_seed, name, "regplan"));
        for (const auto& e : plan.entries) {
            uint64_t base = e.window_index * built.window.gamma;
            uint64_t offset = e.domain_index - base;
            for (uint64_t probe = 0; probe < built.window.gamma; ++probe) {
                uint64_t idx = base + (offset + probe) % built.window.gamma;
                if (s.registrar().register_domain(built.domains->domains[idx],
                                                  n.address(), 0) ==
                    Registrar::RegisterResult::Ok)
                    break;
            }
        }
    }

    uint64_t total = sc.total_bots();
    uint64_t index = 0;
    for (const auto& group : sc.bots) {
        for (uint64_t i = 0; i < group.count; ++i, ++index) {
            nodes::BotConfig cfg;
            cfg.device_id = device_name(index, total);
            cfg.profile = sc.profiles.at(group.profile);
            cfg.payload = sc.payload;
            cfg.jitter = group.jitter;
            cfg.hop_interval_ms = group.hop_interval_ms;
            cfg.start_at_ms = (index + 1) * 1000;  // staggered, deterministic
            cfg.domains = built.domains;
            cfg.window = built.window;
            auto bot = std::make_unique<nodes::BotNode>(std::move(cfg),
                                                        sc.master_seed);
            built.bots.push_back(bot.get());
            s.add_node(std::move(bot), 1);
            built.bots.back()->start(s);
        }
    }

    for (const auto& f : sc.faults) {
        switch (f.kind) {
            case ScenarioFault::Kind::ServerTakedown:
                s.inject_fault(sim::ServerTakedown{server_addrs[f.server_index],
                                                   f.at_ms});
                break;
            case ScenarioFault::Kind::BotmasterCompromise:
                s.inject_fault(sim::BotmasterCompromise{f.at_ms});
                break;
            case ScenarioFault::Kind::IpReassign:
                s.inject_fault(sim::IpReassign{f.device, f.at_ms, f.period_ms});
                break;
        }
    }

    std::vector<nodes::PublishRequest> schedule;
    for (size_t i = 0; i < sc.schedule.size(); ++i) {
        const auto& e = sc.schedule[i];
        nodes::PublishRequest req;
        req.kind = e.kind;
        req.params = e.params;
        req.targets = e.targets;
        for (uint64_t id = 1; id <= e.targets_first_n; ++id)
            req.targets.push_back(id);
        schedule.push_back(std::move(req));
        s.schedule_timer(*built.botmaster, e.at_ms,
                         nodes::BotmasterNode::kPublishTagBase + i);
    }
    built.botmaster->set_schedule(std::move(schedule));
    built.botmaster->arm_heartbeat(s);

    return built;
}

sim::RunSummary run_to_end(BuiltSim& built) {
    return built.sim->run_until(built.scenario.duration_ms);
}

std::vector<PerBotMetrics> collect_metrics(BuiltSim& built) {
    auto trace = sim::extract_trace(built.sim->journal());
    std::map<std::string, PerBotMetrics> by_device;
    for (nodes::BotNode* bot : built.bots) {
        PerBotMetrics m;
        m.device = bot->name();
        m.bot_id = bot->bot_id().value_or(0);
        m.polls = bot->metrics().polls;
        m.nx_misses = bot->metrics().nx_misses;
        m.commands_ok = bot->metrics().commands_ok;
        m.commands_denied = bot->metrics().commands_denied;
        m.battery_end_mah = bot->battery_at(built.scenario.duration_ms);
        by_device[m.device] = m;
    }
    for (const auto& row : trace) {
        auto up = by_device.find(row.src);
        if (up != by_device.end()) up->second.bytes_up += row.bytes;
        auto down = by_device.find(row.dst);
        if (down != by_device.end()) down->second.bytes_down += row.bytes;
    }
    std::vector<PerBotMetrics> out;
    out.reserve(by_device.size());
    for (auto& [name, m] : by_device) out.push_back(std::move(m));
    return out;
}

std::string render_events_jsonl(const std::vector<sim::JournalRecord>& journal) {
    std::string out;
    for (const auto& rec : journal) {
        ordered_json j;
        if (const auto* row = std::get_if<sim::TraceRow>(&rec)) {
            j["type"] = "msg";
            j["t"] = row->t;
            j["src"] = row->src;
            j["dst"] = row->dst;
            j["bytes"] = row->bytes;
            j["dir"] = row->dir;
            j["tag"] = row->tag;
            j["ok"] = row->ok;
        } else if (const auto* nx = std::get_if<sim::NxRow>(&rec)) {
            j["type"] = "nx";
            j["t"] = nx->t;
            j["querier"] = nx->querier;
            j["domain"] = nx->domain;
        } else if (const auto* f = std::get_if<sim::FaultRow>(&rec)) {
            j["type"] = "fault";
            j["t"] = f->t;
            j["kind"] = f->kind;
            j["node"] = f->node;
            j["detail"] = f->detail;
        } else if (const auto* r = std::get_if<sim::RegistryRow>(&rec)) {
            j["type"] = "registry";
            j["t"] = r->t;
            j["op"] = r->op;
            j["bot_id"] = r->bot_id;
            j["device"] = r->device;
            j["ip"] = to_string(r->ip);
            j["version"] = r->version;
        } else if (const auto* rs = std::get_if<sim::RestoreRow>(&rec)) {
            j["type"] = "restore";
            j["t"] = rs->t;
            j["version"] = rs->version;
        } else if (const auto* w = std::get_if<sim::WarnRow>(&rec)) {
            j["type"] = "warn";
            j["t"] = w->t;
            j["msg"] = w->msg;
        }
        out += j.dump();
        out.push_back('\n');
    }
    return out;
}

std::string render_metrics_csv(const std::vector<PerBotMetrics>& metrics) {
    std::string out =
        "bot_id,bytes_up,bytes_down,polls,nx_misses,commands_ok,"
        "commands_denied,battery_end_mAh\n";
    char buf[192];
    for (const auto& m : metrics) {
        std::snprintf(buf, sizeof(buf),
                      "%llu,%llu,%llu,%llu,%llu,%llu,%llu,%.3f\n",
                      (unsigned long long)m.bot_id, (unsigned long long)m.bytes_up,
                      (unsigned long long)m.bytes_down, (unsigned long long)m.polls,
                      (unsigned long long)m.nx_misses,
                      (unsigned long long)m.commands_ok,
                      (unsigned long long)m.commands_denied, m.battery_end_mah);
        out += buf;
    }
    return out;
}

namespace {

std::string render_summary(BuiltSim& built,
                           const std::vector<PerBotMetrics>& metrics) {
    const auto& journal = built.sim->journal();
    uint64_t msgs = 0, dropped = 0, nx = 0;
    for (const auto& rec : journal) {
        if (const auto* row = std::get_if<sim::TraceRow>(&rec)) {
            ++msgs;
            if (!row->ok) ++dropped;
        } else if (std::get_if<sim::NxRow>(&rec)) {
            ++nx;
        }
    }
    uint64_t registered = 0, ok = 0, denied = 0;
    for (const auto& m : metrics) {
        if (m.bot_id) ++registered;
        ok += m.commands_ok;
        denied += m.commands_denied;
    }
    std::string out = "# Run summary\n\n";
    char buf[160];
    std::snprintf(buf, sizeof(buf), "- master_seed: %llu\n",
                  (unsigned long long)built.scenario.master_seed);
    out += buf;
    std::snprintf(buf, sizeof(buf), "- duration_ms: %llu\n",
                  (unsigned long long)built.scenario.duration_ms);
    out += buf;
    std::snprintf(buf, sizeof(buf), "- bots: %zu (registered %llu)\n",
                  built.bots.size(), (unsigned long long)registered);
    out += buf;
    std::snprintf(buf, sizeof(buf), "- servers: %llu initial, %zu total\n",
                  (unsigned long long)built.scenario.server_count,
                  built.botmaster->servers().size());
    out += buf;
    std::snprintf(buf, sizeof(buf), "- messages: %llu (%llu dropped)\n",
                  (unsigned long long)msgs, (unsigned long long)dropped);
    out += buf;
    std::snprintf(buf, sizeof(buf), "- nxdomain responses: %llu\n",
                  (unsigned long long)nx);
    out += buf;
    std::snprintf(buf, sizeof(buf), "- commands executed: %llu, denied: %llu\n",
                  (unsigned long long)ok, (unsigned long long)denied);
    out += buf;
    std::snprintf(buf, sizeof(buf), "- uploads acked: %llu (%llu payload bytes)\n",
                  (unsigned long long)built.botmaster->acked_uploads(),
                  (unsigned long long)built.botmaster->payload_bytes_received());
    out += buf;
    std::snprintf(buf, sizeof(buf), "- snapshot versions: %llu\n",
                  (unsigned long long)built.botmaster->snapshots().version_count());
    out += buf;
    out += "\nDetection scores and run-level overhead are in report.csv.\n";
    return out;
}

}  // namespace

void render_report_dir(const std::string& run_dir) {
    namespace fs = std::filesystem;
    Scenario sc = parse_scenario((fs::path(run_dir) / "scenario.json").string());

    std::vector<sim::TraceRow> trace;
    std::vector<Registrar::NxRecord> nx_log;
    std::map<uint64_t, std::string> device_of;  // bot_id -> device
    {
        std::string text = read_file((fs::path(run_dir) / "events.jsonl").string());
        size_t start = 0;
        while (start < text.size()) {
            size_t nl = text.find('\n', start);
            if (nl == std::string::npos) nl = text.size();
            if (nl > start) {
                json j = json::parse(text.substr(start, nl - start));
                std::string type = j.at("type").get<std::string>();
                if (type == "msg") {
                    trace.push_back({j.at("t").get<SimTime>(),
                                     j.at("src").get<std::string>(),
                                     j.at("dst").get<std::string>(),
                                     j.at("bytes").get<uint64_t>(),
                                     j.at("dir").get<std::string>(),
                                     j.at("tag").get<std::string>(),
                                     j.at("ok").get<bool>()});
                } else if (type == "nx") {
                    nx_log.push_back({j.at("t").get<SimTime>(),
                                      j.at("querier").get<std::string>(),
                                      j.at("domain").get<std::string>()});
                } else if (type == "registry") {
                    device_of[j.at("bot_id").get<uint64_t>()] =
                        j.at("device").get<std::string>();
                }
            }
            start = nl + 1;
        }
    }

    // Battery endpoints come from metrics.csv; hosts via the registry rows.
    detect::RunLevelInputs run;
    run.baseline_bytes_per_host = sc.baseline_bytes_per_host;
    run.horizon_ms = sc.duration_ms;
    {
        std::string text = read_file((fs::path(run_dir) / "metrics.csv").string());
        size_t start = text.find('\n');  // skip header
        while (start != std::string::npos && start + 1 < text.size()) {
            size_t nl = text.find('\n', start + 1);
            std::string line = text.substr(
                start + 1, nl == std::string::npos ? std::string::npos
                                                   : nl - start - 1);
            start = nl;
            if (line.empty()) continue;
            unsigned long long id, up, down, polls, nxm, cok, cden;
            double battery;
            if (std::sscanf(line.c_str(), "%llu,%llu,%llu,%llu,%llu,%llu,%llu,%lf",
                            &id, &up, &down, &polls, &nxm, &cok, &cden,
                            &battery) != 8)
                throw Error("malformed metrics.csv line: " + line);
            auto dev = device_of.find(id);
            if (dev == device_of.end()) continue;  // never registered
            run.battery_end_mah[dev->second] = battery;
        }
    }

    // Device -> profile mapping is deterministic from the scenario.
    {
        uint64_t total = sc.total_bots();
        uint64_t index = 0;
        for (const auto& group : sc.bots) {
            const auto& prof = sc.profiles.at(group.profile);
            for (uint64_t i = 0; i < group.count; ++i, ++index) {
                std::string dev = device_name(index, total);
                run.battery_capacity_mah[dev] = prof.battery_capacity_mah;
                run.baseline_drain_mah_per_h[dev] = prof.baseline_drain_mah_per_h;
                run.c2_bytes[dev] = 0;
            }
        }
        for (const auto& row : trace) {
            auto s = run.c2_bytes.find(row.src);
            if (s != run.c2_bytes.end()) s->second += row.bytes;
            auto d = run.c2_bytes.find(row.dst);
            if (d != run.c2_bytes.end()) d->second += row.bytes;
        }
        // Battery average only covers hosts present in metrics.csv.
        for (auto it = run.battery_end_mah.begin();
             it != run.battery_end_mah.end();) {
            if (!run.battery_capacity_mah.count(it->first))
                it = run.battery_end_mah.erase(it);
            else
                ++it;
        }
    }

    auto report = detect::build_report(trace, nx_log, sc.thresholds,
                                       sc.duration_ms, run);
    write_file((fs::path(run_dir) / "report.csv").string(),
               detect::render_report_csv(report));
}

void write_artifacts(BuiltSim& built, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    auto metrics = collect_metrics(built);
    write_file((fs::path(out_dir) / "events.jsonl").string(),
               render_events_jsonl(built.sim->journal()));
    write_file((fs::path(out_dir) / "metrics.csv").string(),
               render_metrics_csv(metrics));
    write_file((fs::path(out_dir) / "scenario.json").string(),
               scenario_to_json(built.scenario));
    render_report_dir(out_dir);
    write_file((fs::path(out_dir) / "summary.md").string(),
               render_summary(built, metrics));
}

void run_scenario_file(const std::string& path, const std::string& out_dir) {
    Scenario sc = parse_scenario(path);
    apply_env_seed(sc);
    std::string dir = out_dir;
    if (dir.empty() && sc.output_dir) dir = *sc.output_dir;
    if (dir.empty()) throw ConfigError("no output directory given");
    BuiltSim built = build_sim(sc);
    run_to_end(built);
    write_artifacts(built, dir);
}

}  // namespace fluxsim
