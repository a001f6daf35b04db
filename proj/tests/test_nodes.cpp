#include <set>

#include "doctest.h"
#include "fluxsim/nodes.hpp"
#include "fluxsim/runner.hpp"

using namespace fluxsim;
using namespace fluxsim::nodes;

namespace {

struct Recorder : sim::Node {
    Recorder(std::string name, sim::NodeKind kind)
        : Node(std::move(name), kind) {}
    void on_deliver(sim::Sim&, const sim::Delivery& d) override {
        received.push_back(d.msg);
    }
    std::vector<proto::Message> received;
};

Scenario small_scenario(uint64_t bots, uint64_t servers) {
    Scenario sc;
    sc.master_seed = 42;
    sc.duration_ms = 600'000;
    sc.alpha = 100;
    sc.beta = 10;
    sc.server_count = servers;
    sc.profiles = builtin_profiles();
    BotGroup g;
    g.count = bots;
    g.jitter.enabled = false;
    g.jitter.period_ms = 120'000;
    g.hop_interval_ms = 0;
    sc.bots = {g};
    return sc;
}

uint64_t count_rows(const BuiltSim& built, const std::string& tag,
                    const std::string& src = "", const std::string& dst = "") {
    uint64_t n = 0;
    for (const auto& row : sim::extract_trace(built.sim->journal())) {
        if (!tag.empty() && row.tag != tag) continue;
        if (!src.empty() && row.src != src) continue;
        if (!dst.empty() && row.dst != dst) continue;
        ++n;
    }
    return n;
}

}  // namespace

TEST_CASE("a fresh bot registers within one poll round trip") {
    auto built = build_sim(small_scenario(1, 1));
    built.sim->run_until(5'000);  // start at 1 s + SRR/RGR chain
    BotNode* bot = built.bots[0];
    CHECK(bot->phase() == BotPhase::Registered);
    CHECK(bot->bot_id() == 1);  // counter starts at 1
    REQUIRE(bot->current_server().has_value());
    CHECK(count_rows(built, "SRR", "bot001") == 1);
    CHECK(count_rows(built, "RGR", "", "bot001") == 1);
    // the lookup is instantaneous and the RGR travels bot->server->
    // botmaster->server->bot, so registration lands exactly four message
    // legs after the first tick
    REQUIRE(bot->acquisition_log().size() == 1);
    CHECK(bot->acquisition_log()[0].first ==
          1'000 + 4 * built.scenario.net.latency_ms);
}

TEST_CASE("duplicate registration is idempotent") {
    Scenario sc = small_scenario(1, 1);
    BotGroup& g = sc.bots[0];
    g.hop_interval_ms = 100'000;  // forces periodic re-registration
    sc.duration_ms = 500'000;
    auto built = build_sim(sc);
    run_to_end(built);
    CHECK(built.bots[0]->bot_id() == 1);
    CHECK(built.botmaster->registry().size() == 1);
    CHECK(count_rows(built, "SRR", "bot001") >= 2);
    // one registration, so exactly one snapshot mutation
    CHECK(built.botmaster->snapshots().version_count() == 2);
}

TEST_CASE("dispatch: matching id and ip sends the command and nothing else") {
    sim::Sim s(1);
    auto& bm = static_cast<Recorder&>(s.add_node(
        std::make_unique<Recorder>("botmaster", sim::NodeKind::Botmaster), 3));
    auto& srv = static_cast<ServerNode&>(
        s.add_node(std::make_unique<ServerNode>("s1", bm.address()), 2));
    auto& bot = static_cast<Recorder&>(
        s.add_node(std::make_unique<Recorder>("bot001", sim::NodeKind::Bot), 1));

    srv.seed({{3, bot.address(), proto::CommandKind::CaptureImage, 500, {}}}, {});
    s.send(bot, srv.address(), proto::Dcr{3, bot.address()});
    s.run_until(1'000);

    REQUIRE(bot.received.size() == 1);
    CHECK(std::holds_alternative<proto::Command>(bot.received[0]));
    CHECK(bm.received.empty());  // no RCIPB
    CHECK(srv.pending_rows().empty());
}

TEST_CASE("dispatch: changed ip updates the row and notifies the botmaster") {
    sim::Sim s(1);
    auto& bm = static_cast<Recorder&>(s.add_node(
        std::make_unique<Recorder>("botmaster", sim::NodeKind::Botmaster), 3));
    auto& srv = static_cast<ServerNode&>(
        s.add_node(std::make_unique<ServerNode>("s1", bm.address()), 2));
    auto& bot = static_cast<Recorder&>(
        s.add_node(std::make_unique<Recorder>("bot001", sim::NodeKind::Bot), 1));

    Address stale{0x0a090909};
    srv.seed({{3, stale, proto::CommandKind::RecordAudio, 600, {{"time", "60"}}}},
             {});
    s.send(bot, srv.address(), proto::Dcr{3, bot.address()});
    s.run_until(1'000);

    REQUIRE(bot.received.size() == 1);
    CHECK(std::holds_alternative<proto::Command>(bot.received[0]));
    REQUIRE(bm.received.size() == 1);
    const auto* rcipb = std::get_if<proto::Rcipb>(&bm.received[0]);
    REQUIRE(rcipb != nullptr);
    CHECK(rcipb->bot_id == 3);
    CHECK(rcipb->new_ip == bot.address());
}

TEST_CASE("dispatch: unmatched id answers NothingForYou") {
    sim::Sim s(1);
    auto& bm = static_cast<Recorder&>(s.add_node(
        std::make_unique<Recorder>("botmaster", sim::NodeKind::Botmaster), 3));
    auto& srv = static_cast<ServerNode&>(
        s.add_node(std::make_unique<ServerNode>("s1", bm.address()), 2));
    auto& bot = static_cast<Recorder&>(
        s.add_node(std::make_unique<Recorder>("bot001", sim::NodeKind::Bot), 1));

    srv.seed({{3, bot.address(), proto::CommandKind::CaptureImage, 500, {}}}, {});
    s.send(bot, srv.address(), proto::Dcr{99, bot.address()});
    s.run_until(1'000);

    REQUIRE(bot.received.size() == 1);
    CHECK(std::holds_alternative<proto::NothingForYou>(bot.received[0]));
    CHECK(srv.pending_rows().size() == 1);  // row not consumed
}

TEST_CASE("command execution synthesizes payloads per kind") {
    Scenario sc = small_scenario(1, 1);
    sc.schedule.push_back({30'000, {1}, 0, proto::CommandKind::GrabGpsLocation, {}});
    auto built = build_sim(sc);
    run_to_end(built);
    BotNode* bot = built.bots[0];
    CHECK(bot->metrics().commands_ok == 1);
    CHECK(bot->command_db().empty());  // sanitized after the ack
    CHECK(built.botmaster->payload_bytes_received() == 128);
    CHECK(bot->storage_free() == bot->config().profile.storage_free_bytes);
}

TEST_CASE("audio payload compresses at the configured ratio") {
    Scenario sc = small_scenario(1, 1);
    sc.schedule.push_back(
        {30'000, {1}, 0, proto::CommandKind::RecordAudio, {{"time", "60"}}});
    auto built = build_sim(sc);
    run_to_end(built);
    CHECK(built.botmaster->payload_bytes_received() == 100'000);  // 1 MB * 0.10
}

TEST_CASE("image payload compresses at the JPEG ratio") {
    Scenario sc = small_scenario(1, 1);
    sc.schedule.push_back({30'000, {1}, 0, proto::CommandKind::CaptureImage, {}});
    auto built = build_sim(sc);
    run_to_end(built);
    CHECK(built.botmaster->payload_bytes_received() == 800'000);  // 2 MB * 0.40
}

TEST_CASE("NOTIFY_DENY leaves records pending and counts one denial each") {
    Scenario sc = small_scenario(1, 1);
    sc.bots[0].profile = "notify_deny";
    sc.schedule.push_back({30'000, {1}, 0, proto::CommandKind::CaptureImage, {}});
    sc.schedule.push_back({90'000, {1}, 0, proto::CommandKind::GrabGpsLocation, {}});
    auto built = build_sim(sc);
    run_to_end(built);
    BotNode* bot = built.bots[0];
    CHECK(bot->metrics().commands_ok == 0);
    CHECK(bot->metrics().commands_denied == 2);
    REQUIRE(bot->command_db().size() == 2);
    for (const auto& rec : bot->command_db())
        CHECK(rec.status == CommandStatus::Pending);
}

TEST_CASE("a missing sensor fails the command in place") {
    Scenario sc = small_scenario(1, 1);
    nodes::DeviceProfile p = sc.profiles.at("default");
    p.name = "no_camera";
    p.sensors = {Sensor::Mic, Sensor::Gps};
    sc.profiles["no_camera"] = p;
    sc.bots[0].profile = "no_camera";
    sc.schedule.push_back({30'000, {1}, 0, proto::CommandKind::CaptureImage, {}});
    auto built = build_sim(sc);
    run_to_end(built);
    BotNode* bot = built.bots[0];
    CHECK(bot->metrics().commands_failed == 1);
    CHECK(bot->metrics().commands_ok == 0);
}

TEST_CASE("battery gate silences the bot below the threshold") {
    Scenario sc = small_scenario(1, 1);
    nodes::DeviceProfile p = sc.profiles.at("default");
    p.name = "lowbat";
    p.battery_level_mah = 155;  // 5% of 3100, threshold is 20%
    sc.profiles["lowbat"] = p;
    sc.bots[0].profile = "lowbat";
    auto built = build_sim(sc);
    run_to_end(built);
    CHECK(count_rows(built, "", "bot001") == 0);
    CHECK(built.bots[0]->metrics().polls == 0);
}

TEST_CASE("the 12-hour drain model reproduces the published endpoints") {
    Scenario sc = small_scenario(1, 1);
    sc.duration_ms = 43'200'000;  // 12 h
    sc.bots[0].jitter.period_ms = 600'000;
    auto built = build_sim(sc);
    run_to_end(built);
    double end = built.bots[0]->battery_at(sc.duration_ms);
    // 3100 - (59.1667 + 12.5) * 12 = 2240, the with-bot endpoint
    CHECK(end == doctest::Approx(2240.0).epsilon(0.001));
    // baseline-only drain lands on the without-bot endpoint
    CHECK(3100.0 - 59.1667 * 12 == doctest::Approx(2390.0).epsilon(0.001));
}

TEST_CASE("hopping moves the bot to a different live server") {
    Scenario sc = small_scenario(1, 2);
    sc.bots[0].hop_interval_ms = 60'000;
    sc.duration_ms = 400'000;
    auto built = build_sim(sc);
    run_to_end(built);
    const auto& log = built.bots[0]->acquisition_log();
    REQUIRE(log.size() >= 3);
    for (size_t i = 1; i < log.size(); ++i)
        CHECK(log[i].second != log[i - 1].second);  // exclusion forces a switch
}

TEST_CASE("with a single server the hop falls back to it") {
    Scenario sc = small_scenario(1, 1);
    sc.bots[0].hop_interval_ms = 60'000;
    sc.duration_ms = 300'000;
    auto built = build_sim(sc);
    run_to_end(built);
    const auto& log = built.bots[0]->acquisition_log();
    REQUIRE(log.size() >= 2);
    for (size_t i = 1; i < log.size(); ++i)
        CHECK(log[i].second == log[0].second);
}

TEST_CASE("re-acquisition cadence respects the hop interval") {
    Scenario sc = small_scenario(3, 2);
    sc.bots[0].hop_interval_ms = 90'000;
    sc.bots[0].jitter.enabled = true;
    sc.bots[0].jitter.min_ms = 10'000;
    sc.bots[0].jitter.max_ms = 60'000;
    sc.duration_ms = 700'000;
    auto built = build_sim(sc);
    run_to_end(built);
    for (BotNode* bot : built.bots) {
        const auto& log = bot->acquisition_log();
        REQUIRE(log.size() >= 2);
        for (size_t i = 1; i < log.size(); ++i)
            CHECK(log[i].first - log[i - 1].first <=
                  90'000 + 60'000 + 4 * built.scenario.net.latency_ms);
    }
}

TEST_CASE("bots never talk to the botmaster directly") {
    Scenario sc = small_scenario(4, 2);
    sc.bots[0].hop_interval_ms = 100'000;
    sc.schedule.push_back({60'000, {}, 4, proto::CommandKind::CaptureImage, {}});
    auto built = build_sim(sc);
    run_to_end(built);
    std::set<std::string> bot_names;
    for (BotNode* b : built.bots) bot_names.insert(b->name());
    for (const auto& row : sim::extract_trace(built.sim->journal())) {
        if (bot_names.count(row.src)) CHECK(row.dst != "botmaster");
    }
}

TEST_CASE("every command row is pulled: preceded by a DCR from that bot") {
    Scenario sc = small_scenario(5, 2);
    sc.schedule.push_back({60'000, {}, 5, proto::CommandKind::GrabGpsLocation, {}});
    auto built = build_sim(sc);
    run_to_end(built);
    auto trace = sim::extract_trace(built.sim->journal());
    for (size_t i = 0; i < trace.size(); ++i) {
        if (trace[i].tag != "COMMAND") continue;
        bool preceded = false;
        for (size_t k = 0; k < i; ++k)
            if (trace[k].tag == "DCR" && trace[k].src == trace[i].dst &&
                trace[k].dst == trace[i].src)
                preceded = true;
        CHECK(preceded);
    }
}

TEST_CASE("a poll before any publication earns NothingForYou") {
    Scenario sc = small_scenario(1, 1);
    sc.schedule.push_back({400'000, {1}, 0, proto::CommandKind::CaptureImage, {}});
    auto built = build_sim(sc);
    built.sim->run_until(200'000);
    CHECK(count_rows(built, "NOTHING_FOR_YOU", "s1", "bot001") >= 1);
    CHECK(count_rows(built, "COMMAND") == 0);
}

TEST_CASE("publishing to no registered targets warns and stays silent") {
    Scenario sc = small_scenario(1, 1);
    sc.schedule.push_back({30'000, {99}, 0, proto::CommandKind::CaptureImage, {}});
    auto built = build_sim(sc);
    run_to_end(built);
    CHECK(count_rows(built, "PUBLISH_COMMAND") == 0);
    bool warned = false;
    for (const auto& rec : built.sim->journal())
        if (const auto* w = std::get_if<sim::WarnRow>(&rec))
            if (w->msg.find("no registered targets") != std::string::npos)
                warned = true;
    CHECK(warned);
}

TEST_CASE("server death strands the upload until the replacement acks it") {
    // Fixed 120 s polls, bot001 starts at 1 s: pull happens at exactly
    // 241 s. The takedown lands between the upload send and its delivery.
    Scenario sc = small_scenario(1, 1);
    sc.schedule.push_back({150'000, {1}, 0, proto::CommandKind::CaptureImage, {}});
    sc.faults.push_back({ScenarioFault::Kind::ServerTakedown, 0, "", 241'250, 0});
    sc.duration_ms = 600'000;
    auto built = build_sim(sc);
    run_to_end(built);

    BotNode* bot = built.bots[0];
    CHECK(bot->metrics().commands_ok == 1);
    CHECK(bot->command_db().empty());
    CHECK(built.botmaster->acked_uploads() == 1);
    // the retried upload went to the replacement server
    CHECK(count_rows(built, "UPLOAD", "bot001", "s2") == 1);
    CHECK(count_rows(built, "RCAD", "s2", "bot001") == 1);
}

TEST_CASE("a bot with a changed ip misses the RCAd but recovers by hopping") {
    Scenario sc = small_scenario(2, 1);
    sc.bots[0].hop_interval_ms = 400'000;
    sc.duration_ms = 900'000;
    // bot002's address rotates after registration, so the registry ip is
    // stale and the replacement's RCAd cannot reach it
    sc.faults.push_back({ScenarioFault::Kind::IpReassign, 0, "bot002", 60'000, 0});
    sc.faults.push_back({ScenarioFault::Kind::ServerTakedown, 0, "", 100'000, 0});
    auto built = build_sim(sc);
    run_to_end(built);

    uint64_t rcad_dropped = 0;
    for (const auto& row : sim::extract_trace(built.sim->journal()))
        if (row.tag == "RCAD" && !row.ok) ++rcad_dropped;
    CHECK(rcad_dropped == 1);  // the unicast to the stale address

    BotNode* stale = built.bots[1];
    REQUIRE(stale->name() == "bot002");
    CHECK(stale->phase() == BotPhase::Registered);
    const auto& log = stale->acquisition_log();
    REQUIRE(log.size() >= 2);  // initial acquisition plus the hop recovery
    sim::Node* holder = built.sim->holder_of(log.back().second);
    REQUIRE(holder != nullptr);
    CHECK(holder->name() == "s2");  // the replacement server
    CHECK(holder->up());
}

TEST_CASE("the live registry always matches the latest snapshot version") {
    Scenario sc = small_scenario(6, 2);
    sc.schedule.push_back({60'000, {}, 6, proto::CommandKind::GrabGpsLocation, {}});
    sc.faults.push_back({ScenarioFault::Kind::IpReassign, 0, "bot003", 30'000, 0});
    auto built = build_sim(sc);
    run_to_end(built);
    const auto& bm = *built.botmaster;
    auto snapshot = bm.snapshots().materialize(bm.current_version());
    REQUIRE(snapshot.size() == bm.registry().size());
    for (const auto& [id, rec] : bm.registry()) {
        REQUIRE(snapshot.count(id) == 1);
        CHECK(snapshot.at(id) == rec);
    }
}

TEST_CASE("no bot stays on one server longer than hop plus one poll period") {
    Scenario sc = small_scenario(4, 2);
    sc.bots[0].hop_interval_ms = 120'000;
    sc.duration_ms = 900'000;
    auto built = build_sim(sc);
    run_to_end(built);
    SimTime bound = 120'000 + sc.bots[0].jitter.period_ms +
                    4 * sc.net.latency_ms;
    auto trace = sim::extract_trace(built.sim->journal());
    for (BotNode* bot : built.bots) {
        std::string current;
        SimTime span_start = 0;
        for (const auto& row : trace) {
            if (row.src != bot->name()) continue;
            if (row.dst != current) {
                current = row.dst;
                span_start = row.t;
            }
            CHECK(row.t - span_start <= bound);
        }
    }
}

TEST_CASE("compromise restores the registry from the snapshot tree") {
    Scenario sc = small_scenario(5, 1);
    sc.faults.push_back({ScenarioFault::Kind::BotmasterCompromise, 0, "", 60'000, 0});
    sc.duration_ms = 180'000;
    auto built = build_sim(sc);
    run_to_end(built);

    // independent replay of the journal's registry rows up to the fault
    std::map<uint64_t, RegistryRecord> oracle;
    bool restored = false;
    for (const auto& rec : built.sim->journal()) {
        if (const auto* r = std::get_if<sim::RegistryRow>(&rec)) {
            if (r->t > 60'000) continue;
            if (r->op == "add")
                oracle[r->bot_id] = RegistryRecord{r->device, r->ip, r->t};
            else if (r->op == "update_ip")
                oracle[r->bot_id].ip = r->ip;
        } else if (std::get_if<sim::RestoreRow>(&rec)) {
            restored = true;
        }
    }
    CHECK(restored);
    REQUIRE(built.botmaster->registry().size() == oracle.size());
    for (const auto& [id, rec] : oracle) {
        const auto& live = built.botmaster->registry().at(id);
        CHECK(live.device_id == rec.device_id);
        CHECK(live.ip == rec.ip);
    }
    CHECK(built.botmaster->next_bot_id() == 6);
}

TEST_CASE("spam SMS delivery decodes into an executed command") {
    auto table = std::make_shared<proto::SmsTemplateTable>();
    table->add("Your voicemail box is almost full. Listen at {P} today",
               proto::CommandKind::RecordAudio);

    sim::Sim s(1);
    auto domains = std::make_shared<const dga::DomainList>(dga::generate_domains(
        dga::DgaSeed{"s1", dga::Date{2021, 1, 1}}, 10, {"com"}));
    BotConfig cfg;
    cfg.device_id = "bot001";
    cfg.domains = domains;
    cfg.window = dga::WindowConfig::make(10, 1);
    cfg.sms_templates = table;
    auto bot_ptr = std::make_unique<BotNode>(cfg, 1);
    BotNode* bot = bot_ptr.get();
    s.add_node(std::move(bot_ptr), 1);
    auto& sender = static_cast<Recorder&>(s.add_node(
        std::make_unique<Recorder>("gateway", sim::NodeKind::Server), 2));

    Xorshift64Star rng(9);
    auto sms = proto::sms_encode(proto::CommandKind::RecordAudio,
                                 {{"time", "120"}}, *table, rng);
    s.send(sender, bot->address(), sms);
    s.send(sender, bot->address(), proto::SpamSms{"win a free cruise now"});
    s.run_until(1'000);

    REQUIRE(bot->command_db().size() == 1);  // spam was discarded
    const auto& rec = bot->command_db()[0];
    CHECK(rec.kind == proto::CommandKind::RecordAudio);
    CHECK(rec.status == CommandStatus::HalfExecuted);  // no server to upload to
    CHECK(rec.compressed_size == 200'000);             // 2 MB audio at 0.10
}
