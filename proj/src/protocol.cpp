#include "fluxsim/protocol.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace fluxsim::proto {

namespace {

constexpr char kHex[] = "0123456789ABCDEF";

// '%', '=' and newline carry structure in the body; everything else,
// including arbitrary UTF-8, passes through untouched.
std::string escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (unsigned char c : s) {
        if (c == '%' || c == '=' || c == '\n') {
            out.push_back('%');
            out.push_back(kHex[c >> 4]);
            out.push_back(kHex[c & 0xf]);
        } else {
            out.push_back(static_cast<char>(c));
        }
    }
    return out;
}

int hex_val(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
}

std::string unescape(const std::string& s, size_t err_offset) {
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '%') {
            out.push_back(s[i]);
            continue;
        }
        if (i + 2 >= s.size() || hex_val(s[i + 1]) < 0 || hex_val(s[i + 2]) < 0)
            throw DecodeError(err_offset + i, "bad escape sequence");
        out.push_back(static_cast<char>(hex_val(s[i + 1]) * 16 + hex_val(s[i + 2])));
        i += 2;
    }
    return out;
}

uint64_t parse_u64(const std::string& s, size_t err_offset) {
    uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty())
        throw DecodeError(err_offset, "bad integer: " + s);
    return v;
}

// Key-sorted body assembly; the sort makes encoding canonical.
class BodyWriter {
public:
    void field(const std::string& key, const std::string& value) {
        lines_.push_back(escape(key) + "=" + escape(value));
    }
    void field(const std::string& key, uint64_t value) {
        field(key, std::to_string(value));
    }
    void field(const std::string& key, Address value) {
        field(key, fluxsim::to_string(value));
    }
    void map(const std::string& prefix, const ParamMap& m) {
        for (const auto& [k, v] : m) field(prefix + "." + k, v);
    }
    std::string finish() {
        std::sort(lines_.begin(), lines_.end());
        std::string body;
        for (size_t i = 0; i < lines_.size(); ++i) {
            if (i) body.push_back('\n');
            body += lines_[i];
        }
        return body;
    }

private:
    std::vector<std::string> lines_;
};

class BodyReader {
public:
    BodyReader(const std::string& body, size_t base_offset) : base_(base_offset) {
        if (body.empty()) return;
        size_t start = 0;
        while (true) {
            size_t nl = body.find('\n', start);
            std::string line = body.substr(start, nl == std::string::npos
                                                      ? std::string::npos
                                                      : nl - start);
            size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw DecodeError(base_ + start, "missing '=' in body line");
            std::string key = unescape(line.substr(0, eq), base_ + start);
            std::string val = unescape(line.substr(eq + 1), base_ + start + eq + 1);
            if (!fields_.emplace(key, std::move(val)).second)
                throw DecodeError(base_ + start, "duplicate field: " + key);
            if (nl == std::string::npos) break;
            start = nl + 1;
        }
    }

    std::string take(const std::string& key) {
        auto it = fields_.find(key);
        if (it == fields_.end())
            throw DecodeError(base_, "missing field: " + key);
        std::string v = std::move(it->second);
        fields_.erase(it);
        return v;
    }
    uint64_t take_u64(const std::string& key) { return parse_u64(take(key), base_); }
    Address take_addr(const std::string& key) {
        try {
            return parse_address(take(key));
        } catch (const ValidationError& e) {
            throw DecodeError(base_, e.what());
        }
    }

    // Consumes every "prefix.<key>" field.
    ParamMap take_map(const std::string& prefix) {
        ParamMap out;
        std::string want = prefix + ".";
        for (auto it = fields_.begin(); it != fields_.end();) {
            if (it->first.rfind(want, 0) == 0) {
                out.emplace(it->first.substr(want.size()), std::move(it->second));
                it = fields_.erase(it);
            } else {
                ++it;
            }
        }
        return out;
    }

    void expect_empty() const {
        if (!fields_.empty())
            throw DecodeError(base_, "unexpected field: " + fields_.begin()->first);
    }

private:
    size_t base_;
    std::map<std::string, std::string> fields_;
};

}  // namespace

const char* to_string(CommandKind k) {
    switch (k) {
        case CommandKind::CaptureImage: return "CAPTURE_IMAGE";
        case CommandKind::RecordAudio: return "RECORD_AUDIO";
        case CommandKind::RecordVoiceCall: return "RECORD_VOICE_CALL";
        case CommandKind::GrabGpsLocation: return "GRAB_GPS_LOCATION";
    }
    return "?";
}

CommandKind command_kind_from_string(const std::string& s) {
    if (s == "CAPTURE_IMAGE") return CommandKind::CaptureImage;
    if (s == "RECORD_AUDIO") return CommandKind::RecordAudio;
    if (s == "RECORD_VOICE_CALL") return CommandKind::RecordVoiceCall;
    if (s == "GRAB_GPS_LOCATION") return CommandKind::GrabGpsLocation;
    throw DecodeError(0, "unknown command kind: " + s);
}

const char* tag_name(const Message& m) {
    static constexpr const char* kNames[] = {
        "SRR", "RGR", "DCR", "COMMAND", "NOTHING_FOR_YOU", "RCIPB",
        "RCAD", "PUBLISH_COMMAND", "UPLOAD", "UPLOAD_ACK", "SPAM_SMS"};
    return kNames[m.index()];
}

std::vector<uint8_t> encode(const Message& m) {
    BodyWriter w;
    std::visit(
        [&](const auto& msg) {
            using T = std::decay_t<decltype(msg)>;
            if constexpr (std::is_same_v<T, Srr>) {
                w.field("device_id", msg.device_id);
                w.map("details", msg.device_details);
            } else if constexpr (std::is_same_v<T, Rgr>) {
                w.field("device_id", msg.device_id);
                w.field("assigned_bot_id", msg.assigned_bot_id);
            } else if constexpr (std::is_same_v<T, Dcr>) {
                w.field("bot_id", msg.bot_id);
                w.field("bot_ip", msg.bot_ip);
            } else if constexpr (std::is_same_v<T, Command>) {
                w.field("kind", std::string(to_string(msg.kind)));
                w.field("timestamp", msg.timestamp);
                w.map("params", msg.params);
                w.field("upload_ip", msg.upload_ip);
            } else if constexpr (std::is_same_v<T, NothingForYou>) {
                // empty body
            } else if constexpr (std::is_same_v<T, Rcipb>) {
                w.field("bot_id", msg.bot_id);
                w.field("new_ip", msg.new_ip);
            } else if constexpr (std::is_same_v<T, Rcad>) {
                w.field("new_server_address", msg.new_server_address);
            } else if constexpr (std::is_same_v<T, PublishCommand>) {
                w.field("kind", std::string(to_string(msg.kind)));
                w.field("timestamp", msg.timestamp);
                w.map("params", msg.params);
                for (size_t i = 0; i < msg.targets.size(); ++i) {
                    std::string p = "targets." + std::to_string(i);
                    w.field(p + ".bot_id", msg.targets[i].bot_id);
                    w.field(p + ".ip", msg.targets[i].bot_ip);
                }
            } else if constexpr (std::is_same_v<T, Upload>) {
                w.field("bot_id", msg.bot_id);
                w.field("unique_id", msg.unique_id);
                w.field("payload_bytes", msg.payload_bytes);
                w.field("compressed", std::string(msg.compressed ? "1" : "0"));
            } else if constexpr (std::is_same_v<T, UploadAck>) {
                w.field("unique_id", msg.unique_id);
            } else if constexpr (std::is_same_v<T, SpamSms>) {
                w.field("text", msg.text);
            }
        },
        m);

    std::string body = w.finish();
    std::vector<uint8_t> out;
    out.reserve(5 + body.size());
    out.push_back(static_cast<uint8_t>(m.index() + 1));
    uint32_t len = static_cast<uint32_t>(body.size());
    out.push_back(static_cast<uint8_t>(len >> 24));
    out.push_back(static_cast<uint8_t>(len >> 16));
    out.push_back(static_cast<uint8_t>(len >> 8));
    out.push_back(static_cast<uint8_t>(len));
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

Message decode(const std::vector<uint8_t>& bytes) {
    if (bytes.empty()) throw DecodeError(0, "empty frame");
    if (bytes.size() < 5) throw DecodeError(bytes.size(), "truncated frame header");
    uint8_t tag = bytes[0];
    if (tag < 1 || tag > 11) throw DecodeError(0, "unknown tag " + std::to_string(tag));
    uint32_t len = (uint32_t(bytes[1]) << 24) | (uint32_t(bytes[2]) << 16) |
                   (uint32_t(bytes[3]) << 8) | uint32_t(bytes[4]);
    if (bytes.size() != 5u + len)
        throw DecodeError(5, "frame length mismatch: header says " +
                                 std::to_string(len) + ", have " +
                                 std::to_string(bytes.size() - 5));
    std::string body(bytes.begin() + 5, bytes.end());
    BodyReader r(body, 5);

    Message out;
    switch (tag) {
        case 1: {
            Srr m;
            m.device_id = r.take("device_id");
            m.device_details = r.take_map("details");
            out = std::move(m);
            break;
        }
        case 2: {
            Rgr m;
            m.device_id = r.take("device_id");
            m.assigned_bot_id = r.take_u64("assigned_bot_id");
            out = std::move(m);
            break;
        }
        case 3: {
            Dcr m;
            m.bot_id = r.take_u64("bot_id");
            m.bot_ip = r.take_addr("bot_ip");
            out = m;
            break;
        }
        case 4: {
            Command m;
            m.kind = command_kind_from_string(r.take("kind"));
            m.timestamp = r.take_u64("timestamp");
            m.params = r.take_map("params");
            m.upload_ip = r.take_addr("upload_ip");
            out = std::move(m);
            break;
        }
        case 5:
            out = NothingForYou{};
            break;
        case 6: {
            Rcipb m;
            m.bot_id = r.take_u64("bot_id");
            m.new_ip = r.take_addr("new_ip");
            out = m;
            break;
        }
        case 7: {
            Rcad m;
            m.new_server_address = r.take_addr("new_server_address");
            out = m;
            break;
        }
        case 8: {
            PublishCommand m;
            m.kind = command_kind_from_string(r.take("kind"));
            m.timestamp = r.take_u64("timestamp");
            m.params = r.take_map("params");
            for (uint64_t i = 0;; ++i) {
                std::string p = "targets." + std::to_string(i);
                ParamMap t = r.take_map(p);
                if (t.empty()) break;
                auto id = t.find("bot_id");
                auto ip = t.find("ip");
                if (id == t.end() || ip == t.end() || t.size() != 2)
                    throw DecodeError(5, "malformed target " + std::to_string(i));
                PublishCommand::Target tgt;
                tgt.bot_id = parse_u64(id->second, 5);
                try {
                    tgt.bot_ip = parse_address(ip->second);
                } catch (const ValidationError& e) {
                    throw DecodeError(5, e.what());
                }
                m.targets.push_back(tgt);
            }
            out = std::move(m);
            break;
        }
        case 9: {
            Upload m;
            m.bot_id = r.take_u64("bot_id");
            m.unique_id = r.take("unique_id");
            m.payload_bytes = r.take_u64("payload_bytes");
            std::string c = r.take("compressed");
            if (c != "0" && c != "1") throw DecodeError(5, "bad flag: " + c);
            m.compressed = c == "1";
            out = std::move(m);
            break;
        }
        case 10: {
            UploadAck m;
            m.unique_id = r.take("unique_id");
            out = std::move(m);
            break;
        }
        case 11: {
            SpamSms m;
            m.text = r.take("text");
            out = std::move(m);
            break;
        }
    }
    r.expect_empty();
    return out;
}

std::string base64_encode(const std::string& raw) {
    static constexpr char kAlphabet[] =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((raw.size() + 2) / 3 * 4);
    size_t i = 0;
    while (i + 3 <= raw.size()) {
        uint32_t v = (uint8_t(raw[i]) << 16) | (uint8_t(raw[i + 1]) << 8) |
                     uint8_t(raw[i + 2]);
        out.push_back(kAlphabet[(v >> 18) & 63]);
        out.push_back(kAlphabet[(v >> 12) & 63]);
        out.push_back(kAlphabet[(v >> 6) & 63]);
        out.push_back(kAlphabet[v & 63]);
        i += 3;
    }
    size_t rest = raw.size() - i;
    if (rest == 1) {
        uint32_t v = uint8_t(raw[i]) << 16;
        out.push_back(kAlphabet[(v >> 18) & 63]);
        out.push_back(kAlphabet[(v >> 12) & 63]);
        out.push_back('=');
        out.push_back('=');
    } else if (rest == 2) {
        uint32_t v = (uint8_t(raw[i]) << 16) | (uint8_t(raw[i + 1]) << 8);
        out.push_back(kAlphabet[(v >> 18) & 63]);
        out.push_back(kAlphabet[(v >> 12) & 63]);
        out.push_back(kAlphabet[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

std::string base64_decode(const std::string& b64) {
    auto val = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    if (b64.size() % 4 != 0) throw DecodeError(b64.size(), "base64 length not a multiple of 4");
    std::string out;
    out.reserve(b64.size() / 4 * 3);
    for (size_t i = 0; i < b64.size(); i += 4) {
        int pad = 0;
        uint32_t v = 0;
        for (size_t k = 0; k < 4; ++k) {
            char c = b64[i + k];
            if (c == '=') {
                // padding only in the last two positions of the final group
                if (i + 4 != b64.size() || k < 2) throw DecodeError(i + k, "bad base64 padding");
                ++pad;
                v <<= 6;
            } else {
                if (pad) throw DecodeError(i + k, "data after base64 padding");
                int d = val(c);
                if (d < 0) throw DecodeError(i + k, "bad base64 character");
                v = (v << 6) | uint32_t(d);
            }
        }
        out.push_back(static_cast<char>((v >> 16) & 0xff));
        if (pad < 2) out.push_back(static_cast<char>((v >> 8) & 0xff));
        if (pad < 1) out.push_back(static_cast<char>(v & 0xff));
    }
    return out;
}

namespace {

// %-escape of '%', '=' and ';' inside parameter keys/values.
std::string param_escape(const std::string& s) {
    std::string out;
    for (unsigned char c : s) {
        if (c == '%' || c == '=' || c == ';') {
            out.push_back('%');
            out.push_back(kHex[c >> 4]);
            out.push_back(kHex[c & 0xf]);
        } else {
            out.push_back(static_cast<char>(c));
        }
    }
    return out;
}

}  // namespace

std::string canonical_params(const ParamMap& params) {
    std::string out;
    bool first = true;
    for (const auto& [k, v] : params) {  // std::map is already key-sorted
        if (!first) out.push_back(';');
        first = false;
        out += param_escape(k);
        out.push_back('=');
        out += param_escape(v);
    }
    return out;
}

ParamMap parse_params(const std::string& canonical) {
    ParamMap out;
    if (canonical.empty()) return out;
    size_t start = 0;
    while (true) {
        size_t semi = canonical.find(';', start);
        std::string entry = canonical.substr(
            start, semi == std::string::npos ? std::string::npos : semi - start);
        size_t eq = entry.find('=');
        if (eq == std::string::npos)
            throw DecodeError(start, "parameter entry without '='");
        out[unescape(entry.substr(0, eq), start)] =
            unescape(entry.substr(eq + 1), start + eq + 1);
        if (semi == std::string::npos) break;
        start = semi + 1;
    }
    return out;
}

std::string canonical_sms_text(const std::string& text) {
    std::string out;
    bool in_space = true;  // leading whitespace dropped
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            in_space = true;
            continue;
        }
        if (in_space && !out.empty()) out.push_back(' ');
        in_space = false;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

uint64_t template_hash(const std::string& template_text) {
    std::string stripped = template_text;
    size_t pos = stripped.find("{P}");
    if (pos != std::string::npos) stripped.erase(pos, 3);
    return fnv1a64(canonical_sms_text(stripped));
}

void SmsTemplateTable::add(const std::string& template_text, CommandKind kind) {
    size_t first = template_text.find("{P}");
    if (first == std::string::npos ||
        template_text.find("{P}", first + 1) != std::string::npos)
        throw ConfigError("template must contain exactly one {P} slot: " +
                          template_text);
    uint64_t h = template_hash(template_text);
    auto it = index_.find(h);
    if (it != index_.end() && it->second != kind)
        throw ConfigError("template hash collision across commands: " +
                          template_text);
    index_[h] = kind;
    entries_.push_back({template_text, kind});
}

std::optional<CommandKind> SmsTemplateTable::kind_for_hash(uint64_t hash) const {
    auto it = index_.find(hash);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::vector<size_t> SmsTemplateTable::entries_for(CommandKind kind) const {
    std::vector<size_t> out;
    for (size_t i = 0; i < entries_.size(); ++i)
        if (entries_[i].kind == kind) out.push_back(i);
    return out;
}

SmsTemplateTable SmsTemplateTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open template table: " + path);
    SmsTemplateTable table;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": expected COMMAND_KIND<TAB>template");
        CommandKind kind;
        try {
            kind = command_kind_from_string(line.substr(0, tab));
        } catch (const DecodeError& e) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        table.add(line.substr(tab + 1), kind);
    }
    return table;
}

SpamSms sms_encode(CommandKind kind, const ParamMap& params,
                   const SmsTemplateTable& table, Xorshift64Star& rng) {
    std::vector<size_t> candidates = table.entries_for(kind);
    if (candidates.empty())
        throw EncodingError(std::string("no template for ") + to_string(kind));
    const auto& entry = table.entries()[candidates[rng.next_below(candidates.size())]];
    std::string slot = base64_encode(canonical_params(params));
    std::string rendered = entry.template_text;
    rendered.replace(rendered.find("{P}"), 3, slot);
    if (rendered.size() > 160)
        throw EncodingError("rendered SMS exceeds 160 characters (" +
                            std::to_string(rendered.size()) + ")");
    return SpamSms{rendered};
}

std::optional<SmsDecodeResult> sms_decode(const SpamSms& sms,
                                          const SmsTemplateTable& table) {
    // Whitespace-collapsed but case-preserving copy: matching is done on a
    // lowercased view, the Base64 slot is cut from this one.
    std::string collapsed;
    {
        bool in_space = true;
        for (unsigned char c : sms.text) {
            if (std::isspace(c)) {
                in_space = true;
                continue;
            }
            if (in_space && !collapsed.empty()) collapsed.push_back(' ');
            in_space = false;
            collapsed.push_back(static_cast<char>(c));
        }
    }
    std::string lowered = collapsed;
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return std::tolower(c); });

    bool matched_any = false;
    for (const auto& entry : table.entries()) {
        std::string canon = canonical_sms_text(entry.template_text);
        size_t slot_pos = canon.find("{p}");
        if (slot_pos == std::string::npos) continue;
        std::string prefix = canon.substr(0, slot_pos);
        std::string suffix = canon.substr(slot_pos + 3);

        std::string slot;
        if (lowered.size() > prefix.size() + suffix.size() &&
            lowered.compare(0, prefix.size(), prefix) == 0 &&
            lowered.compare(lowered.size() - suffix.size(), suffix.size(),
                            suffix) == 0) {
            slot = collapsed.substr(prefix.size(),
                                    collapsed.size() - prefix.size() - suffix.size());
        } else {
            // Empty slot: the whitespace around {P} merges when rendered.
            std::string merged = prefix;
            if (!merged.empty() && merged.back() == ' ' && !suffix.empty() &&
                suffix.front() == ' ')
                merged += suffix.substr(1);
            else
                merged += suffix;
            while (!merged.empty() && merged.back() == ' ') merged.pop_back();
            while (!merged.empty() && merged.front() == ' ') merged.erase(0, 1);
            if (lowered != merged) continue;
        }

        // Hash of the remainder (message with the slot excised, canonical
        // form) is what the table indexed at load time.
        auto kind = table.kind_for_hash(fnv1a64(canonical_sms_text(prefix + suffix)));
        if (!kind) continue;
        matched_any = true;
        try {
            return SmsDecodeResult{*kind, parse_params(base64_decode(slot))};
        } catch (const DecodeError&) {
            continue;  // maybe another template matches cleanly
        }
    }
    if (matched_any)
        throw DecodeError(0, "matched template but slot is not valid Base64");
    return std::nullopt;  // NotForUs
}

std::string make_unique_id(const std::string& device_id, SimTime timestamp) {
    if (device_id.empty())
        throw ValidationError("device_id must not be empty");
    if (device_id.find('-') != std::string::npos)
        throw ValidationError("device_id must not contain '-': " + device_id);
    return device_id + "-" + std::to_string(timestamp);
}

std::pair<std::string, SimTime> parse_unique_id(const std::string& uid) {
    size_t dash = uid.find('-');
    if (dash == std::string::npos || dash == 0 || dash + 1 == uid.size())
        throw ValidationError("malformed unique id: " + uid);
    std::string dev = uid.substr(0, dash);
    std::string ts = uid.substr(dash + 1);
    uint64_t v = 0;
    auto [p, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), v);
    if (ec != std::errc() || p != ts.data() + ts.size())
        throw ValidationError("malformed unique id timestamp: " + uid);
    return {dev, v};
}

}  // namespace fluxsim::proto
