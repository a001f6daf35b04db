#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fluxsim/prng.hpp"
#include "fluxsim/types.hpp"

namespace fluxsim::proto {

enum class CommandKind {
    CaptureImage,
    RecordAudio,
    RecordVoiceCall,
    GrabGpsLocation,
};

const char* to_string(CommandKind k);
CommandKind command_kind_from_string(const std::string& s);  // throws DecodeError

using ParamMap = std::map<std::string, std::string>;

// One struct per wire message; tags 1..11 in declaration order.
struct Srr {
    std::string device_id;
    ParamMap device_details;
    friend bool operator==(const Srr&, const Srr&) = default;
};
struct Rgr {
    std::string device_id;
    uint64_t assigned_bot_id = 0;
    friend bool operator==(const Rgr&, const Rgr&) = default;
};
struct Dcr {
    uint64_t bot_id = 0;
    Address bot_ip;
    friend bool operator==(const Dcr&, const Dcr&) = default;
};
struct Command {
    CommandKind kind = CommandKind::CaptureImage;
    SimTime timestamp = 0;
    ParamMap params;
    Address upload_ip;
    friend bool operator==(const Command&, const Command&) = default;
};
struct NothingForYou {
    friend bool operator==(const NothingForYou&, const NothingForYou&) = default;
};
struct Rcipb {
    uint64_t bot_id = 0;
    Address new_ip;
    friend bool operator==(const Rcipb&, const Rcipb&) = default;
};
struct Rcad {
    Address new_server_address;
    friend bool operator==(const Rcad&, const Rcad&) = default;
};
struct PublishCommand {
    struct Target {
        uint64_t bot_id = 0;
        Address bot_ip;
        friend bool operator==(const Target&, const Target&) = default;
    };
    std::vector<Target> targets;
    CommandKind kind = CommandKind::CaptureImage;
    SimTime timestamp = 0;
    ParamMap params;
    friend bool operator==(const PublishCommand&, const PublishCommand&) = default;
};
struct Upload {
    uint64_t bot_id = 0;
    std::string unique_id;
    uint64_t payload_bytes = 0;
    bool compressed = false;
    friend bool operator==(const Upload&, const Upload&) = default;
};
struct UploadAck {
    std::string unique_id;
    friend bool operator==(const UploadAck&, const UploadAck&) = default;
};
struct SpamSms {
    std::string text;
    friend bool operator==(const SpamSms&, const SpamSms&) = default;
};

using Message = std::variant<Srr, Rgr, Dcr, Command, NothingForYou, Rcipb,
                             Rcad, PublishCommand, Upload, UploadAck, SpamSms>;

// Short tag name for traces ("SRR", "DCR", ...).
const char* tag_name(const Message& m);

// Frame: 1 tag byte (SRR=1 .. SpamSms=11), big-endian u32 body length,
// body = key-sorted "key=value" lines with %-escaping. decode(encode(m)) == m.
std::vector<uint8_t> encode(const Message& m);
Message decode(const std::vector<uint8_t>& bytes);  // throws DecodeError

// Standard-alphabet Base64 with padding.
std::string base64_encode(const std::string& raw);
std::string base64_decode(const std::string& b64);  // throws DecodeError

// Deterministic parameter string: "k=v" entries sorted by key, joined
// with ';', '%'/'='/';' percent-escaped. Inverse of parse_params.
std::string canonical_params(const ParamMap& params);
ParamMap parse_params(const std::string& canonical);

// Spam template table: maps FNV-1a-64 of a template's canonical form
// (lowercased, whitespace runs collapsed, {P} slot excised) to a command.
class SmsTemplateTable {
public:
    struct Entry {
        std::string template_text;  // contains exactly one {P} slot
        CommandKind kind;
    };

    void add(const std::string& template_text, CommandKind kind);
    const std::vector<Entry>& entries() const { return entries_; }
    std::optional<CommandKind> kind_for_hash(uint64_t hash) const;
    std::vector<size_t> entries_for(CommandKind kind) const;

    // Lines "COMMAND_KIND<TAB>template text"; '#' starts a comment.
    static SmsTemplateTable load(const std::string& path);

private:
    std::vector<Entry> entries_;
    std::map<uint64_t, CommandKind> index_;
};

// Canonical form used for hashing: whitespace collapsed, lowercased,
// "{p}" excised.
std::string canonical_sms_text(const std::string& text);
uint64_t template_hash(const std::string& template_text);

struct SmsDecodeResult {
    CommandKind kind;
    ParamMap params;
};

// Renders one of the command's templates (chosen uniformly via rng) with
// the Base64 of the canonical parameter string in the {P} slot. Throws
// EncodingError past 160 characters.
SpamSms sms_encode(CommandKind kind, const ParamMap& params,
                   const SmsTemplateTable& table, Xorshift64Star& rng);

// nullopt = NotForUs (no template hash matched). A matched template with
// an undecodable slot throws DecodeError.
std::optional<SmsDecodeResult> sms_decode(const SpamSms& sms,
                                          const SmsTemplateTable& table);

// device_id ++ "-" ++ decimal timestamp; device_id must not contain '-'.
std::string make_unique_id(const std::string& device_id, SimTime timestamp);
std::pair<std::string, SimTime> parse_unique_id(const std::string& uid);

}  // namespace fluxsim::proto
