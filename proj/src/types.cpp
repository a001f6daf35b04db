#include "fluxsim/types.hpp"

#include <cstdio>

#include "fluxsim/prng.hpp"

namespace fluxsim {

std::string to_string(Address a) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%u.%u.%u.%u", (a.value >> 24) & 0xff,
                  (a.value >> 16) & 0xff, (a.value >> 8) & 0xff, a.value & 0xff);
    return buf;
}

Address parse_address(const std::string& dotted) {
    unsigned o[4];
    char tail;
    if (std::sscanf(dotted.c_str(), "%u.%u.%u.%u%c", &o[0], &o[1], &o[2], &o[3],
                    &tail) != 4 ||
        o[0] > 255 || o[1] > 255 || o[2] > 255 || o[3] > 255)
        throw ValidationError("bad address: " + dotted);
    return Address{(o[0] << 24) | (o[1] << 16) | (o[2] << 8) | o[3]};
}

uint64_t derive_seed(uint64_t master_seed, std::string_view owner,
                     std::string_view purpose) {
    std::string key = std::to_string(master_seed);
    key += '|';
    key += owner;
    key += '|';
    key += purpose;
    return fnv1a64(key);
}

Xorshift64Star derive_stream(uint64_t master_seed, std::string_view owner,
                             std::string_view purpose) {
    return Xorshift64Star(derive_seed(master_seed, owner, purpose));
}

}  // namespace fluxsim
