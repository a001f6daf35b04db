#pragma once

#include <cstdint>
#include <string_view>

namespace fluxsim {

inline constexpr uint64_t kFnvOffsetBasis = 14695981039346656037ULL;
inline constexpr uint64_t kFnvPrime = 1099511628211ULL;

// FNV-1a over raw bytes. Used for seed derivation and the SMS template
// index; must stay bit-identical across platforms and languages.
constexpr uint64_t fnv1a64(std::string_view bytes) {
    uint64_t h = kFnvOffsetBasis;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

// xorshift64* with the 12/25/27 shift triple. State is the pre-multiply
// value; a zero seed is replaced by the FNV offset basis so the generator
// never sticks at zero.
class Xorshift64Star {
public:
    explicit constexpr Xorshift64Star(uint64_t seed)
        : state_(seed != 0 ? seed : kFnvOffsetBasis) {}

    constexpr uint64_t next() {
        uint64_t x = state_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state_ = x;
        return x * 2685821657736338717ULL;
    }

    // Uniform in [0, n). n == 0 is a caller bug; returns 0.
    constexpr uint64_t next_below(uint64_t n) {
        return n == 0 ? 0 : next() % n;
    }

    // Uniform in [lo, hi], inclusive.
    constexpr uint64_t next_in(uint64_t lo, uint64_t hi) {
        return lo + next_below(hi - lo + 1);
    }

    constexpr uint64_t state() const { return state_; }

private:
    uint64_t state_;
};

// Independent stream seed for (master seed, owner, purpose). Adding a node
// or a new purpose never perturbs any other stream.
uint64_t derive_seed(uint64_t master_seed, std::string_view owner,
                     std::string_view purpose);

Xorshift64Star derive_stream(uint64_t master_seed, std::string_view owner,
                             std::string_view purpose);

}  // namespace fluxsim
