#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fluxsim {

// Simulation clock, milliseconds since run start.
using SimTime = uint64_t;

// A simulated network address. Purely an opaque 32-bit id rendered
// dotted-quad for logs; never a real endpoint.
struct Address {
    uint32_t value = 0;

    friend bool operator==(Address a, Address b) { return a.value == b.value; }
    friend bool operator!=(Address a, Address b) { return a.value != b.value; }
    friend bool operator<(Address a, Address b) { return a.value < b.value; }
};

std::string to_string(Address a);
Address parse_address(const std::string& dotted);  // throws ValidationError

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad configuration (scenario files, parameters); CLI exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed wire bytes; carries the byte offset of the problem.
struct DecodeError : Error {
    DecodeError(size_t at, const std::string& what)
        : Error(what + " (offset " + std::to_string(at) + ")"), offset(at) {}
    size_t offset;
};

struct EncodingError : Error {
    using Error::Error;
};

struct ValidationError : Error {
    using Error::Error;
};

struct RestoreError : Error {
    using Error::Error;
};

// Bug guard; should never escape a correct run.
struct InternalError : Error {
    using Error::Error;
};

struct UnknownVersion : Error {
    using Error::Error;
};

struct OutOfRange : Error {
    using Error::Error;
};

}  // namespace fluxsim
