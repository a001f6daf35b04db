#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fluxsim/types.hpp"

namespace fluxsim {

// Simulated registrar + resolver. Blacklist beats registration; failed
// resolutions are logged for the NXDOMAIN detector.
class Registrar {
public:
    struct NxRecord {
        SimTime time;
        std::string querier;
        std::string domain;
    };

    enum class RegisterResult { Ok, AlreadyRegistered };

    RegisterResult register_domain(const std::string& domain, Address server,
                                   SimTime now);

    // Registered and not blacklisted -> address. Anything else is NXDOMAIN
    // and appends to the nx log.
    std::optional<Address> resolve(const std::string& domain,
                                   const std::string& querier, SimTime now);

    void blacklist(const std::string& domain);

    // Removes every domain resolving to the address; returns how many.
    uint64_t takedown(Address server);

    const std::vector<NxRecord>& nx_log() const { return nx_log_; }
    size_t registered_count() const { return registered_.size(); }
    bool is_registered(const std::string& domain) const {
        return registered_.count(domain) != 0;
    }

    // Invoked on every NXDOMAIN append (the kernel mirrors it into the
    // run journal).
    void set_nx_hook(std::function<void(const NxRecord&)> hook) {
        nx_hook_ = std::move(hook);
    }

private:
    struct Registration {
        Address server;
        SimTime registered_at;
    };

    std::map<std::string, Registration> registered_;
    std::set<std::string> blacklist_;
    std::vector<NxRecord> nx_log_;
    std::function<void(const NxRecord&)> nx_hook_;
};

// Lowercase letters, digits and '-' in dot-separated labels, at least two
// labels. The DGA always emits conforming names.
bool valid_domain_syntax(const std::string& domain);

}  // namespace fluxsim
