#include "fluxsim/registrar.hpp"

namespace fluxsim {

bool valid_domain_syntax(const std::string& domain) {
    if (domain.empty() || domain.front() == '.' || domain.back() == '.') return false;
    size_t labels = 1;
    size_t label_len = 0;
    for (char c : domain) {
        if (c == '.') {
            if (label_len == 0) return false;
            ++labels;
            label_len = 0;
            continue;
        }
        bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
        if (!ok) return false;
        if (++label_len > 63) return false;
    }
    return labels >= 2;
}

Registrar::RegisterResult Registrar::register_domain(const std::string& domain,
                                                     Address server, SimTime now) {
    if (!valid_domain_syntax(domain))
        throw ValidationError("not a valid domain name: " + domain);
    auto [it, inserted] = registered_.emplace(domain, Registration{server, now});
    (void)it;
    return inserted ? RegisterResult::Ok : RegisterResult::AlreadyRegistered;
}

std::optional<Address> Registrar::resolve(const std::string& domain,
                                          const std::string& querier, SimTime now) {
    auto it = registered_.find(domain);
    if (it != registered_.end() && blacklist_.count(domain) == 0)
        return it->second.server;
    nx_log_.push_back({now, querier, domain});
    if (nx_hook_) nx_hook_(nx_log_.back());
    return std::nullopt;
}

void Registrar::blacklist(const std::string& domain) { blacklist_.insert(domain); }

uint64_t Registrar::takedown(Address server) {
    uint64_t removed = 0;
    for (auto it = registered_.begin(); it != registered_.end();) {
        if (it->second.server == server) {
            it = registered_.erase(it);
            ++removed;
        } else {
            ++it;
        }
    }
    return removed;
}

}  // namespace fluxsim
