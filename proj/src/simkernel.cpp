#include "fluxsim/simkernel.hpp"

namespace fluxsim::sim {

std::vector<TraceRow> extract_trace(const std::vector<JournalRecord>& journal) {
    std::vector<TraceRow> out;
    for (const auto& rec : journal)
        if (const auto* row = std::get_if<TraceRow>(&rec)) out.push_back(*row);
    return out;
}

Sim::Sim(uint64_t master_seed, NetModel net, SimTime restore_delay_ms)
    : master_seed_(master_seed), net_(net), restore_delay_ms_(restore_delay_ms) {
    registrar_.set_nx_hook([this](const Registrar::NxRecord& r) {
        journal_.push_back(NxRow{r.time, r.querier, r.domain});
    });
}

Address Sim::alloc_address(uint8_t pool) {
    uint16_t n = ++addr_counters_[pool];
    return Address{(10u << 24) | (uint32_t(pool) << 16) | n};
}

Node& Sim::add_node(std::unique_ptr<Node> node, uint8_t address_pool) {
    if (by_name_.count(node->name()))
        throw InternalError("duplicate node name: " + node->name());
    node->address_ = alloc_address(address_pool);
    size_t idx = nodes_.size();
    by_name_[node->name()] = idx;
    by_addr_[node->address_.value] = idx;
    nodes_.push_back(std::move(node));
    return *nodes_[idx];
}

Node* Sim::find(const std::string& name) {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : nodes_[it->second].get();
}

Node* Sim::holder_of(Address a) {
    auto it = by_addr_.find(a.value);
    return it == by_addr_.end() ? nullptr : nodes_[it->second].get();
}

bool Sim::node_up(const std::string& name) {
    Node* n = find(name);
    return n && n->up();
}

void Sim::push(SimTime at, EventKind kind) {
    if (at < now_)
        throw InternalError("scheduling into the past: " + std::to_string(at) +
                            " < " + std::to_string(now_));
    queue_.push(Event{at, next_seq_++, std::move(kind)});
}

namespace {

std::string direction(NodeKind src, const Node* dst) {
    if (src == NodeKind::Bot) return "up";
    if (dst && dst->kind() == NodeKind::Bot) return "down";
    return "lateral";
}

}  // namespace

void Sim::send(Node& from, Address to, proto::Message msg) {
    uint64_t bytes = net_.message_bytes(msg);
    auto it = by_addr_.find(to.value);
    Node* dst = it == by_addr_.end() ? nullptr : nodes_[it->second].get();
    bool ok = dst != nullptr && dst->up();
    journal_.push_back(TraceRow{now_, from.name(),
                                dst ? dst->name() : to_string(to), bytes,
                                direction(from.kind(), dst),
                                proto::tag_name(msg), ok});
    if (ok)
        push(now_ + net_.latency_ms,
             DeliverEv{it->second, std::move(msg), from.name(), from.address()});
}

void Sim::schedule_timer(Node& node, SimTime at, uint64_t tag) {
    push(at, TimerEv{by_name_.at(node.name()), tag});
}

void Sim::inject_fault(const FaultSpec& spec) {
    SimTime at = std::visit([](const auto& f) { return f.at; }, spec);
    if (const auto* ip = std::get_if<IpReassign>(&spec)) {
        if (!find(ip->device))
            throw ConfigError("ip_reassign: unknown device " + ip->device);
    }
    if (const auto* td = std::get_if<ServerTakedown>(&spec)) {
        Node* n = holder_of(td->address);
        if (!n || n->kind() != NodeKind::Server)
            throw ConfigError("server_takedown: no server at " +
                              to_string(td->address));
    }
    push(at, FaultEv{spec});
}

std::optional<Address> Sim::resolve(const std::string& domain,
                                    const std::string& querier) {
    return registrar_.resolve(domain, querier, now_);
}

void Sim::log_registry(const std::string& op, uint64_t bot_id,
                       const std::string& device, Address ip, uint64_t version) {
    journal_.push_back(RegistryRow{now_, op, bot_id, device, ip, version});
}

void Sim::log_restore(uint64_t version) {
    journal_.push_back(RestoreRow{now_, version});
}

void Sim::log_warn(const std::string& msg) {
    journal_.push_back(WarnRow{now_, msg});
}

void Sim::mark_down(Node& node) { node.up_ = false; }

void Sim::mark_up(Node& node) { node.up_ = true; }

void Sim::reassign_address(Node& node, Address fresh) {
    by_addr_.erase(node.address_.value);
    node.address_ = fresh;
    by_addr_[fresh.value] = by_name_.at(node.name());
}

void Sim::apply_fault(const FaultSpec& spec) {
    if (const auto* td = std::get_if<ServerTakedown>(&spec)) {
        Node* n = holder_of(td->address);
        if (!n) return;  // address vanished since injection; nothing to do
        mark_down(*n);
        uint64_t removed = registrar_.takedown(td->address);
        journal_.push_back(FaultRow{now_, "server_takedown", n->name(),
                                    std::to_string(removed) + " domains removed"});
    } else if (std::get_if<BotmasterCompromise>(&spec)) {
        for (auto& n : nodes_) {
            if (n->kind() != NodeKind::Botmaster) continue;
            mark_down(*n);
            journal_.push_back(FaultRow{now_, "botmaster_compromise", n->name(), ""});
            push(now_ + restore_delay_ms_, RestoreEv{by_name_.at(n->name())});
        }
    } else if (const auto* ip = std::get_if<IpReassign>(&spec)) {
        Node* n = find(ip->device);
        if (!n) return;
        Address fresh = alloc_address(9);
        reassign_address(*n, fresh);
        journal_.push_back(
            FaultRow{now_, "ip_reassign", n->name(), to_string(fresh)});
        n->on_address_change(*this, fresh);
        if (ip->period > 0)
            push(now_ + ip->period, FaultEv{IpReassign{ip->device,
                                                       now_ + ip->period,
                                                       ip->period}});
    }
}

void Sim::dispatch(Event& ev) {
    now_ = ev.fire_at;
    if (auto* d = std::get_if<DeliverEv>(&ev.kind)) {
        Node& dst = *nodes_[d->to];
        if (!dst.up()) return;  // went down while the message was in flight
        Delivery delivery{d->msg, d->from_name, d->from_addr};
        dst.on_deliver(*this, delivery);
    } else if (auto* t = std::get_if<TimerEv>(&ev.kind)) {
        Node& n = *nodes_[t->node];
        if (!n.up()) return;
        n.on_timer(*this, t->tag);
    } else if (auto* f = std::get_if<FaultEv>(&ev.kind)) {
        apply_fault(f->spec);
    } else if (auto* r = std::get_if<RestoreEv>(&ev.kind)) {
        Node& n = *nodes_[r->node];
        mark_up(n);
        n.on_restore(*this);
    }
}

RunSummary Sim::run_until(SimTime t_end) {
    RunSummary summary;
    while (!queue_.empty() && queue_.top().fire_at <= t_end) {
        Event ev = queue_.top();
        queue_.pop();
        dispatch(ev);
        ++summary.events_processed;
    }
    now_ = t_end;
    summary.clock = now_;
    return summary;
}

}  // namespace fluxsim::sim
