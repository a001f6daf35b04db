#include "fluxsim/snapshot.hpp"

#include <bit>
#include <fstream>

namespace fluxsim {

namespace {

uint64_t round_up_pow2(uint64_t n) {
    if (n <= 1) return 1;
    return std::bit_ceil(n);
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 7; i >= 0; --i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint64_t get_u64(const std::string& in, size_t& pos) {
    if (pos + 8 > in.size()) throw DecodeError(pos, "truncated snapshot log");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | static_cast<uint8_t>(in[pos++]);
    return v;
}

}  // namespace

SnapshotTree::SnapshotTree(uint64_t capacity) {
    if (capacity < 1) throw ConfigError("snapshot capacity must be >= 1");
    roots_.push_back(-1);  // version 0: empty
    caps_.push_back(round_up_pow2(capacity));
}

void SnapshotTree::check_version(Version v) const {
    if (v >= roots_.size())
        throw UnknownVersion("unknown snapshot version " + std::to_string(v));
}

int32_t SnapshotTree::alloc(const Node& n) {
    pool_.push_back(n);
    ++last_alloc_;
    return static_cast<int32_t>(pool_.size() - 1);
}

int32_t SnapshotTree::set_path(int32_t node, uint64_t lo, uint64_t hi,
                               uint64_t slot, const RegistryRecord& record) {
    Node fresh = node >= 0 ? pool_[node] : Node{};
    if (lo == hi) {
        fresh.payload = record;
        fresh.count = 1;
        return alloc(fresh);
    }
    uint64_t mid = lo + (hi - lo) / 2;
    if (slot <= mid)
        fresh.left = set_path(fresh.left, lo, mid, slot, record);
    else
        fresh.right = set_path(fresh.right, mid + 1, hi, slot, record);
    uint64_t lc = fresh.left >= 0 ? pool_[fresh.left].count : 0;
    uint64_t rc = fresh.right >= 0 ? pool_[fresh.right].count : 0;
    fresh.count = lc + rc;
    return alloc(fresh);
}

SnapshotTree::Version SnapshotTree::update(Version version, uint64_t slot,
                                           RegistryRecord record) {
    check_version(version);
    last_alloc_ = 0;

    int32_t root = roots_[version];
    uint64_t cap = caps_[version];
    Version parent = version;
    while (slot >= cap) {
        // Grow: old root becomes the left half of a doubled tree. The
        // intermediate version marks the rebuild.
        Node wider;
        wider.left = root;
        wider.count = root >= 0 ? pool_[root].count : 0;
        root = alloc(wider);
        cap *= 2;
        roots_.push_back(root);
        caps_.push_back(cap);
        log_.push_back({parent, true, 0, {}});
        parent = roots_.size() - 1;
    }

    roots_.push_back(set_path(root, 0, cap - 1, slot, record));
    caps_.push_back(cap);
    log_.push_back({parent, false, slot, std::move(record)});
    return roots_.size() - 1;
}

std::optional<RegistryRecord> SnapshotTree::get(Version version, uint64_t slot) const {
    check_version(version);
    if (slot >= caps_[version])
        throw OutOfRange("slot " + std::to_string(slot) + " past capacity " +
                         std::to_string(caps_[version]));
    int32_t node = roots_[version];
    uint64_t lo = 0, hi = caps_[version] - 1;
    while (node >= 0 && lo != hi) {
        uint64_t mid = lo + (hi - lo) / 2;
        if (slot <= mid) {
            node = pool_[node].left;
            hi = mid;
        } else {
            node = pool_[node].right;
            lo = mid + 1;
        }
    }
    if (node < 0) return std::nullopt;
    return pool_[node].payload;
}

uint64_t SnapshotTree::count_in(int32_t node, uint64_t lo, uint64_t hi,
                                uint64_t qlo, uint64_t qhi) const {
    if (node < 0 || qhi < lo || hi < qlo) return 0;
    if (qlo <= lo && hi <= qhi) return pool_[node].count;
    uint64_t mid = lo + (hi - lo) / 2;
    return count_in(pool_[node].left, lo, mid, qlo, qhi) +
           count_in(pool_[node].right, mid + 1, hi, qlo, qhi);
}

uint64_t SnapshotTree::range_count(Version version, uint64_t lo, uint64_t hi) const {
    check_version(version);
    if (lo > hi || hi >= caps_[version])
        throw OutOfRange("bad range [" + std::to_string(lo) + ", " +
                         std::to_string(hi) + "]");
    return count_in(roots_[version], 0, caps_[version] - 1, lo, hi);
}

void SnapshotTree::collect(int32_t node, uint64_t lo, uint64_t hi,
                           std::map<uint64_t, RegistryRecord>& out) const {
    if (node < 0) return;
    if (lo == hi) {
        if (pool_[node].payload) out.emplace(lo, *pool_[node].payload);
        return;
    }
    uint64_t mid = lo + (hi - lo) / 2;
    collect(pool_[node].left, lo, mid, out);
    collect(pool_[node].right, mid + 1, hi, out);
}

std::map<uint64_t, RegistryRecord> SnapshotTree::materialize(Version version) const {
    check_version(version);
    std::map<uint64_t, RegistryRecord> out;
    collect(roots_[version], 0, caps_[version] - 1, out);
    return out;
}

uint64_t SnapshotTree::capacity(Version version) const {
    check_version(version);
    return caps_[version];
}

void SnapshotTree::dump_log(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open snapshot dump for writing: " + path);
    std::string head;
    put_u64(head, caps_.front());
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    for (const auto& e : log_) {
        std::string body;
        body.push_back(e.grow ? 2 : 1);
        put_u64(body, e.parent);
        if (!e.grow) {
            put_u64(body, e.slot);
            put_u64(body, e.record.device_id.size());
            body += e.record.device_id;
            put_u64(body, e.record.ip.value);
            put_u64(body, e.record.registered_at);
        }
        std::string frame;
        put_u64(frame, body.size());
        frame += body;
        out.write(frame.data(), static_cast<std::streamsize>(frame.size()));
    }
}

SnapshotTree SnapshotTree::replay_log(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open snapshot dump: " + path);
    std::string data((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    size_t pos = 0;
    SnapshotTree tree(get_u64(data, pos));
    while (pos < data.size()) {
        uint64_t len = get_u64(data, pos);
        if (pos + len > data.size()) throw DecodeError(pos, "truncated snapshot frame");
        size_t end = pos + len;
        if (len < 9) throw DecodeError(pos, "short snapshot frame");
        uint8_t kind = static_cast<uint8_t>(data[pos++]);
        uint64_t parent = get_u64(data, pos);
        if (kind == 2) {
            // Growth frame: wrap the parent root into a doubled tree.
            if (parent >= tree.version_count())
                throw DecodeError(pos, "snapshot frame parent out of range");
            Node wider;
            int32_t old_root = tree.roots_[parent];
            wider.left = old_root;
            wider.count = old_root >= 0 ? tree.pool_[old_root].count : 0;
            tree.roots_.push_back(tree.alloc(wider));
            tree.caps_.push_back(tree.caps_[parent] * 2);
            tree.log_.push_back({parent, true, 0, {}});
        } else if (kind == 1) {
            uint64_t slot = get_u64(data, pos);
            uint64_t dlen = get_u64(data, pos);
            if (pos + dlen > end) throw DecodeError(pos, "bad device id length");
            RegistryRecord rec;
            rec.device_id = data.substr(pos, dlen);
            pos += dlen;
            rec.ip = Address{static_cast<uint32_t>(get_u64(data, pos))};
            rec.registered_at = get_u64(data, pos);
            if (parent >= tree.version_count())
                throw DecodeError(pos, "snapshot frame parent out of range");
            // Replay without re-growing (growth already has its own frame).
            tree.last_alloc_ = 0;
            int32_t root = tree.roots_[parent];
            uint64_t cap = tree.caps_[parent];
            if (slot >= cap) throw DecodeError(pos, "slot past replayed capacity");
            tree.roots_.push_back(tree.set_path(root, 0, cap - 1, slot, rec));
            tree.caps_.push_back(cap);
            tree.log_.push_back({parent, false, slot, std::move(rec)});
        } else {
            throw DecodeError(pos, "unknown snapshot frame kind");
        }
        if (pos != end) throw DecodeError(pos, "snapshot frame length mismatch");
    }
    return tree;
}

}  // namespace fluxsim
