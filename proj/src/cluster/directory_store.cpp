#include "avatar/cluster/directory.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <chrono>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "avatar/error.hpp"

namespace avatar::cluster {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_json(const RoomRecord& r) {
    return json{{"room_id", r.room_id},     {"host", r.instance.host}, {"port", r.instance.port},
                {"instance_id", r.instance_id}, {"state", r.state},        {"created_at_ms", r.created_at_ms}}
        .dump();
}

RoomRecord record_from_json(const std::string& text) {
    const json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw Error(ErrorCode::StoreUnavailable, "corrupt room record");
    try {
        RoomRecord r;
        r.room_id = doc.at("room_id").get<std::string>();
        r.instance = {doc.at("host").get<std::string>(), doc.at("port").get<std::uint16_t>()};
        r.instance_id = doc.value("instance_id", "");
        r.state = doc.value("state", "");
        r.created_at_ms = doc.value("created_at_ms", std::int64_t{0});
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::StoreUnavailable, std::string("corrupt room record: ") + e.what());
    }
}

void DirectoryStore::put(const RoomRecord& record) {
    while (!compare_and_set(record.room_id, get(record.room_id), record)) {
    }
}

bool DirectoryStore::remove(const std::string& room_id) {
    for (;;) {
        const auto current = get(room_id);
        if (!current) return false;
        if (compare_and_set(room_id, current, std::nullopt)) return true;
    }
}

void register_room(DirectoryStore& store, const RoomRecord& record) {
    if (!store.compare_and_set(record.room_id, std::nullopt, record))
        throw Error(ErrorCode::Duplicate, "room " + record.room_id + " already registered");
}

InstanceAddress lookup_room(DirectoryStore& store, const std::string& room_id) {
    const auto r = store.get(room_id);
    if (!r) throw Error(ErrorCode::NotFound, "room " + room_id);
    return r->instance;
}

std::optional<RoomRecord> InMemoryStore::get(const std::string& room_id) {
    std::lock_guard lock(mu_);
    const auto it = records_.find(room_id);
    if (it == records_.end()) return std::nullopt;
    return it->second;
}

bool InMemoryStore::compare_and_set(const std::string& room_id, const std::optional<RoomRecord>& expected,
                                    const std::optional<RoomRecord>& desired) {
    std::lock_guard lock(mu_);
    const auto it = records_.find(room_id);
    const bool present = it != records_.end();
    if (present != expected.has_value() || (present && it->second != *expected)) return false;
    if (desired)
        records_[room_id] = *desired;
    else if (present)
        records_.erase(it);
    return true;
}

std::vector<std::string> InMemoryStore::keys() {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& [k, v] : records_) out.push_back(k);
    return out;
}

namespace {

bool safe_key(const std::string& key) {
    if (key.empty() || key.size() > 64) return false;
    for (char c : key)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) return false;
    return true;
}

class KeyLock {
public:
    explicit KeyLock(const fs::path& path) : fd_(::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644)) {
        if (fd_ < 0) throw Error(ErrorCode::StoreUnavailable, "cannot open lock " + path.string());
        while (::flock(fd_, LOCK_EX) != 0) {
            if (errno != EINTR) {
                ::close(fd_);
                throw Error(ErrorCode::StoreUnavailable, "cannot lock " + path.string());
            }
        }
    }
    ~KeyLock() {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    KeyLock(const KeyLock&) = delete;
    KeyLock& operator=(const KeyLock&) = delete;

private:
    int fd_;
};

}  // namespace

FileStore::FileStore(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (!fs::is_directory(dir_, ec)) throw Error(ErrorCode::StoreUnavailable, "store directory " + dir_.string());
    const fs::path probe = dir_ / ".probe";
    std::ofstream(probe) << "ok";
    if (!fs::exists(probe, ec)) throw Error(ErrorCode::StoreUnavailable, "store directory not writable: " + dir_.string());
    fs::remove(probe, ec);
}

std::optional<RoomRecord> FileStore::read_unlocked(const std::string& room_id) {
    std::ifstream in(dir_ / (room_id + ".json"));
    if (!in) return std::nullopt;
    std::stringstream ss;
    ss << in.rdbuf();
    return record_from_json(ss.str());
}

std::optional<RoomRecord> FileStore::get(const std::string& room_id) {
    if (!safe_key(room_id)) return std::nullopt;
    return read_unlocked(room_id);
}

bool FileStore::compare_and_set(const std::string& room_id, const std::optional<RoomRecord>& expected,
                                const std::optional<RoomRecord>& desired) {
    if (!safe_key(room_id)) throw Error(ErrorCode::StoreUnavailable, "invalid key " + room_id);
    KeyLock lock(dir_ / (room_id + ".lock"));
    if (read_unlocked(room_id) != expected) return false;

    const fs::path target = dir_ / (room_id + ".json");
    std::error_code ec;
    if (!desired) {
        fs::remove(target, ec);
        return !ec;
    }
    const fs::path tmp = dir_ / (room_id + ".tmp");
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << to_json(*desired);
        out.flush();
        if (!out) throw Error(ErrorCode::StoreUnavailable, "cannot write " + tmp.string());
    }
    fs::rename(tmp, target, ec);
    if (ec) throw Error(ErrorCode::StoreUnavailable, "cannot rename into " + target.string());
    return true;
}

std::vector<std::string> FileStore::keys() {
    std::vector<std::string> out;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir_, ec))
        if (entry.path().extension() == ".json") out.push_back(entry.path().stem().string());
    return out;
}

StoreKind parse_store_kind(const std::string& text) {
    if (text == "memory") return StoreKind::Memory;
    if (text == "file") return StoreKind::File;
    throw Error(ErrorCode::StoreUnavailable, "unknown store kind " + text);
}

std::shared_ptr<DirectoryStore> make_store(StoreKind kind, const fs::path& path) {
    if (kind == StoreKind::Memory) return std::make_shared<InMemoryStore>();
    if (path.empty()) throw Error(ErrorCode::StoreUnavailable, "file store needs a path");
    return std::make_shared<FileStore>(path);
}

StoreRegistry::StoreRegistry(std::shared_ptr<DirectoryStore> store, InstanceAddress self, std::string instance_id)
    : store_(std::move(store)), self_(std::move(self)), instance_id_(std::move(instance_id)) {}

bool StoreRegistry::try_register(const std::string& room) {
    RoomRecord r;
    r.room_id = room;
    r.instance = self_;
    r.instance_id = instance_id_;
    r.state = "Created";
    r.created_at_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::system_clock::now().time_since_epoch())
                          .count();
    return store_->compare_and_set(room, std::nullopt, r);
}

void StoreRegistry::update(const std::string& room, signaling::RoomState state) {
    for (;;) {
        auto current = store_->get(room);
        if (!current || current->instance_id != instance_id_) return;
        auto next = *current;
        next.state = std::string(signaling::to_string(state));
        if (store_->compare_and_set(room, current, next)) return;
    }
}

void StoreRegistry::unregister(const std::string& room) {
    for (;;) {
        auto current = store_->get(room);
        if (!current || current->instance_id != instance_id_) return;
        if (store_->compare_and_set(room, current, std::nullopt)) return;
    }
}

}  // namespace avatar::cluster
