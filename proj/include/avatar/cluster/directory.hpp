#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "avatar/net.hpp"
#include "avatar/signaling/service.hpp"

namespace avatar::cluster {

using InstanceAddress = net::HostPort;

struct RoomRecord {
    std::string room_id;
    InstanceAddress instance;
    std::string instance_id;
    std::string state = "OwnerWaiting";
    std::int64_t created_at_ms = 0;

    bool operator==(const RoomRecord&) const = default;
};

std::string to_json(const RoomRecord& r);
/// Throws StoreUnavailable on corrupt records.
RoomRecord record_from_json(const std::string& text);

/// Shared room directory. Every operation is linearizable per key.
class DirectoryStore {
public:
    virtual ~DirectoryStore() = default;

    virtual std::optional<RoomRecord> get(const std::string& room_id) = 0;
    /// Replaces the record at the key only if its current value equals `expected`
    /// (nullopt meaning absent). `desired` nullopt deletes.
    virtual bool compare_and_set(const std::string& room_id, const std::optional<RoomRecord>& expected,
                                 const std::optional<RoomRecord>& desired) = 0;
    virtual std::vector<std::string> keys() = 0;

    void put(const RoomRecord& record);
    bool remove(const std::string& room_id);
};

/// Throws Duplicate when the id is already registered.
void register_room(DirectoryStore& store, const RoomRecord& record);

/// Throws NotFound.
InstanceAddress lookup_room(DirectoryStore& store, const std::string& room_id);

class InMemoryStore final : public DirectoryStore {
public:
    std::optional<RoomRecord> get(const std::string& room_id) override;
    bool compare_and_set(const std::string& room_id, const std::optional<RoomRecord>& expected,
                         const std::optional<RoomRecord>& desired) override;
    std::vector<std::string> keys() override;

private:
    std::mutex mu_;
    std::map<std::string, RoomRecord> records_;
};

/// One JSON file per room under `dir`, replaced by atomic rename and serialized per key
/// with advisory file locks, so several processes may share one directory.
class FileStore final : public DirectoryStore {
public:
    /// Creates `dir` if needed; throws StoreUnavailable if it cannot be used.
    explicit FileStore(std::filesystem::path dir);

    std::optional<RoomRecord> get(const std::string& room_id) override;
    bool compare_and_set(const std::string& room_id, const std::optional<RoomRecord>& expected,
                         const std::optional<RoomRecord>& desired) override;
    std::vector<std::string> keys() override;

    [[nodiscard]] const std::filesystem::path& dir() const { return dir_; }

private:
    std::optional<RoomRecord> read_unlocked(const std::string& room_id);

    std::filesystem::path dir_;
};

enum class StoreKind { Memory, File };

StoreKind parse_store_kind(const std::string& text);
std::shared_ptr<DirectoryStore> make_store(StoreKind kind, const std::filesystem::path& path = {});

/// Room registry backed by the shared directory for one instance.
class StoreRegistry final : public signaling::RoomRegistry {
public:
    StoreRegistry(std::shared_ptr<DirectoryStore> store, InstanceAddress self, std::string instance_id);

    bool try_register(const std::string& room) override;
    void update(const std::string& room, signaling::RoomState state) override;
    void unregister(const std::string& room) override;

private:
    std::shared_ptr<DirectoryStore> store_;
    InstanceAddress self_;
    std::string instance_id_;
};

}  // namespace avatar::cluster
