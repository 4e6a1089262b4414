#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>

#include "avatar/signaling/protocol.hpp"
#include "avatar/signaling/room.hpp"

namespace avatar::signaling {

/// Outbound side of one client transport. Implementations must preserve call order.
class Connection {
public:
    virtual ~Connection() = default;
    virtual void deliver(const SignalMessage& msg) = 0;
    /// The room this connection belonged to has closed.
    virtual void room_closed(const std::string& /*room*/) {}
};

/// Directory of live room ids; the cluster supplies a shared implementation.
class RoomRegistry {
public:
    virtual ~RoomRegistry() = default;
    /// False if the id is already taken.
    virtual bool try_register(const std::string& room) = 0;
    virtual void update(const std::string& /*room*/, RoomState /*state*/) {}
    virtual void unregister(const std::string& room) = 0;
};

class LocalRegistry : public RoomRegistry {
public:
    bool try_register(const std::string& room) override;
    void unregister(const std::string& room) override;
    [[nodiscard]] std::size_t size() const;
    [[nodiscard]] bool contains(const std::string& room) const;

private:
    mutable std::mutex mu_;
    std::set<std::string> ids_;
};

using SteadyClock = std::function<std::chrono::steady_clock::time_point()>;

struct ServiceConfig {
    std::uint64_t seed = 1;
    std::string instance_id = "local";
    std::chrono::seconds waiting_ttl{600};
    SteadyClock clock = [] { return std::chrono::steady_clock::now(); };
};

class RoomService {
    struct Room;

public:
    class Member;
    using MemberPtr = std::shared_ptr<Member>;

    explicit RoomService(ServiceConfig config = {}, std::shared_ptr<RoomRegistry> registry = nullptr);
    ~RoomService();

    RoomService(const RoomService&) = delete;
    RoomService& operator=(const RoomService&) = delete;

    MemberPtr attach(std::shared_ptr<Connection> conn);

    /// Applies one client message. Client-level failures become Error documents on the
    /// sender's connection; nothing is thrown for them.
    void handle(const MemberPtr& member, const SignalMessage& msg);

    /// Transport loss; equivalent to a plain HangUp.
    void detach(const MemberPtr& member);

    /// Throws IllegalState if already in a room, IdExhaustion if no free id is found.
    std::string create_room(const MemberPtr& owner);

    /// Throws RoomNotFound, RoomFull, RoomClosed or IllegalState.
    void join_room(const MemberPtr& guest, const std::string& room);

    /// Throws RoomNotFound or IllegalState.
    void mark_established(const std::string& room);

    [[nodiscard]] bool has_room(const std::string& room) const;
    [[nodiscard]] std::optional<RoomState> state(const std::string& room) const;
    [[nodiscard]] std::size_t live_rooms() const;
    [[nodiscard]] std::optional<std::string> room_of(const MemberPtr& member) const;
    [[nodiscard]] const std::string& instance_id() const { return config_.instance_id; }

    /// Closes rooms left waiting longer than the TTL. Returns how many were reaped.
    std::size_t reap_expired();

private:
    std::shared_ptr<Room> find(const std::string& room) const;
    void apply(Room& room, const MemberPtr& sender, Role role, const SignalMessage& msg,
               std::unique_lock<std::mutex>& lock);
    void close_locked(Room& room);
    void reply_error(const MemberPtr& member, WireCode code, const std::string& text,
                     const std::optional<std::string>& room);

    ServiceConfig config_;
    std::shared_ptr<RoomRegistry> registry_;
    mutable std::mutex rooms_mu_;
    std::unordered_map<std::string, std::shared_ptr<Room>> rooms_;
    RoomIdGenerator ids_;
};

}  // namespace avatar::signaling
