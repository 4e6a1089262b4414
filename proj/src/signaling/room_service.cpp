#include "avatar/signaling/service.hpp"

#include <vector>

namespace avatar::signaling {

bool LocalRegistry::try_register(const std::string& room) {
    std::lock_guard lock(mu_);
    return ids_.insert(room).second;
}

void LocalRegistry::unregister(const std::string& room) {
    std::lock_guard lock(mu_);
    ids_.erase(room);
}

std::size_t LocalRegistry::size() const {
    std::lock_guard lock(mu_);
    return ids_.size();
}

bool LocalRegistry::contains(const std::string& room) const {
    std::lock_guard lock(mu_);
    return ids_.count(room) != 0;
}

class RoomService::Member {
public:
    explicit Member(std::shared_ptr<Connection> c) : conn(std::move(c)) {}

    std::shared_ptr<Connection> conn;

    std::pair<std::shared_ptr<Room>, Role> binding() const {
        std::lock_guard lock(mu);
        return {room, role};
    }
    void bind(std::shared_ptr<Room> r, Role as) {
        std::lock_guard lock(mu);
        room = std::move(r);
        role = as;
    }
    void unbind() { bind(nullptr, Role::Outsider); }

private:
    mutable std::mutex mu;
    std::shared_ptr<Room> room;
    Role role = Role::Outsider;
};

struct RoomService::Room {
    std::string id;
    std::mutex mu;
    RoomPresence presence;
    MemberPtr owner;
    MemberPtr guest;
    std::vector<std::shared_ptr<Connection>> participants;
    std::chrono::steady_clock::time_point created_at;

    [[nodiscard]] bool holds(const MemberPtr& m) const { return m && (owner == m || guest == m); }
    MemberPtr& slot(Role r) { return r == Role::Owner ? owner : guest; }
    MemberPtr& other(Role r) { return r == Role::Owner ? guest : owner; }
};

RoomService::RoomService(ServiceConfig config, std::shared_ptr<RoomRegistry> registry)
    : config_(std::move(config)),
      registry_(registry ? std::move(registry) : std::make_shared<LocalRegistry>()),
      ids_(config_.seed) {}

RoomService::~RoomService() = default;

RoomService::MemberPtr RoomService::attach(std::shared_ptr<Connection> conn) {
    return std::make_shared<Member>(std::move(conn));
}

std::shared_ptr<RoomService::Room> RoomService::find(const std::string& room) const {
    std::lock_guard lock(rooms_mu_);
    const auto it = rooms_.find(room);
    return it == rooms_.end() ? nullptr : it->second;
}

void RoomService::reply_error(const MemberPtr& member, WireCode code, const std::string& text,
                              const std::optional<std::string>& room) {
    member->conn->deliver(SignalMessage::error(code, text, room));
}

std::string RoomService::create_room(const MemberPtr& owner) {
    if (owner->binding().first) throw Error(ErrorCode::IllegalState, "connection already belongs to a room");

    std::string id;
    bool found = false;
    for (int attempt = 0; attempt < kMaxIdAttempts && !found; ++attempt) {
        {
            std::lock_guard lock(rooms_mu_);
            id = ids_.next();
            if (rooms_.count(id)) continue;
        }
        found = registry_->try_register(id);
    }
    if (!found) throw Error(ErrorCode::IdExhaustion, "no free room id after 64 draws");

    auto room = std::make_shared<Room>();
    room->id = id;
    room->created_at = config_.clock();
    room->presence = {RoomState::Created, true, false};
    room->owner = owner;
    room->participants.push_back(owner->conn);

    std::lock_guard room_lock(room->mu);
    room->presence.state = RoomState::OwnerWaiting;
    owner->bind(room, Role::Owner);
    {
        std::lock_guard lock(rooms_mu_);
        rooms_[id] = room;
    }
    registry_->update(id, RoomState::OwnerWaiting);
    owner->conn->deliver(SignalMessage::make(MessageType::RoomCreated, id));
    return id;
}

void RoomService::join_room(const MemberPtr& guest, const std::string& id) {
    if (guest->binding().first) throw Error(ErrorCode::IllegalState, "connection already belongs to a room");
    const auto room = find(id);
    if (!room) throw Error(ErrorCode::RoomNotFound, "room " + id);

    std::lock_guard lock(room->mu);
    const Transition t = step(room->presence, Role::Outsider, RoomInput::message(MessageType::JoinRoom));
    if (t.reject) {
        if (room->presence.state == RoomState::Closed) throw Error(ErrorCode::RoomClosed, "room " + id);
        throw Error(error_code(*t.reject), "room " + id);
    }
    room->presence = t.next;
    room->guest = guest;
    room->participants.push_back(guest->conn);
    guest->bind(room, Role::Guest);
    registry_->update(id, room->presence.state);

    const auto joined = SignalMessage::make(MessageType::PeerJoined, id, Json{{"instance", config_.instance_id}});
    room->owner->conn->deliver(joined);
    guest->conn->deliver(joined);
}

void RoomService::mark_established(const std::string& id) {
    const auto room = find(id);
    if (!room) throw Error(ErrorCode::RoomNotFound, "room " + id);
    std::lock_guard lock(room->mu);
    const Transition t = step(room->presence, Role::Owner, RoomInput::mark_established());
    if (t.reject) throw Error(ErrorCode::IllegalState, "room " + id + " is " + std::string(to_string(room->presence.state)));
    room->presence = t.next;
    registry_->update(id, room->presence.state);
}

void RoomService::handle(const MemberPtr& member, const SignalMessage& msg) {
    auto [room, role] = member->binding();

    switch (msg.type) {
        case MessageType::CreateRoom:
            if (room) return reply_error(member, WireCode::IllegalState, "already in a room", room->id);
            try {
                create_room(member);
            } catch (const Error& e) {
                reply_error(member, wire_code(e.code()), e.what(), std::nullopt);
            }
            return;
        case MessageType::JoinRoom:
            if (room) return reply_error(member, WireCode::IllegalState, "already in a room", room->id);
            if (!msg.room) return reply_error(member, WireCode::Malformed, "JoinRoom without room", std::nullopt);
            try {
                join_room(member, *msg.room);
            } catch (const Error& e) {
                reply_error(member, wire_code(e.code()), e.what(), msg.room);
            }
            return;
        case MessageType::RelayFrame:
            if (!msg.body.is_string() || base64_decoded_size(msg.body.get_ref<const std::string&>()) > kMaxRelayBytes)
                return reply_error(member, WireCode::Malformed, "relay frame must be at most 4096 bytes", msg.room);
            break;
        default:
            break;
    }

    if (!room) {
        if (msg.type == MessageType::HangUp) return;
        return reply_error(member, WireCode::IllegalState, "not in a room", msg.room);
    }

    std::unique_lock lock(room->mu);
    if (!room->holds(member)) {
        lock.unlock();
        member->unbind();
        if (msg.type == MessageType::HangUp) return;
        return reply_error(member, WireCode::IllegalState, "not in a room", msg.room);
    }

    if (msg.type == MessageType::HangUp && msg.body.is_object() && msg.body.value("established", false) &&
        room->presence.state == RoomState::Negotiating) {
        room->presence = step(room->presence, role, RoomInput::mark_established()).next;
        registry_->update(room->id, room->presence.state);
    }
    apply(*room, member, role, msg, lock);
}

void RoomService::detach(const MemberPtr& member) {
    handle(member, SignalMessage::make(MessageType::HangUp));
}

void RoomService::apply(Room& room, const MemberPtr& sender, Role role, const SignalMessage& msg,
                        std::unique_lock<std::mutex>&) {
    const Transition t = step(room.presence, role, RoomInput::message(msg.type));
    if (t.reject) return reply_error(sender, *t.reject, std::string(to_string(msg.type)) + " not allowed in " +
                                                            std::string(to_string(room.presence.state)), room.id);
    const RoomState before = room.presence.state;
    room.presence = t.next;
    const auto& fx = t.effects;

    if (fx.forward) {
        SignalMessage out = msg;
        out.room = room.id;
        out.proxy_room.reset();
        room.other(role)->conn->deliver(out);
    }
    if (fx.notify_peer_gone && room.other(role))
        room.other(role)->conn->deliver(SignalMessage::error(WireCode::PeerGone, "peer left the room", room.id));
    if (fx.detach_sender) {
        room.slot(role) = nullptr;
        sender->unbind();
    }
    if (fx.closed)
        close_locked(room);
    else if (room.presence.state != before)
        registry_->update(room.id, room.presence.state);
}

void RoomService::close_locked(Room& room) {
    for (auto* slot : {&room.owner, &room.guest}) {
        if (*slot) (*slot)->unbind();
        *slot = nullptr;
    }
    room.presence = {RoomState::Closed, false, false};
    {
        std::lock_guard lock(rooms_mu_);
        const auto it = rooms_.find(room.id);
        if (it != rooms_.end() && it->second.get() == &room) rooms_.erase(it);
    }
    registry_->unregister(room.id);
    auto participants = std::move(room.participants);
    room.participants.clear();
    for (const auto& c : participants) c->room_closed(room.id);
}

bool RoomService::has_room(const std::string& room) const { return find(room) != nullptr; }

std::optional<RoomState> RoomService::state(const std::string& id) const {
    const auto room = find(id);
    if (!room) return std::nullopt;
    std::lock_guard lock(room->mu);
    return room->presence.state;
}

std::size_t RoomService::live_rooms() const {
    std::lock_guard lock(rooms_mu_);
    return rooms_.size();
}

std::optional<std::string> RoomService::room_of(const MemberPtr& member) const {
    const auto room = member->binding().first;
    if (!room) return std::nullopt;
    return room->id;
}

std::size_t RoomService::reap_expired() {
    std::vector<std::shared_ptr<Room>> snapshot;
    {
        std::lock_guard lock(rooms_mu_);
        for (const auto& [id, room] : rooms_) snapshot.push_back(room);
    }
    const auto now = config_.clock();
    std::size_t reaped = 0;
    for (const auto& room : snapshot) {
        std::lock_guard lock(room->mu);
        if (room->presence.state != RoomState::OwnerWaiting || now - room->created_at < config_.waiting_ttl) continue;
        if (room->owner)
            room->owner->conn->deliver(SignalMessage::error(WireCode::RoomNotFound, "room expired", room->id));
        close_locked(*room);
        ++reaped;
    }
    return reaped;
}

}  // namespace avatar::signaling
