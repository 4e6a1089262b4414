#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include "avatar/signaling/protocol.hpp"

namespace avatar::signaling {

enum class RoomState { Created, OwnerWaiting, Negotiating, Established, Closed };

inline constexpr RoomState kAllRoomStates[] = {RoomState::Created, RoomState::OwnerWaiting, RoomState::Negotiating,
                                               RoomState::Established, RoomState::Closed};

std::string_view to_string(RoomState s) noexcept;

/// Who is acting on the room: one of its two members, or a connection outside it.
enum class Role { Owner, Guest, Outsider };

inline constexpr Role kAllRoles[] = {Role::Owner, Role::Guest, Role::Outsider};

std::string_view to_string(Role r) noexcept;

/// A message type arriving from a client, or the out-of-band establishment mark.
struct RoomInput {
    enum class Kind { Message, MarkEstablished } kind = Kind::Message;
    MessageType type = MessageType::HangUp;

    static RoomInput message(MessageType t) { return {Kind::Message, t}; }
    static RoomInput mark_established() { return {Kind::MarkEstablished, MessageType::HangUp}; }
};

struct RoomPresence {
    RoomState state = RoomState::Created;
    bool owner = true;
    bool guest = false;

    bool operator==(const RoomPresence&) const = default;
};

/// Side effects the service carries out after a transition.
struct RoomEffects {
    bool forward = false;            // relay the message verbatim to the other member
    bool peer_joined = false;        // PeerJoined to both members
    bool notify_peer_gone = false;   // Error{PeerGone} to the remaining member
    bool detach_sender = false;
    bool closed = false;             // room reached Closed during this step

    bool operator==(const RoomEffects&) const = default;
};

struct Transition {
    RoomPresence next;
    std::optional<WireCode> reject;  // error returned to the sender; state unchanged
    RoomEffects effects;
};

/// Pure transition function of a one-owner, one-guest room.
Transition step(const RoomPresence& current, Role sender, const RoomInput& input);

/// Uniform 1-6 digit decimal ids from a seeded generator.
class RoomIdGenerator {
public:
    explicit RoomIdGenerator(std::uint64_t seed) : rng_(seed) {}
    std::string next();

private:
    std::mt19937_64 rng_;
};

inline constexpr int kMaxIdAttempts = 64;

}  // namespace avatar::signaling
