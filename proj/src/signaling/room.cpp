#include "avatar/signaling/room.hpp"

#include <array>

namespace avatar::signaling {

std::string_view to_string(RoomState s) noexcept {
    constexpr std::array<std::string_view, 5> names{"Created", "OwnerWaiting", "Negotiating", "Established", "Closed"};
    return names[static_cast<std::size_t>(s)];
}

std::string_view to_string(Role r) noexcept {
    constexpr std::array<std::string_view, 3> names{"owner", "guest", "outsider"};
    return names[static_cast<std::size_t>(r)];
}

namespace {

Transition reject(const RoomPresence& p, WireCode code) { return {p, code, {}}; }

Transition accept(RoomPresence next, RoomEffects effects = {}) { return {next, std::nullopt, effects}; }

bool other_present(const RoomPresence& p, Role sender) { return sender == Role::Owner ? p.guest : p.owner; }

Transition outsider_step(const RoomPresence& p, MessageType type) {
    if (type == MessageType::HangUp) return accept(p);
    if (type != MessageType::JoinRoom) return reject(p, WireCode::IllegalState);
    switch (p.state) {
        case RoomState::OwnerWaiting: {
            RoomPresence next = p;
            next.state = RoomState::Negotiating;
            next.guest = true;
            return accept(next, {.peer_joined = true});
        }
        case RoomState::Negotiating:
        case RoomState::Established:
            return reject(p, WireCode::RoomFull);
        case RoomState::Closed:
            return reject(p, WireCode::RoomNotFound);
        case RoomState::Created:
            break;
    }
    return reject(p, WireCode::IllegalState);
}

Transition hang_up(const RoomPresence& p, Role sender) {
    if (p.state == RoomState::Closed) return accept(p);
    RoomPresence next = p;
    (sender == Role::Owner ? next.owner : next.guest) = false;
    RoomEffects fx{.detach_sender = true};
    if (p.state == RoomState::Established) {
        if (!next.owner && !next.guest) {
            next.state = RoomState::Closed;
            fx.closed = true;
        }
        return accept(next, fx);
    }
    // Leaving before establishment abandons the session for both sides.
    fx.notify_peer_gone = other_present(p, sender);
    fx.closed = true;
    next = {RoomState::Closed, false, false};
    return accept(next, fx);
}

Transition member_step(const RoomPresence& p, Role sender, MessageType type) {
    switch (type) {
        case MessageType::HangUp:
            return hang_up(p, sender);
        case MessageType::Offer:
        case MessageType::Answer:
            if (p.state == RoomState::Negotiating) return accept(p, {.forward = true});
            return reject(p, WireCode::IllegalState);
        case MessageType::IceCandidate:
        case MessageType::RelayFrame:
            if (p.state == RoomState::Negotiating) return accept(p, {.forward = true});
            if (p.state == RoomState::Established) {
                if (!other_present(p, sender)) return reject(p, WireCode::NoPeer);
                return accept(p, {.forward = true});
            }
            return reject(p, WireCode::IllegalState);
        default:
            return reject(p, WireCode::IllegalState);
    }
}

}  // namespace

Transition step(const RoomPresence& current, Role sender, const RoomInput& input) {
    if (input.kind == RoomInput::Kind::MarkEstablished) {
        if (current.state != RoomState::Negotiating) return reject(current, WireCode::IllegalState);
        RoomPresence next = current;
        next.state = RoomState::Established;
        return accept(next);
    }
    if (sender == Role::Outsider) return outsider_step(current, input.type);
    if (current.state == RoomState::Created) {
        if (input.type == MessageType::HangUp) return hang_up(current, sender);
        return reject(current, WireCode::IllegalState);
    }
    return member_step(current, sender, input.type);
}

std::string RoomIdGenerator::next() {
    std::uniform_int_distribution<int> id(0, 999999);
    return std::to_string(id(rng_));
}

}  // namespace avatar::signaling
