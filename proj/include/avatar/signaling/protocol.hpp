#pragma once

#include <nlohmann/json.hpp>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "avatar/error.hpp"

namespace avatar::signaling {

using Json = nlohmann::json;

enum class MessageType {
    CreateRoom,
    RoomCreated,
    JoinRoom,
    PeerJoined,
    Offer,
    Answer,
    IceCandidate,
    RelayFrame,
    HangUp,
    Error,
};

inline constexpr MessageType kAllMessageTypes[] = {
    MessageType::CreateRoom,   MessageType::RoomCreated, MessageType::JoinRoom, MessageType::PeerJoined,
    MessageType::Offer,        MessageType::Answer,      MessageType::IceCandidate, MessageType::RelayFrame,
    MessageType::HangUp,       MessageType::Error,
};

std::string_view to_string(MessageType t) noexcept;
std::optional<MessageType> parse_message_type(std::string_view s) noexcept;

/// Numeric error codes carried in Error documents.
enum class WireCode : int {
    RoomNotFound = 1,
    RoomFull = 2,
    IllegalState = 3,
    NoPeer = 4,
    PeerGone = 5,
    Malformed = 6,
};

WireCode wire_code(ErrorCode code) noexcept;
ErrorCode error_code(WireCode code) noexcept;

inline constexpr int kProtocolVersion = 1;
inline constexpr int kRelayProtocolVersion = 2;
inline constexpr std::size_t kMaxRelayBytes = 4096;

/// Relay-capable blobs: Offer, Answer, IceCandidate, RelayFrame.
bool is_routed(MessageType t) noexcept;

struct SignalMessage {
    MessageType type = MessageType::Error;
    std::optional<std::string> room;
    Json body;  // base64 string for negotiation blobs, object otherwise
    int version = kProtocolVersion;
    std::optional<std::string> proxy_room;  // inter-instance envelope

    static SignalMessage make(MessageType type, std::optional<std::string> room = std::nullopt, Json body = nullptr);
    static SignalMessage error(WireCode code, std::string text, std::optional<std::string> room = std::nullopt);
    static SignalMessage blob(MessageType type, std::string_view payload, std::optional<std::string> room = std::nullopt);

    /// Error code of an Error document, if any.
    [[nodiscard]] std::optional<WireCode> code() const;

    /// Decodes the base64 body of a negotiation or relay message.
    [[nodiscard]] std::string blob_bytes() const;

    bool operator==(const SignalMessage&) const = default;
};

/// Text form used on WebSocket frames and inside the proxy framing.
std::string serialize(const SignalMessage& msg);

/// Throws MalformedMessage on unparseable documents or unknown types.
SignalMessage parse(std::string_view text);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::string base64_encode(std::string_view bytes);
/// Throws MalformedMessage on invalid input.
std::string base64_decode(std::string_view text);
/// Decoded size of a base64 string without decoding it.
std::size_t base64_decoded_size(std::string_view text) noexcept;

}  // namespace avatar::signaling
