#include "avatar/signaling/protocol.hpp"

#include <boost/beast/core/detail/base64.hpp>
#include <array>

namespace avatar::signaling {

namespace b64 = boost::beast::detail::base64;

namespace {

constexpr std::array<std::string_view, 10> kNames{
    "CreateRoom", "RoomCreated", "JoinRoom", "PeerJoined", "Offer",
    "Answer",     "IceCandidate", "RelayFrame", "HangUp",   "Error",
};

}  // namespace

std::string_view to_string(MessageType t) noexcept { return kNames[static_cast<std::size_t>(t)]; }

std::optional<MessageType> parse_message_type(std::string_view s) noexcept {
    for (std::size_t i = 0; i < kNames.size(); ++i)
        if (kNames[i] == s) return static_cast<MessageType>(i);
    return std::nullopt;
}

WireCode wire_code(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::RoomNotFound:
        case ErrorCode::RoomClosed:
        case ErrorCode::RemoteRoomGone:
            return WireCode::RoomNotFound;
        case ErrorCode::RoomFull:
            return WireCode::RoomFull;
        case ErrorCode::NoPeer:
            return WireCode::NoPeer;
        case ErrorCode::PeerGone:
        case ErrorCode::RemoteUnreachable:
            return WireCode::PeerGone;
        case ErrorCode::MalformedMessage:
            return WireCode::Malformed;
        default:
            return WireCode::IllegalState;
    }
}

ErrorCode error_code(WireCode code) noexcept {
    switch (code) {
        case WireCode::RoomNotFound: return ErrorCode::RoomNotFound;
        case WireCode::RoomFull: return ErrorCode::RoomFull;
        case WireCode::IllegalState: return ErrorCode::IllegalState;
        case WireCode::NoPeer: return ErrorCode::NoPeer;
        case WireCode::PeerGone: return ErrorCode::PeerGone;
        case WireCode::Malformed: return ErrorCode::MalformedMessage;
    }
    return ErrorCode::IllegalState;
}

bool is_routed(MessageType t) noexcept {
    return t == MessageType::Offer || t == MessageType::Answer || t == MessageType::IceCandidate ||
           t == MessageType::RelayFrame;
}

SignalMessage SignalMessage::make(MessageType type, std::optional<std::string> room, Json body) {
    SignalMessage m;
    m.type = type;
    m.room = std::move(room);
    m.body = std::move(body);
    if (type == MessageType::RelayFrame) m.version = kRelayProtocolVersion;
    return m;
}

SignalMessage SignalMessage::error(WireCode code, std::string text, std::optional<std::string> room) {
    return make(MessageType::Error, std::move(room), Json{{"code", static_cast<int>(code)}, {"text", std::move(text)}});
}

SignalMessage SignalMessage::blob(MessageType type, std::string_view payload, std::optional<std::string> room) {
    return make(type, std::move(room), base64_encode(payload));
}

std::optional<WireCode> SignalMessage::code() const {
    if (type != MessageType::Error || !body.is_object()) return std::nullopt;
    const auto it = body.find("code");
    if (it == body.end() || !it->is_number_integer()) return std::nullopt;
    return static_cast<WireCode>(it->get<int>());
}

std::string SignalMessage::blob_bytes() const {
    if (!body.is_string()) throw Error(ErrorCode::MalformedMessage, std::string(to_string(type)) + " body is not a blob");
    return base64_decode(body.get_ref<const std::string&>());
}

std::string serialize(const SignalMessage& msg) {
    Json doc{{"v", msg.version}, {"type", to_string(msg.type)}};
    if (msg.room) doc["room"] = *msg.room;
    if (!msg.body.is_null()) doc["body"] = msg.body;
    if (msg.proxy_room) doc["proxy_room"] = *msg.proxy_room;
    return doc.dump();
}

SignalMessage parse(std::string_view text) {
    Json doc = Json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw Error(ErrorCode::MalformedMessage, "not a JSON object");
    const auto type_it = doc.find("type");
    if (type_it == doc.end() || !type_it->is_string()) throw Error(ErrorCode::MalformedMessage, "missing type");
    const auto type = parse_message_type(type_it->get_ref<const std::string&>());
    if (!type) throw Error(ErrorCode::MalformedMessage, "unknown type " + type_it->get<std::string>());

    SignalMessage m;
    m.type = *type;
    if (auto it = doc.find("v"); it != doc.end()) {
        if (!it->is_number_integer()) throw Error(ErrorCode::MalformedMessage, "bad version field");
        m.version = it->get<int>();
    }
    if (auto it = doc.find("room"); it != doc.end() && !it->is_null()) {
        if (!it->is_string()) throw Error(ErrorCode::MalformedMessage, "room must be a string");
        m.room = it->get<std::string>();
    }
    if (auto it = doc.find("body"); it != doc.end()) m.body = std::move(*it);
    if (auto it = doc.find("proxy_room"); it != doc.end()) {
        if (!it->is_string()) throw Error(ErrorCode::MalformedMessage, "proxy_room must be a string");
        m.proxy_room = it->get<std::string>();
    }
    return m;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(b64::encoded_size(bytes.size()), '\0');
    out.resize(b64::encode(out.data(), bytes.data(), bytes.size()));
    return out;
}

std::string base64_encode(std::string_view bytes) {
    return base64_encode(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

std::string base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) throw Error(ErrorCode::MalformedMessage, "base64 length not a multiple of 4");
    std::string out(b64::decoded_size(text.size()), '\0');
    const auto [written, read] = b64::decode(out.data(), text.data(), text.size());
    std::size_t pad = 0;
    while (pad < 2 && pad < text.size() && text[text.size() - 1 - pad] == '=') ++pad;
    if (read != text.size() - pad) throw Error(ErrorCode::MalformedMessage, "invalid base64");
    out.resize(written);
    return out;
}

std::size_t base64_decoded_size(std::string_view text) noexcept {
    std::size_t n = text.size() / 4 * 3;
    if (!text.empty() && text.back() == '=') --n;
    if (text.size() > 1 && text[text.size() - 2] == '=') --n;
    return n;
}

}  // namespace avatar::signaling
