#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace avatar {

enum class ErrorCode {
    // geometry
    DegenerateProjection,
    ZeroVector,
    // facemesh
    DegenerateFrame,
    IndexOutOfRange,
    DegenerateTriangle,
    AlreadyDoubleSided,
    MalformedProfile,
    NonUnitQuaternion,
    UnreadableRecording,
    // codec
    WrongLandmarkCount,
    BadMagic,
    BadVersion,
    BadLength,
    // signaling
    IdExhaustion,
    RoomNotFound,
    RoomFull,
    RoomClosed,
    IllegalState,
    NoPeer,
    PeerGone,
    MalformedMessage,
    // cluster
    Duplicate,
    NotFound,
    RemoteUnreachable,
    RemoteRoomGone,
    PortUnavailable,
    StoreUnavailable,
    // peer
    NoUsableEndpoint,
    AllCandidatesFailed,
    VersionMismatch,
    TokenMismatch,
    Timeout,
    ChannelClosed,
    OversizedMessage,
    WrongPacketSize,
    // sim
    BudgetViolation,
    Io,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
    explicit Error(ErrorCode code) : std::runtime_error(std::string(to_string(code))), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace avatar
