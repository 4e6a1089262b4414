#include "avatar/error.hpp"

namespace avatar {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::DegenerateProjection: return "DegenerateProjection";
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::DegenerateFrame: return "DegenerateFrame";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::DegenerateTriangle: return "DegenerateTriangle";
        case ErrorCode::AlreadyDoubleSided: return "AlreadyDoubleSided";
        case ErrorCode::MalformedProfile: return "MalformedProfile";
        case ErrorCode::NonUnitQuaternion: return "NonUnitQuaternion";
        case ErrorCode::UnreadableRecording: return "UnreadableRecording";
        case ErrorCode::WrongLandmarkCount: return "WrongLandmarkCount";
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::BadVersion: return "BadVersion";
        case ErrorCode::BadLength: return "BadLength";
        case ErrorCode::IdExhaustion: return "IdExhaustion";
        case ErrorCode::RoomNotFound: return "RoomNotFound";
        case ErrorCode::RoomFull: return "RoomFull";
        case ErrorCode::RoomClosed: return "RoomClosed";
        case ErrorCode::IllegalState: return "IllegalState";
        case ErrorCode::NoPeer: return "NoPeer";
        case ErrorCode::PeerGone: return "PeerGone";
        case ErrorCode::MalformedMessage: return "MalformedMessage";
        case ErrorCode::Duplicate: return "Duplicate";
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::RemoteUnreachable: return "RemoteUnreachable";
        case ErrorCode::RemoteRoomGone: return "RemoteRoomGone";
        case ErrorCode::PortUnavailable: return "PortUnavailable";
        case ErrorCode::StoreUnavailable: return "StoreUnavailable";
        case ErrorCode::NoUsableEndpoint: return "NoUsableEndpoint";
        case ErrorCode::AllCandidatesFailed: return "AllCandidatesFailed";
        case ErrorCode::VersionMismatch: return "VersionMismatch";
        case ErrorCode::TokenMismatch: return "TokenMismatch";
        case ErrorCode::Timeout: return "Timeout";
        case ErrorCode::ChannelClosed: return "ChannelClosed";
        case ErrorCode::OversizedMessage: return "OversizedMessage";
        case ErrorCode::WrongPacketSize: return "WrongPacketSize";
        case ErrorCode::BudgetViolation: return "BudgetViolation";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace avatar
