#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "avatar/facemesh.hpp"

namespace avatar::codec {

/// IEEE binary16 bit pattern: 1 sign bit, 5 exponent bits, 10 mantissa bits.
struct Half {
    std::uint16_t bits = 0;
    constexpr bool operator==(const Half&) const = default;
};

/// Narrowing with mantissa truncation (round toward zero). Exponents past the half
/// range become signed infinity, small magnitudes become subnormals, then signed zero.
/// NaN keeps sign and leading payload bits with the quiet bit set.
Half f32_to_f16(float x) noexcept;

/// Exact widening.
float f16_to_f32(Half h) noexcept;

// Packet layout, little-endian:
//   0  magic "MW" (2)   2 version (1)   3 flags (1)   4 sequence (u32)   8 timestamp_ms (u64)
//   16 coords: 468 x {x,y,z} half (2808)
//   2824 translation {x,y,z} half (6)   2830 rotation {x,y,z,w} half (8)
inline constexpr std::size_t kHeaderSize = 16;
inline constexpr std::size_t kCoordBytes = facemesh::kLandmarkCount * 3 * 2;
inline constexpr std::size_t kPoseBytes = 14;
inline constexpr std::size_t kPacketSize = kHeaderSize + kCoordBytes + kPoseBytes;
static_assert(kPacketSize == 2838);

inline constexpr std::array<std::uint8_t, 2> kMagic{'M', 'W'};
inline constexpr std::uint8_t kPacketVersion = 1;

// Frame flags.
inline constexpr std::uint8_t kFlagHasNaN = 0x01;   // some coordinate is NaN (tracker dropout)
inline constexpr std::uint8_t kFlagRelay = 0x02;    // frame travels through the signaling relay

using Packet = std::array<std::uint8_t, kPacketSize>;

struct FramePose {
    facemesh::Vec3 translation;
    facemesh::Quaternion rotation = facemesh::Quaternion::identity();
};

struct DecodedFrame {
    facemesh::LandmarkFrame frame;
    FramePose pose;
    std::uint32_t sequence = 0;
    std::uint8_t flags = 0;
};

/// The NaN flag is set automatically when any coordinate is NaN.
Packet encode_frame(const facemesh::LandmarkFrame& frame, const FramePose& pose, std::uint32_t sequence,
                    std::uint8_t flags = 0);

/// Throws WrongLandmarkCount unless `points` has 468 entries.
Packet encode_frame(std::span<const facemesh::Vec3> points, std::int64_t timestamp_ms, const FramePose& pose,
                    std::uint32_t sequence, std::uint8_t flags = 0);

/// Throws BadLength, BadMagic or BadVersion.
DecodedFrame decode_frame(std::span<const std::uint8_t> bytes);

/// Quantization step of a truncated half at magnitude |x| (subnormal step below 2^-14).
double truncation_ulp(double x);

enum class PaceDecision { Send, Coalesce };

/// Sending is allowed when `now - last_sent >= 1/fps_cap - slack`. The slack absorbs
/// millisecond timestamp rounding; a zero cap never sends.
PaceDecision pace(std::chrono::nanoseconds now, std::optional<std::chrono::nanoseconds> last_sent, double fps_cap,
                  std::chrono::nanoseconds slack = std::chrono::milliseconds(1));

/// Per-sender pacing with a single latest-wins pending slot. Not thread-safe.
template <typename Payload>
class Pacer {
public:
    explicit Pacer(double fps_cap, std::chrono::nanoseconds slack = std::chrono::milliseconds(1))
        : fps_cap_(fps_cap), slack_(slack) {}

    /// Returns the payload to transmit now; otherwise it replaces the pending one.
    std::optional<Payload> offer(std::chrono::nanoseconds now, Payload payload) {
        if (pace(now, last_sent_, fps_cap_, slack_) == PaceDecision::Send) {
            pending_.reset();
            last_sent_ = now;
            return payload;
        }
        pending_ = std::move(payload);
        return std::nullopt;
    }

    /// Releases the pending payload once its slot is due.
    std::optional<Payload> poll(std::chrono::nanoseconds now) {
        if (!pending_ || pace(now, last_sent_, fps_cap_, slack_) != PaceDecision::Send) return std::nullopt;
        last_sent_ = now;
        auto out = std::move(pending_);
        pending_.reset();
        return out;
    }

    [[nodiscard]] bool has_pending() const { return pending_.has_value(); }

    /// Earliest time at which a send is permitted.
    [[nodiscard]] std::chrono::nanoseconds next_due() const {
        if (!last_sent_) return std::chrono::nanoseconds::zero();
        return *last_sent_ + interval() - slack_;
    }

    [[nodiscard]] std::chrono::nanoseconds interval() const {
        return std::chrono::nanoseconds(static_cast<std::int64_t>(1e9 / fps_cap_));
    }

private:
    double fps_cap_;
    std::chrono::nanoseconds slack_;
    std::optional<std::chrono::nanoseconds> last_sent_;
    std::optional<Payload> pending_;
};

struct RateBudget {
    double fps_cap = 0.0;
    std::size_t bytes_per_frame = 0;
    double bytes_per_second = 0.0;
};

RateBudget budget(double fps_cap, std::size_t bytes_per_frame);

/// Raw video byte rate divided by a compression ratio.
double h264_reference_rate(double height, double width, double bytes_per_pixel, double fps, double ratio);

}  // namespace avatar::codec
