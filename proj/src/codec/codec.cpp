#include "avatar/codec.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "avatar/error.hpp"

namespace avatar::codec {

Half f32_to_f16(float x) noexcept {
    const auto u = std::bit_cast<std::uint32_t>(x);
    const auto sign = static_cast<std::uint16_t>((u >> 16) & 0x8000u);
    const std::int32_t e32 = static_cast<std::int32_t>((u >> 23) & 0xFFu);
    const std::uint32_t m32 = u & 0x7FFFFFu;

    if (e32 == 0xFF) {
        if (m32 != 0) return {static_cast<std::uint16_t>(sign | 0x7E00u | (m32 >> 13))};
        return {static_cast<std::uint16_t>(sign | 0x7C00u)};
    }
    // Single-precision subnormals sit far below the smallest half subnormal.
    if (e32 == 0) return {sign};

    const std::int32_t e16 = e32 - 127 + 15;
    if (e16 >= 31) return {static_cast<std::uint16_t>(sign | 0x7C00u)};
    if (e16 >= 1) return {static_cast<std::uint16_t>(sign | (static_cast<std::uint32_t>(e16) << 10) | (m32 >> 13))};

    const std::int32_t shift = 14 - e16;
    if (shift >= 24) return {sign};
    const std::uint32_t full = 0x800000u | m32;
    return {static_cast<std::uint16_t>(sign | (full >> shift))};
}

float f16_to_f32(Half h) noexcept {
    const std::uint32_t sign = static_cast<std::uint32_t>(h.bits & 0x8000u) << 16;
    const std::uint32_t e = (h.bits >> 10) & 0x1Fu;
    const std::uint32_t m = h.bits & 0x3FFu;

    if (e == 0x1F) return std::bit_cast<float>(sign | 0x7F800000u | (m << 13));
    if (e == 0) {
        const float mag = std::ldexp(static_cast<float>(m), -24);
        return sign ? -mag : mag;
    }
    return std::bit_cast<float>(sign | ((e - 15 + 127) << 23) | (m << 13));
}

double truncation_ulp(double x) {
    const double a = std::abs(x);
    if (a < 0x1.0p-14) return 0x1.0p-24;
    int k = 0;
    std::frexp(a, &k);
    return std::ldexp(1.0, k - 1 - 10);
}

namespace {

void put_u16(std::uint8_t* p, std::uint16_t v) {
    p[0] = static_cast<std::uint8_t>(v & 0xFF);
    p[1] = static_cast<std::uint8_t>(v >> 8);
}

std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (static_cast<std::uint16_t>(p[1]) << 8));
}

template <typename Int>
void put_le(std::uint8_t* p, Int v) {
    for (std::size_t i = 0; i < sizeof(Int); ++i) p[i] = static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF);
}

template <typename Int>
Int get_le(const std::uint8_t* p) {
    Int v = 0;
    for (std::size_t i = 0; i < sizeof(Int); ++i) v |= static_cast<Int>(p[i]) << (8 * i);
    return v;
}

// Double to single, also toward zero, so the whole narrowing never grows a magnitude.
float narrow_toward_zero(double v) {
    float f = static_cast<float>(v);
    if (std::isfinite(v) && std::abs(static_cast<double>(f)) > std::abs(v)) f = std::nextafter(f, 0.0f);
    return f;
}

void put_half(std::uint8_t*& p, double v) {
    put_u16(p, f32_to_f16(narrow_toward_zero(v)).bits);
    p += 2;
}

double get_half(const std::uint8_t*& p) {
    const float v = f16_to_f32(Half{get_u16(p)});
    p += 2;
    return v;
}

}  // namespace

Packet encode_frame(std::span<const facemesh::Vec3> points, std::int64_t timestamp_ms, const FramePose& pose,
                    std::uint32_t sequence, std::uint8_t flags) {
    if (points.size() != facemesh::kLandmarkCount)
        throw Error(ErrorCode::WrongLandmarkCount, "expected 468 landmarks, got " + std::to_string(points.size()));

    for (const auto& p : points)
        if (std::isnan(p.x) || std::isnan(p.y) || std::isnan(p.z)) {
            flags |= kFlagHasNaN;
            break;
        }

    Packet out{};
    out[0] = kMagic[0];
    out[1] = kMagic[1];
    out[2] = kPacketVersion;
    out[3] = flags;
    put_le<std::uint32_t>(out.data() + 4, sequence);
    put_le<std::uint64_t>(out.data() + 8, static_cast<std::uint64_t>(timestamp_ms));

    std::uint8_t* p = out.data() + kHeaderSize;
    for (const auto& v : points) {
        put_half(p, v.x);
        put_half(p, v.y);
        put_half(p, v.z);
    }
    put_half(p, pose.translation.x);
    put_half(p, pose.translation.y);
    put_half(p, pose.translation.z);
    put_half(p, pose.rotation.x);
    put_half(p, pose.rotation.y);
    put_half(p, pose.rotation.z);
    put_half(p, pose.rotation.w);
    return out;
}

Packet encode_frame(const facemesh::LandmarkFrame& frame, const FramePose& pose, std::uint32_t sequence,
                    std::uint8_t flags) {
    return encode_frame(frame.points, frame.timestamp_ms, pose, sequence, flags);
}

DecodedFrame decode_frame(std::span<const std::uint8_t> bytes) {
    if (bytes.size() != kPacketSize)
        throw Error(ErrorCode::BadLength, "packet is " + std::to_string(bytes.size()) + " bytes, expected 2838");
    if (bytes[0] != kMagic[0] || bytes[1] != kMagic[1]) throw Error(ErrorCode::BadMagic, "not a mesh frame packet");
    if (bytes[2] != kPacketVersion)
        throw Error(ErrorCode::BadVersion, "unsupported packet version " + std::to_string(bytes[2]));

    DecodedFrame out;
    out.flags = bytes[3];
    out.sequence = get_le<std::uint32_t>(bytes.data() + 4);
    out.frame.timestamp_ms = static_cast<std::int64_t>(get_le<std::uint64_t>(bytes.data() + 8));

    const std::uint8_t* p = bytes.data() + kHeaderSize;
    for (auto& v : out.frame.points) {
        v.x = get_half(p);
        v.y = get_half(p);
        v.z = get_half(p);
    }
    out.pose.translation.x = get_half(p);
    out.pose.translation.y = get_half(p);
    out.pose.translation.z = get_half(p);
    out.pose.rotation.x = get_half(p);
    out.pose.rotation.y = get_half(p);
    out.pose.rotation.z = get_half(p);
    out.pose.rotation.w = get_half(p);
    return out;
}

PaceDecision pace(std::chrono::nanoseconds now, std::optional<std::chrono::nanoseconds> last_sent, double fps_cap,
                  std::chrono::nanoseconds slack) {
    if (!(fps_cap > 0.0)) return PaceDecision::Coalesce;
    if (!last_sent) return PaceDecision::Send;
    const double elapsed = static_cast<double>((now - *last_sent).count());
    const double needed = 1e9 / fps_cap - static_cast<double>(slack.count());
    return elapsed >= needed ? PaceDecision::Send : PaceDecision::Coalesce;
}

RateBudget budget(double fps_cap, std::size_t bytes_per_frame) {
    return {fps_cap, bytes_per_frame, fps_cap * static_cast<double>(bytes_per_frame)};
}

double h264_reference_rate(double height, double width, double bytes_per_pixel, double fps, double ratio) {
    return height * width * bytes_per_pixel * fps / ratio;
}

}  // namespace avatar::codec
