#include "avatar/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace avatar::facemesh {

namespace {

#include "canonical_layout.inc"

constexpr double kHalfWidth = 0.5;
constexpr double kDepth = 0.35;
constexpr double kJitter = 0.004;

// Uniform in [-1, 1) from the raw engine output; stable across standard libraries.
double jitter_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

double surface_z(double x, double y) {
    const double r = std::min((x / 0.45) * (x / 0.45) + (y / 0.55) * (y / 0.55), 1.0);
    const double bowl = kDepth * (1.0 - std::sqrt(1.0 - r));
    const double nose = -0.08 * std::exp(-(x * x + (y + 0.03) * (y + 0.03)) / 0.006);
    return bowl + nose;
}

}  // namespace

LandmarkFrame canonical_face(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    LandmarkFrame f;
    const double nose_z = surface_z(0.0, 0.0);
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        const double x = kCanonicalLayout[i][0] * kHalfWidth;
        const double y = kCanonicalLayout[i][1] * kHalfWidth;
        Vec3 p{x, y, surface_z(x, y) - nose_z};
        const Vec3 d{jitter_unit(rng), jitter_unit(rng), jitter_unit(rng)};
        f.points[i] = p + d * kJitter;
    }

    const Vec3 l52 = f.points[kLeftEyelash];
    const Vec3 l282 = f.points[kRightEyelash];
    const double half = (std::abs(l52.x) + std::abs(l282.x)) / 2.0;
    const double eye_y = (l52.y + l282.y) / 2.0;
    const double eye_z = (l52.z + l282.z) / 2.0;
    f.points[kLeftEyelash] = {-half, eye_y, eye_z};
    f.points[kRightEyelash] = {half, eye_y, eye_z};
    f.points[kLowerNose] = {0.0, f.points[kLowerNose].y, eye_z};
    f.points[kCenterNose] = {0.0, 0.0, 0.0};
    return f;
}

std::optional<MotionKind> parse_motion(std::string_view name) {
    if (name == "still") return MotionKind::Still;
    if (name == "nod") return MotionKind::Nod;
    if (name == "shake") return MotionKind::Shake;
    if (name == "orbit") return MotionKind::Orbit;
    return std::nullopt;
}

std::string_view to_string(MotionKind kind) {
    switch (kind) {
        case MotionKind::Still: return "still";
        case MotionKind::Nod: return "nod";
        case MotionKind::Shake: return "shake";
        case MotionKind::Orbit: return "orbit";
    }
    return "still";
}

RigidPose motion_pose(const MotionParams& params, std::size_t index) {
    const double t = static_cast<double>(index) / params.fps;
    const double phase = 2.0 * std::numbers::pi * t / params.period_s;
    const double amp = params.amplitude_deg * std::numbers::pi / 180.0;
    RigidPose pose;
    switch (params.kind) {
        case MotionKind::Still: break;
        case MotionKind::Nod:
            pose.rotation = Quaternion::from_axis_angle(geometry::kUnitX, amp * std::sin(phase));
            break;
        case MotionKind::Shake:
            pose.rotation = Quaternion::from_axis_angle(geometry::kUnitY, amp * std::sin(phase));
            break;
        case MotionKind::Orbit: {
            const auto yaw = Quaternion::from_axis_angle(geometry::kUnitY, amp * std::sin(phase));
            const auto pitch = Quaternion::from_axis_angle(geometry::kUnitX, 0.5 * amp * std::sin(2.0 * phase));
            pose.rotation = geometry::quaternion_multiply(pitch, yaw);
            pose.translation = {0.1 * std::sin(phase), 0.05 * std::sin(2.0 * phase), 0.0};
            break;
        }
    }
    return pose;
}

LandmarkFrame apply_pose(const RigidPose& pose, const LandmarkFrame& frame) {
    LandmarkFrame out;
    out.timestamp_ms = frame.timestamp_ms;
    for (std::size_t i = 0; i < kLandmarkCount; ++i) out.points[i] = pose.apply(frame.points[i]);
    return out;
}

Recording generate_recording(const MotionParams& params, std::size_t frames, std::uint64_t seed) {
    const LandmarkFrame face = canonical_face(seed);
    Recording rec;
    rec.frames.reserve(frames);
    for (std::size_t k = 0; k < frames; ++k) {
        LandmarkFrame f = apply_pose(motion_pose(params, k), face);
        f.timestamp_ms = std::llround(static_cast<double>(k) * 1000.0 / params.fps);
        rec.frames.push_back(f);
    }
    return rec;
}

}  // namespace avatar::facemesh
