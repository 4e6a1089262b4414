#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "avatar/facemesh.hpp"

namespace avatar::facemesh {

/// Canonical synthetic face: upright, nose (5) at the origin, up along +y, right along +x.
/// Non-semantic landmarks are jittered by a seeded perturbation; landmarks 1, 5, 52, 282
/// are pinned so up and right are exactly orthogonal.
LandmarkFrame canonical_face(std::uint64_t seed);

enum class MotionKind { Still, Nod, Shake, Orbit };

std::optional<MotionKind> parse_motion(std::string_view name);
std::string_view to_string(MotionKind kind);

struct RigidPose {
    Quaternion rotation = Quaternion::identity();
    Vec3 translation;

    [[nodiscard]] Vec3 apply(const Vec3& p) const { return geometry::rotate_vector(rotation, p) + translation; }
};

struct MotionParams {
    MotionKind kind = MotionKind::Still;
    double amplitude_deg = 30.0;
    double period_s = 2.0;
    double fps = 30.0;
};

/// Pose of frame `index`; identity at index 0 for every kind.
RigidPose motion_pose(const MotionParams& params, std::size_t index);

LandmarkFrame apply_pose(const RigidPose& pose, const LandmarkFrame& frame);

Recording generate_recording(const MotionParams& params, std::size_t frames, std::uint64_t seed);

}  // namespace avatar::facemesh
