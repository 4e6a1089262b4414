#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "avatar/error.hpp"
#include "avatar/facemesh.hpp"
#include "avatar/synthetic.hpp"

using namespace avatar;
using namespace avatar::facemesh;
using geometry::cross;
using geometry::kUnitX;
using geometry::kUnitY;
using geometry::kUnitZ;
using geometry::normalized;
using geometry::rotate_vector;

namespace {

constexpr double kPi = std::numbers::pi;

void expect_vec(const Vec3& a, const Vec3& b, double tol) {
    EXPECT_NEAR(a.x, b.x, tol);
    EXPECT_NEAR(a.y, b.y, tol);
    EXPECT_NEAR(a.z, b.z, tol);
}

LandmarkFrame symmetric_frame() {
    LandmarkFrame f;
    f[kLeftEyelash] = {-1, 1, 0};
    f[kRightEyelash] = {1, 1, 0};
    f[kLowerNose] = {0, 0, 0};
    return f;
}

RigidPose random_pose(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> ang(-kPi, kPi);
    std::uniform_real_distribution<double> off(-2, 2);
    RigidPose pose;
    pose.rotation = geometry::euler_to_quaternion({ang(rng), ang(rng) / 2, ang(rng)});
    pose.translation = {off(rng), off(rng), off(rng)};
    return pose;
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::Io;
}

}  // namespace

TEST(LandmarkFrame, RequiresExactly468Points) {
    std::vector<Vec3> pts(467);
    EXPECT_EQ(code_of([&] { LandmarkFrame::from_points(pts); }), ErrorCode::WrongLandmarkCount);
    pts.resize(468, Vec3{1, 2, 3});
    const auto f = LandmarkFrame::from_points(pts, 99);
    EXPECT_EQ(f.timestamp_ms, 99);
    EXPECT_EQ(f[467], (Vec3{1, 2, 3}));
}

TEST(UpRight, Examples) {
    const LandmarkFrame f = symmetric_frame();
    expect_vec(compute_up(f), {0, 1, 0}, 0.0);
    expect_vec(compute_right(f), {2, 0, 0}, 0.0);

    LandmarkFrame coincident;
    coincident[kLeftEyelash] = {0, 1, 0};
    coincident[kRightEyelash] = {0, 1, 0};
    expect_vec(compute_up(coincident), {0, 1, 0}, 0.0);

    LandmarkFrame mirrored = f;
    for (auto& p : mirrored.points) p.x = -p.x;
    expect_vec(compute_right(mirrored), {-2, 0, 0}, 0.0);
}

TEST(UpRight, FollowRigidRotation) {
    const LandmarkFrame face = canonical_face(1);
    const auto q = Quaternion::from_axis_angle(kUnitZ, kPi / 2);
    const LandmarkFrame turned = apply_pose({q, {}}, face);
    expect_vec(compute_up(turned), rotate_vector(q, compute_up(face)), 1e-12);
    expect_vec(normalized(compute_up(turned)), {-1, 0, 0}, 1e-12);
    expect_vec(compute_right(turned), rotate_vector(q, compute_right(face)), 1e-12);
}

TEST(Calibrate, CanonicalFrameIsIdentity) {
    const auto s = calibrate(canonical_face(3));
    EXPECT_NEAR(s.rotation.w, 1.0, 1e-15);
    EXPECT_NEAR(s.rotation.x, 0.0, 1e-15);
    EXPECT_NEAR(s.rotation.y, 0.0, 1e-15);
    EXPECT_NEAR(s.rotation.z, 0.0, 1e-15);
    expect_vec(s.translation, {0, 0, 0}, 0.0);
    EXPECT_EQ(s.scale, 1.0);
}

TEST(Calibrate, TranslatedFrame) {
    const auto s = calibrate(apply_pose({Quaternion::identity(), {0.1, 0.2, 0.3}}, canonical_face(3)));
    expect_vec(s.translation, {-0.1, -0.2, -0.3}, 1e-15);
    EXPECT_NEAR(std::abs(s.rotation.w), 1.0, 1e-12);
}

TEST(Calibrate, RestoresRotatedFrame) {
    const LandmarkFrame face = canonical_face(3);
    const LandmarkFrame turned = apply_pose({Quaternion::from_axis_angle(kUnitZ, kPi / 6), {}}, face);
    const LandmarkFrame fixed = apply_calibration(calibrate(turned), turned);
    expect_vec(normalized(compute_up(fixed)), kUnitY, 1e-6);
    expect_vec(normalized(compute_right(fixed)), kUnitX, 1e-6);
}

TEST(Calibrate, DegenerateFrames) {
    LandmarkFrame flat;  // all landmarks at the origin
    EXPECT_EQ(code_of([&] { calibrate(flat); }), ErrorCode::DegenerateFrame);
    LandmarkFrame no_right = symmetric_frame();
    no_right[kRightEyelash] = no_right[kLeftEyelash] = {0, 1, 0};
    EXPECT_EQ(code_of([&] { calibrate(no_right); }), ErrorCode::DegenerateFrame);
    LandmarkFrame dropout = canonical_face(1);
    dropout[100].x = std::nan("");
    EXPECT_EQ(code_of([&] { calibrate(dropout); }), ErrorCode::DegenerateFrame);
}

TEST(ApplyCalibration, IdentityAndNoseCentering) {
    const LandmarkFrame face = canonical_face(5);
    EXPECT_EQ(apply_calibration(CalibrationState{}, face), face);

    std::mt19937_64 rng(41);
    for (int i = 0; i < 200; ++i) {
        const LandmarkFrame raw = apply_pose(random_pose(rng), face);
        const LandmarkFrame fixed = apply_calibration(calibrate(raw), raw);
        expect_vec(fixed[kCenterNose], {0, 0, 0}, 1e-9);
        EXPECT_EQ(fixed.timestamp_ms, raw.timestamp_ms);
    }
}

TEST(ApplyCalibration, OrthogonalFramesAlignBothAxes) {
    const LandmarkFrame face = canonical_face(5);
    ASSERT_NEAR(geometry::dot(compute_up(face), compute_right(face)), 0.0, 1e-15);
    std::mt19937_64 rng(43);
    for (int i = 0; i < 500; ++i) {
        const LandmarkFrame raw = apply_pose(random_pose(rng), face);
        const LandmarkFrame fixed = apply_calibration(calibrate(raw), raw);
        const Vec3 up = normalized(compute_up(fixed));
        const Vec3 right = normalized(compute_right(fixed));
        expect_vec(up, kUnitY, 1e-6);
        expect_vec(right, kUnitX, 1e-6);
        // Rotations preserve the cross product, so the normal lands on cross(+y, +x).
        expect_vec(cross(up, right), cross(kUnitY, kUnitX), 1e-6);
    }
}

TEST(ApplyCalibration, ScaleAppliesAfterRotation) {
    CalibrationState s;
    s.translation = {1, 0, 0};
    s.rotation = Quaternion::from_axis_angle(kUnitZ, kPi / 2);
    s.scale = 2.0;
    expect_vec(apply_calibration(s, Vec3{0, 0, 0}), {0, 2, 0}, 1e-12);
}

TEST(Calibrate, IdempotentOnCalibratedFrames) {
    const LandmarkFrame face = canonical_face(9);
    std::mt19937_64 rng(47);
    for (int i = 0; i < 200; ++i) {
        const LandmarkFrame raw = apply_pose(random_pose(rng), face);
        const LandmarkFrame fixed = apply_calibration(calibrate(raw), raw);
        const CalibrationState again = calibrate(fixed);
        EXPECT_NEAR(std::abs(again.rotation.w), 1.0, 1e-6);
        expect_vec(again.translation, {0, 0, 0}, 1e-9);
    }
}

TEST(Calibrate, NonOrthogonalResidualIsBounded) {
    // Eyelashes skewed vertically: up and right are no longer perpendicular, so only the
    // up axis is guaranteed; the right axis keeps a residual tilt.
    LandmarkFrame skew = canonical_face(2);
    skew[kRightEyelash].y += 0.05;
    const LandmarkFrame fixed = apply_calibration(calibrate(skew), skew);
    expect_vec(fixed[kCenterNose], {0, 0, 0}, 1e-12);
    const Vec3 right = normalized(compute_right(fixed));
    EXPECT_NEAR(right.x, 1.0, 1e-6);
    EXPECT_GT(std::abs(normalized(compute_up(fixed)).x), 1e-3);
}

TEST(Mesh, DoubleSide) {
    EXPECT_TRUE(double_side(TriangleMesh{}).triangles.empty());
    TriangleMesh one;
    one.vertices.resize(3);
    one.triangles = {{0, 1, 2}};
    const TriangleMesh two = double_side(one);
    ASSERT_EQ(two.triangles.size(), 2u);
    EXPECT_EQ(two.triangles[0], (Triangle{0, 1, 2}));
    EXPECT_EQ(two.triangles[1], (Triangle{2, 1, 0}));
    EXPECT_TRUE(two.double_sided);
    EXPECT_EQ(code_of([&] { double_side(two); }), ErrorCode::AlreadyDoubleSided);
}

TEST(Mesh, BuildFromToyTable) {
    const LandmarkFrame face = canonical_face(4);
    const TriangleMesh mesh = build_mesh(face, TessellationTable::toy());
    ASSERT_EQ(mesh.triangles.size(), 16u);
    ASSERT_EQ(mesh.vertices.size(), kLandmarkCount);
    for (std::size_t i = 0; i < kLandmarkCount; ++i) EXPECT_EQ(mesh.vertices[i], face[i]);
    const auto& tris = mesh.triangles;
    for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(tris[i + 8], (Triangle{tris[i][2], tris[i][1], tris[i][0]}));
}

TEST(Mesh, CanonicalAssetTable) {
    const auto table = TessellationTable::load(std::string(AVATAR_ASSET_DIR) + "/face_tessellation.txt");
    EXPECT_EQ(table.size(), 852u);
    const TriangleMesh mesh = build_mesh(canonical_face(0), table);
    EXPECT_EQ(mesh.vertices.size(), 468u);
    EXPECT_EQ(mesh.triangles.size(), 2 * table.size());
    std::set<std::uint32_t> used;
    for (const auto& t : table.triangles()) used.insert(t.begin(), t.end());
    EXPECT_EQ(used.size(), 468u);
}

TEST(Mesh, TableValidation) {
    std::istringstream degenerate("# comment\n0 0 1\n");
    EXPECT_EQ(code_of([&] { TessellationTable::parse(degenerate); }), ErrorCode::DegenerateTriangle);
    std::istringstream out_of_range("1 2 468\n");
    EXPECT_EQ(code_of([&] { TessellationTable::parse(out_of_range); }), ErrorCode::IndexOutOfRange);
    std::istringstream short_line("1 2\n");
    EXPECT_EQ(code_of([&] { TessellationTable::parse(short_line); }), ErrorCode::IndexOutOfRange);
    std::istringstream ok("# header\n\n1 2 3\n  4 5 6  \n");
    EXPECT_EQ(TessellationTable::parse(ok).size(), 2u);
}

TEST(Profile, IdentityRoundTrip) {
    const CalibrationState s = load_calibration(save_calibration(CalibrationState{}));
    EXPECT_EQ(s.rotation.w, 1.0);
    EXPECT_EQ(s.scale, 1.0);
    EXPECT_EQ(s.translation, (Vec3{}));
}

TEST(Profile, RandomStatesRoundTripExactly) {
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> d(-5, 5);
    for (int i = 0; i < 500; ++i) {
        CalibrationState s;
        s.translation = {d(rng), d(rng), d(rng)};
        s.rotation = geometry::euler_to_quaternion({d(rng), d(rng), d(rng)});
        s.scale = std::abs(d(rng)) + 0.01;
        const CalibrationState r = load_calibration(save_calibration(s));
        EXPECT_NEAR(r.translation.x, s.translation.x, 1e-12);
        EXPECT_NEAR(r.translation.y, s.translation.y, 1e-12);
        EXPECT_NEAR(r.translation.z, s.translation.z, 1e-12);
        EXPECT_NEAR(r.rotation.x, s.rotation.x, 1e-12);
        EXPECT_NEAR(r.rotation.y, s.rotation.y, 1e-12);
        EXPECT_NEAR(r.rotation.z, s.rotation.z, 1e-12);
        EXPECT_NEAR(r.rotation.w, s.rotation.w, 1e-12);
        EXPECT_NEAR(r.scale, s.scale, 1e-12);
    }
}

TEST(Profile, Rejections) {
    const std::string base = "version = 1\ntranslation = 0 0 0\nrotation = 0 0 0 1\n";
    EXPECT_EQ(code_of([&] { load_calibration(base + "scale = 0\n"); }), ErrorCode::MalformedProfile);
    EXPECT_EQ(code_of([&] { load_calibration(base + "scale = -1\n"); }), ErrorCode::MalformedProfile);
    EXPECT_EQ(code_of([&] { load_calibration(base); }), ErrorCode::MalformedProfile);
    EXPECT_EQ(code_of([&] { load_calibration("translation = 0 0 0\nrotation = 0 0 0 1\nscale = 1\n"); }),
              ErrorCode::MalformedProfile);
    EXPECT_EQ(code_of([&] { load_calibration("version = 2\ntranslation = 0 0 0\nrotation = 0 0 0 1\nscale = 1\n"); }),
              ErrorCode::MalformedProfile);
    EXPECT_EQ(code_of([&] { load_calibration("version = 1\ntranslation = 0 0\nrotation = 0 0 0 1\nscale = 1\n"); }),
              ErrorCode::MalformedProfile);
    EXPECT_EQ(code_of([&] { load_calibration("not a profile"); }), ErrorCode::MalformedProfile);
    EXPECT_EQ(code_of([&] { load_calibration("version = 1\ntranslation = 0 0 0\nrotation = 0 0 0 1.01\nscale = 1\n"); }),
              ErrorCode::NonUnitQuaternion);
}

TEST(Recording, RoundTripIsExact) {
    MotionParams params;
    params.kind = MotionKind::Orbit;
    const Recording rec = generate_recording(params, 5, 77);
    std::stringstream io;
    write_recording(io, rec);
    const Recording back = read_recording(io);
    ASSERT_EQ(back.frames.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(back.frames[i], rec.frames[i]);
}

TEST(Recording, Rejections) {
    std::istringstream bad_header("landmark_count=10\n");
    EXPECT_EQ(code_of([&] { read_recording(bad_header); }), ErrorCode::UnreadableRecording);
    std::istringstream short_row("landmark_count=468\n0 1 2 3\n");
    EXPECT_EQ(code_of([&] { read_recording(short_row); }), ErrorCode::UnreadableRecording);
    std::istringstream empty("");
    EXPECT_EQ(code_of([&] { read_recording(empty); }), ErrorCode::UnreadableRecording);
    EXPECT_EQ(code_of([&] { read_recording(std::filesystem::path("/nonexistent/rec.txt")); }),
              ErrorCode::UnreadableRecording);
}

TEST(Synthetic, StillFramesAreIdentical) {
    const Recording rec = generate_recording({MotionKind::Still}, 10, 5);
    ASSERT_EQ(rec.frames.size(), 10u);
    for (const auto& f : rec.frames) EXPECT_EQ(f.points, rec.frames[0].points);
    EXPECT_EQ(rec.frames[3].timestamp_ms, 100);
}

TEST(Synthetic, EveryMotionStartsCanonical) {
    for (auto kind : {MotionKind::Still, MotionKind::Nod, MotionKind::Shake, MotionKind::Orbit}) {
        const Recording rec = generate_recording({kind}, 3, 12);
        const CalibrationState s = calibrate(rec.frames[0]);
        EXPECT_NEAR(std::abs(s.rotation.w), 1.0, 1e-15) << to_string(kind);
        expect_vec(s.translation, {0, 0, 0}, 0.0);
        expect_vec(normalized(compute_up(rec.frames[0])), kUnitY, 0.0);
        expect_vec(normalized(compute_right(rec.frames[0])), kUnitX, 0.0);
    }
}

TEST(Synthetic, ShakeCalibrationRecoversAppliedRotation) {
    MotionParams params;
    params.kind = MotionKind::Shake;
    params.amplitude_deg = 30.0;
    const std::size_t peak = 15;  // quarter period at 30 fps, 2 s period
    const Recording rec = generate_recording(params, 31, 8);
    const RigidPose applied = motion_pose(params, peak);
    const Vec3 axis{applied.rotation.x, applied.rotation.y, applied.rotation.z};
    EXPECT_NEAR(2.0 * std::atan2(geometry::norm(axis), applied.rotation.w), kPi / 6, 1e-12);

    const CalibrationState s = calibrate(rec.frames[peak]);
    const Quaternion residual = geometry::quaternion_multiply(s.rotation, applied.rotation);
    EXPECT_NEAR(std::abs(residual.w), 1.0, 1e-6);
    EXPECT_NEAR(residual.x, 0.0, 1e-6);
    EXPECT_NEAR(residual.y, 0.0, 1e-6);
    EXPECT_NEAR(residual.z, 0.0, 1e-6);
}

TEST(Synthetic, DeterministicPerSeed) {
    std::stringstream a, b, c;
    write_recording(a, generate_recording({MotionKind::Nod}, 4, 100));
    write_recording(b, generate_recording({MotionKind::Nod}, 4, 100));
    write_recording(c, generate_recording({MotionKind::Nod}, 4, 101));
    EXPECT_EQ(a.str(), b.str());
    EXPECT_NE(a.str(), c.str());
}
