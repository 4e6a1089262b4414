#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "avatar/geometry.hpp"

namespace avatar::facemesh {

using geometry::Quaternion;
using geometry::Vec3;

inline constexpr std::size_t kLandmarkCount = 468;

// Semantic landmark indices.
inline constexpr std::size_t kLowerNose = 1;
inline constexpr std::size_t kCenterNose = 5;
inline constexpr std::size_t kLeftEyelash = 52;
inline constexpr std::size_t kRightEyelash = 282;

struct LandmarkFrame {
    std::array<Vec3, kLandmarkCount> points{};
    std::int64_t timestamp_ms = 0;

    /// Throws WrongLandmarkCount unless `pts` has exactly 468 entries.
    static LandmarkFrame from_points(std::span<const Vec3> pts, std::int64_t timestamp_ms = 0);

    const Vec3& operator[](std::size_t i) const { return points[i]; }
    Vec3& operator[](std::size_t i) { return points[i]; }

    [[nodiscard]] bool all_finite() const;
    bool operator==(const LandmarkFrame&) const = default;
};

using Triangle = std::array<std::uint32_t, 3>;

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<Triangle> triangles;
    // Set once the reversed windings have been appended.
    bool double_sided = false;
};

class TessellationTable {
public:
    TessellationTable() = default;
    /// Validates every triple: indices < 468 and pairwise distinct.
    explicit TessellationTable(std::vector<Triangle> triangles);

    [[nodiscard]] const std::vector<Triangle>& triangles() const { return triangles_; }
    [[nodiscard]] std::size_t size() const { return triangles_.size(); }

    /// One triangle per line, three decimal indices; '#' starts a comment line.
    static TessellationTable parse(std::istream& in);
    static TessellationTable load(const std::filesystem::path& path);

    /// Eight triangles around the semantic landmarks, usable without the asset file.
    static TessellationTable toy();

private:
    std::vector<Triangle> triangles_;
};

/// Rigid correction: p -> scale * rotate(rotation, p + translation).
struct CalibrationState {
    Vec3 translation;
    Quaternion rotation = Quaternion::identity();
    double scale = 1.0;
};

Vec3 compute_up(const LandmarkFrame& frame);
Vec3 compute_right(const LandmarkFrame& frame);

/// Centers landmark 5 and aligns up to +y, then the re-measured right to +x.
/// Throws DegenerateFrame when up or right is near zero or the frame is not finite.
CalibrationState calibrate(const LandmarkFrame& initial);

Vec3 apply_calibration(const CalibrationState& state, const Vec3& p);
LandmarkFrame apply_calibration(const CalibrationState& state, const LandmarkFrame& frame);

/// Appends each triangle with reversed winding. Throws AlreadyDoubleSided on a doubled mesh.
TriangleMesh double_side(const TriangleMesh& mesh);

TriangleMesh build_mesh(const LandmarkFrame& frame, const TessellationTable& table);

// Calibration profile document.
inline constexpr int kProfileVersion = 1;
std::string save_calibration(const CalibrationState& state);
CalibrationState load_calibration(const std::string& document);

// Landmark recordings: header "landmark_count=468", then one line per frame holding
// timestamp_ms followed by 1404 reals (x y z per landmark).
struct Recording {
    std::vector<LandmarkFrame> frames;
};

void write_recording(std::ostream& out, const Recording& rec);
void write_recording(const std::filesystem::path& path, const Recording& rec);
Recording read_recording(std::istream& in);
Recording read_recording(const std::filesystem::path& path);

}  // namespace avatar::facemesh
