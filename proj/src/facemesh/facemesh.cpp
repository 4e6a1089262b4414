#include "avatar/facemesh.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "avatar/error.hpp"
#include "text_util.hpp"

namespace avatar::facemesh {

using geometry::normalized;
using geometry::quaternion_between;
using geometry::quaternion_multiply;
using geometry::rotate_vector;

LandmarkFrame LandmarkFrame::from_points(std::span<const Vec3> pts, std::int64_t timestamp_ms) {
    if (pts.size() != kLandmarkCount)
        throw Error(ErrorCode::WrongLandmarkCount,
                    "expected 468 landmarks, got " + std::to_string(pts.size()));
    LandmarkFrame f;
    std::copy(pts.begin(), pts.end(), f.points.begin());
    f.timestamp_ms = timestamp_ms;
    return f;
}

bool LandmarkFrame::all_finite() const {
    for (const auto& p : points)
        if (!p.finite()) return false;
    return true;
}

TessellationTable::TessellationTable(std::vector<Triangle> triangles) : triangles_(std::move(triangles)) {
    for (std::size_t i = 0; i < triangles_.size(); ++i) {
        const auto& t = triangles_[i];
        for (auto idx : t)
            if (idx >= kLandmarkCount)
                throw Error(ErrorCode::IndexOutOfRange,
                            "triangle " + std::to_string(i) + " references landmark " + std::to_string(idx));
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
            throw Error(ErrorCode::DegenerateTriangle, "triangle " + std::to_string(i) + " repeats an index");
    }
}

TessellationTable TessellationTable::parse(std::istream& in) {
    std::vector<Triangle> tris;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto body = detail::trim(line);
        if (body.empty() || body.front() == '#') continue;
        const auto fields = detail::split_ws(body);
        if (fields.size() != 3)
            throw Error(ErrorCode::IndexOutOfRange, "line " + std::to_string(lineno) + ": expected 3 indices");
        Triangle t{};
        for (std::size_t k = 0; k < 3; ++k) {
            const auto v = detail::parse_int<std::uint32_t>(fields[k]);
            if (!v)
                throw Error(ErrorCode::IndexOutOfRange,
                            "line " + std::to_string(lineno) + ": bad index '" + std::string(fields[k]) + "'");
            t[k] = *v;
        }
        tris.push_back(t);
    }
    return TessellationTable(std::move(tris));
}

TessellationTable TessellationTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open tessellation " + path.string());
    return parse(in);
}

TessellationTable TessellationTable::toy() {
    return TessellationTable({{5, 282, 52},
                              {5, 52, 1},
                              {5, 1, 282},
                              {52, 282, 151},
                              {52, 234, 1},
                              {282, 1, 454},
                              {1, 234, 152},
                              {1, 152, 454}});
}

Vec3 compute_up(const LandmarkFrame& frame) {
    return (frame[kLeftEyelash] + frame[kRightEyelash]) / 2.0 - frame[kLowerNose];
}

Vec3 compute_right(const LandmarkFrame& frame) { return frame[kRightEyelash] - frame[kLeftEyelash]; }

CalibrationState calibrate(const LandmarkFrame& initial) {
    if (!initial.all_finite()) throw Error(ErrorCode::DegenerateFrame, "frame has non-finite landmarks");
    const Vec3 up = compute_up(initial);
    const Vec3 right = compute_right(initial);
    if (!(geometry::norm(up) > 1e-9)) throw Error(ErrorCode::DegenerateFrame, "up vector is degenerate");
    if (!(geometry::norm(right) > 1e-9)) throw Error(ErrorCode::DegenerateFrame, "right vector is degenerate");

    const Quaternion q_up = quaternion_between(up, geometry::kUnitY);
    // The right off-angle is measured after up has been aligned, so the second
    // rotation turns about +y when up and right are orthogonal.
    const Quaternion q_right = quaternion_between(rotate_vector(q_up, right), geometry::kUnitX);

    CalibrationState s;
    s.translation = -initial[kCenterNose];
    s.rotation = quaternion_multiply(q_right, q_up);
    s.scale = 1.0;
    return s;
}

Vec3 apply_calibration(const CalibrationState& state, const Vec3& p) {
    return rotate_vector(state.rotation, p + state.translation) * state.scale;
}

LandmarkFrame apply_calibration(const CalibrationState& state, const LandmarkFrame& frame) {
    LandmarkFrame out;
    out.timestamp_ms = frame.timestamp_ms;
    for (std::size_t i = 0; i < kLandmarkCount; ++i) out.points[i] = apply_calibration(state, frame.points[i]);
    return out;
}

TriangleMesh double_side(const TriangleMesh& mesh) {
    if (mesh.double_sided) throw Error(ErrorCode::AlreadyDoubleSided, "mesh already holds both windings");
    TriangleMesh out;
    out.vertices = mesh.vertices;
    out.triangles.reserve(mesh.triangles.size() * 2);
    out.triangles = mesh.triangles;
    for (const auto& t : mesh.triangles) out.triangles.push_back({t[2], t[1], t[0]});
    out.double_sided = true;
    return out;
}

TriangleMesh build_mesh(const LandmarkFrame& frame, const TessellationTable& table) {
    TriangleMesh mesh;
    mesh.vertices.assign(frame.points.begin(), frame.points.end());
    for (const auto& t : table.triangles())
        for (auto idx : t)
            if (idx >= mesh.vertices.size())
                throw Error(ErrorCode::IndexOutOfRange, "triangle index " + std::to_string(idx));
    mesh.triangles = table.triangles();
    return double_side(mesh);
}

namespace {

void append_vec(std::string& out, std::initializer_list<double> values) {
    bool first = true;
    for (double v : values) {
        if (!first) out += ' ';
        detail::append_double(out, v);
        first = false;
    }
}

std::vector<double> parse_reals(std::string_view value, std::size_t expected, std::string_view key) {
    const auto fields = detail::split_ws(value);
    if (fields.size() != expected)
        throw Error(ErrorCode::MalformedProfile, std::string(key) + ": expected " + std::to_string(expected) + " values");
    std::vector<double> out;
    for (auto f : fields) {
        const auto v = detail::parse_double(f);
        if (!v || !std::isfinite(*v))
            throw Error(ErrorCode::MalformedProfile, std::string(key) + ": bad number '" + std::string(f) + "'");
        out.push_back(*v);
    }
    return out;
}

}  // namespace

std::string save_calibration(const CalibrationState& state) {
    std::string out = "# avatar calibration profile\nversion = 1\ntranslation = ";
    append_vec(out, {state.translation.x, state.translation.y, state.translation.z});
    out += "\nrotation = ";
    append_vec(out, {state.rotation.x, state.rotation.y, state.rotation.z, state.rotation.w});
    out += "\nscale = ";
    detail::append_double(out, state.scale);
    out += '\n';
    return out;
}

CalibrationState load_calibration(const std::string& document) {
    std::istringstream in(document);
    std::string line;
    std::optional<int> version;
    std::optional<std::vector<double>> translation, rotation, scale;
    while (std::getline(in, line)) {
        const auto body = detail::trim(line);
        if (body.empty() || body.front() == '#') continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos)
            throw Error(ErrorCode::MalformedProfile, "expected key = value, got '" + std::string(body) + "'");
        const auto key = detail::trim(body.substr(0, eq));
        const auto value = detail::trim(body.substr(eq + 1));
        if (key == "version") {
            version = detail::parse_int<int>(value);
            if (!version) throw Error(ErrorCode::MalformedProfile, "bad version");
        } else if (key == "translation") {
            translation = parse_reals(value, 3, key);
        } else if (key == "rotation") {
            rotation = parse_reals(value, 4, key);
        } else if (key == "scale") {
            scale = parse_reals(value, 1, key);
        } else {
            throw Error(ErrorCode::MalformedProfile, "unknown key '" + std::string(key) + "'");
        }
    }
    if (!version) throw Error(ErrorCode::MalformedProfile, "missing version");
    if (*version != kProfileVersion)
        throw Error(ErrorCode::MalformedProfile, "unsupported version " + std::to_string(*version));
    if (!translation || !rotation || !scale) throw Error(ErrorCode::MalformedProfile, "missing field");
    if (!((*scale)[0] > 0.0)) throw Error(ErrorCode::MalformedProfile, "scale must be positive");

    CalibrationState s;
    s.translation = {(*translation)[0], (*translation)[1], (*translation)[2]};
    s.rotation = {(*rotation)[0], (*rotation)[1], (*rotation)[2], (*rotation)[3]};
    s.scale = (*scale)[0];
    if (std::abs(s.rotation.norm() - 1.0) > 1e-6)
        throw Error(ErrorCode::NonUnitQuaternion, "rotation norm deviates from 1 by more than 1e-6");
    return s;
}

void write_recording(std::ostream& out, const Recording& rec) {
    out << "landmark_count=" << kLandmarkCount << '\n';
    std::string line;
    for (const auto& f : rec.frames) {
        line = std::to_string(f.timestamp_ms);
        for (const auto& p : f.points) {
            for (double v : {p.x, p.y, p.z}) {
                line += ' ';
                detail::append_double(line, v);
            }
        }
        line += '\n';
        out << line;
    }
}

void write_recording(const std::filesystem::path& path, const Recording& rec) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write recording " + path.string());
    write_recording(out, rec);
    if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

Recording read_recording(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::UnreadableRecording, "empty recording");
    if (detail::trim(line) != "landmark_count=468")
        throw Error(ErrorCode::UnreadableRecording, "bad header '" + line + "'");
    Recording rec;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_ws(line);
        if (fields.size() != 1 + 3 * kLandmarkCount)
            throw Error(ErrorCode::UnreadableRecording,
                        "line " + std::to_string(lineno) + ": expected 1405 fields, got " + std::to_string(fields.size()));
        LandmarkFrame f;
        const auto ts = detail::parse_int<std::int64_t>(fields[0]);
        if (!ts) throw Error(ErrorCode::UnreadableRecording, "line " + std::to_string(lineno) + ": bad timestamp");
        f.timestamp_ms = *ts;
        for (std::size_t i = 0; i < kLandmarkCount; ++i) {
            double c[3];
            for (std::size_t k = 0; k < 3; ++k) {
                const auto v = detail::parse_double(fields[1 + 3 * i + k]);
                if (!v) throw Error(ErrorCode::UnreadableRecording, "line " + std::to_string(lineno) + ": bad real");
                c[k] = *v;
            }
            f.points[i] = {c[0], c[1], c[2]};
        }
        rec.frames.push_back(f);
    }
    return rec;
}

Recording read_recording(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::UnreadableRecording, "cannot open " + path.string());
    return read_recording(in);
}

}  // namespace avatar::facemesh
