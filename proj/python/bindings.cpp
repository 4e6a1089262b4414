#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "avatar/codec.hpp"
#include "avatar/error.hpp"
#include "avatar/facemesh.hpp"
#include "avatar/geometry.hpp"
#include "avatar/synthetic.hpp"

namespace py = pybind11;
using namespace avatar;

namespace {

using V3 = std::array<double, 3>;
using Q4 = std::array<double, 4>;

geometry::Vec3 vec(const V3& a) { return {a[0], a[1], a[2]}; }
V3 tup(const geometry::Vec3& v) { return {v.x, v.y, v.z}; }
geometry::Quaternion quat(const Q4& a) { return {a[0], a[1], a[2], a[3]}; }
Q4 tup(const geometry::Quaternion& q) { return {q.x, q.y, q.z, q.w}; }

facemesh::LandmarkFrame to_frame(const std::vector<V3>& points, std::int64_t timestamp_ms) {
    std::vector<geometry::Vec3> pts;
    pts.reserve(points.size());
    for (const auto& p : points) pts.push_back(vec(p));
    return facemesh::LandmarkFrame::from_points(pts, timestamp_ms);
}

std::vector<V3> to_points(const facemesh::LandmarkFrame& f) {
    std::vector<V3> out;
    out.reserve(f.points.size());
    for (const auto& p : f.points) out.push_back(tup(p));
    return out;
}

py::dict frame_dict(const facemesh::LandmarkFrame& f) {
    py::dict d;
    d["points"] = to_points(f);
    d["timestamp_ms"] = f.timestamp_ms;
    return d;
}

}  // namespace

PYBIND11_MODULE(_avatar, m) {
    m.doc() = "Avatar codec, geometry and face mesh core";

    static py::exception<Error> error(m, "AvatarError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = py::reinterpret_borrow<py::object>(error)(py::str(std::string(to_string(e.code())) + ": " + e.what()));
            exc.attr("code") = std::string(to_string(e.code()));
            PyErr_SetObject(error.ptr(), exc.ptr());
        }
    });

    m.attr("PACKET_SIZE") = codec::kPacketSize;
    m.attr("LANDMARK_COUNT") = facemesh::kLandmarkCount;

    // codec
    m.def("f32_to_f16", [](float x) { return codec::f32_to_f16(x).bits; }, py::arg("x"));
    m.def("f16_to_f32", [](std::uint16_t bits) { return codec::f16_to_f32({bits}); }, py::arg("bits"));
    m.def("truncation_ulp", &codec::truncation_ulp, py::arg("x"));
    m.def(
        "encode_frame",
        [](const std::vector<V3>& points, std::int64_t timestamp_ms, std::uint32_t sequence, const V3& translation,
           const Q4& rotation, std::uint8_t flags) {
            const auto packet =
                codec::encode_frame(to_frame(points, timestamp_ms), {vec(translation), quat(rotation)}, sequence, flags);
            return py::bytes(reinterpret_cast<const char*>(packet.data()), packet.size());
        },
        py::arg("points"), py::arg("timestamp_ms") = 0, py::arg("sequence") = 0,
        py::arg("translation") = V3{0, 0, 0}, py::arg("rotation") = Q4{0, 0, 0, 1}, py::arg("flags") = 0);
    m.def(
        "decode_frame",
        [](const py::bytes& data) {
            const std::string_view s = data;
            const auto d = codec::decode_frame(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
            py::dict out = frame_dict(d.frame);
            out["sequence"] = d.sequence;
            out["flags"] = d.flags;
            out["translation"] = tup(d.pose.translation);
            out["rotation"] = tup(d.pose.rotation);
            return out;
        },
        py::arg("data"));
    m.def(
        "budget",
        [](double fps_cap, std::size_t bytes_per_frame) { return codec::budget(fps_cap, bytes_per_frame).bytes_per_second; },
        py::arg("fps_cap"), py::arg("bytes_per_frame") = codec::kPacketSize);
    m.def("h264_reference_rate", &codec::h264_reference_rate, py::arg("height"), py::arg("width"),
          py::arg("bytes_per_pixel"), py::arg("fps"), py::arg("ratio"));

    // geometry
    m.def(
        "project",
        [](const V3& point, const V3& position, const V3& orientation, const V3& surface) {
            geometry::CameraPose cam{vec(position), {orientation[0], orientation[1], orientation[2]}, vec(surface)};
            const auto b = geometry::project(cam, vec(point));
            return std::array<double, 2>{b.x, b.y};
        },
        py::arg("point"), py::arg("position") = V3{0, 0, 0}, py::arg("orientation") = V3{0, 0, 0},
        py::arg("surface") = V3{0, 0, 1});
    m.def(
        "euler_to_quaternion",
        [](double phi, double theta, double psi) { return tup(geometry::euler_to_quaternion({phi, theta, psi})); },
        py::arg("phi"), py::arg("theta"), py::arg("psi"));
    m.def(
        "euler_to_matrix",
        [](double phi, double theta, double psi) {
            const auto r = geometry::euler_to_matrix({phi, theta, psi});
            std::array<V3, 3> rows{};
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) rows[i][j] = r.m[3 * i + j];
            return rows;
        },
        py::arg("phi"), py::arg("theta"), py::arg("psi"));
    m.def(
        "rotate_vector", [](const Q4& q, const V3& v) { return tup(geometry::rotate_vector(quat(q), vec(v))); },
        py::arg("q"), py::arg("v"));

    // face mesh
    py::class_<facemesh::CalibrationState>(m, "CalibrationState")
        .def(py::init<>())
        .def_property(
            "translation", [](const facemesh::CalibrationState& s) { return tup(s.translation); },
            [](facemesh::CalibrationState& s, const V3& v) { s.translation = vec(v); })
        .def_property(
            "rotation", [](const facemesh::CalibrationState& s) { return tup(s.rotation); },
            [](facemesh::CalibrationState& s, const Q4& q) { s.rotation = quat(q); })
        .def_readwrite("scale", &facemesh::CalibrationState::scale);

    m.def(
        "calibrate", [](const std::vector<V3>& points) { return facemesh::calibrate(to_frame(points, 0)); },
        py::arg("points"));
    m.def(
        "apply_calibration",
        [](const facemesh::CalibrationState& s, const std::vector<V3>& points) {
            return to_points(facemesh::apply_calibration(s, to_frame(points, 0)));
        },
        py::arg("state"), py::arg("points"));
    m.def("save_calibration", &facemesh::save_calibration, py::arg("state"));
    m.def("load_calibration", &facemesh::load_calibration, py::arg("document"));
    m.def(
        "canonical_face", [](std::uint64_t seed) { return to_points(facemesh::canonical_face(seed)); },
        py::arg("seed") = 1);
    m.def(
        "generate_recording",
        [](const std::string& kind, std::size_t frames, std::uint64_t seed, double fps, double amplitude_deg,
           double period_s) {
            const auto k = facemesh::parse_motion(kind);
            if (!k) throw Error(ErrorCode::UnreadableRecording, "unknown motion " + kind);
            facemesh::MotionParams params{*k, amplitude_deg, period_s, fps};
            py::list out;
            for (const auto& f : facemesh::generate_recording(params, frames, seed).frames) out.append(frame_dict(f));
            return out;
        },
        py::arg("kind"), py::arg("frames"), py::arg("seed") = 1, py::arg("fps") = 30.0, py::arg("amplitude_deg") = 30.0,
        py::arg("period_s") = 2.0);
}
