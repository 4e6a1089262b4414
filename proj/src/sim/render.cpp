#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "avatar/error.hpp"
#include "avatar/sim.hpp"

namespace avatar::sim {

geometry::CameraPose RenderOptions::default_camera() {
    geometry::CameraPose cam;
    cam.position = {0.0, 0.0, -2.0};
    return cam;
}

Wireframe project_wireframe(const facemesh::LandmarkFrame& frame, const facemesh::CalibrationState& calibration,
                            const facemesh::TessellationTable& table, const RenderOptions& options) {
    const auto mesh = facemesh::build_mesh(facemesh::apply_calibration(calibration, frame), table);
    const double cx = options.width / 2.0;
    const double cy = options.height / 2.0;

    Wireframe wf;
    wf.vertices.resize(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        if (!std::isfinite(mesh.vertices[i].x) || !std::isfinite(mesh.vertices[i].y) || !std::isfinite(mesh.vertices[i].z))
            continue;
        try {
            const auto b = geometry::project(options.camera, mesh.vertices[i]);
            wf.vertices[i] = geometry::Point2{cx + options.pixels_per_unit * b.x, cy - options.pixels_per_unit * b.y};
        } catch (const Error& e) {
            if (e.code() != ErrorCode::DegenerateProjection) throw;
        }
    }

    std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
    for (const auto& tri : mesh.triangles) {
        if (!wf.vertices[tri[0]] || !wf.vertices[tri[1]] || !wf.vertices[tri[2]]) {
            ++wf.culled_triangles;
            continue;
        }
        for (int k = 0; k < 3; ++k) {
            const auto a = tri[k], b = tri[(k + 1) % 3];
            if (!seen.insert(std::minmax(a, b)).second) continue;
            wf.edges.push_back({*wf.vertices[a], *wf.vertices[b]});
        }
    }
    return wf;
}

std::string to_svg(const Wireframe& wf, const RenderOptions& options) {
    std::ostringstream out;
    out.precision(3);
    out << std::fixed;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width << "\" height=\"" << options.height
        << "\" viewBox=\"0 0 " << options.width << ' ' << options.height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<g stroke=\"black\" stroke-width=\"0.5\" fill=\"none\">\n";
    for (const auto& e : wf.edges)
        out << "<line x1=\"" << e.a.x << "\" y1=\"" << e.a.y << "\" x2=\"" << e.b.x << "\" y2=\"" << e.b.y << "\"/>\n";
    out << "</g>\n</svg>\n";
    return out.str();
}

std::string to_ppm(const Wireframe& wf, const RenderOptions& options) {
    const int w = options.width, h = options.height;
    std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h, 255);
    auto plot = [&](long x, long y) {
        if (x >= 0 && y >= 0 && x < w && y < h) px[static_cast<std::size_t>(y) * w + x] = 0;
    };
    for (const auto& e : wf.edges) {
        long x0 = std::lround(e.a.x), y0 = std::lround(e.a.y);
        const long x1 = std::lround(e.b.x), y1 = std::lround(e.b.y);
        // Skip lines that would take forever to walk off-canvas.
        if (std::abs(x1 - x0) > 8L * w || std::abs(y1 - y0) > 8L * h) continue;
        const long dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
        const long sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
        long err = dx + dy;
        for (;;) {
            plot(x0, y0);
            if (x0 == x1 && y0 == y1) break;
            const long e2 = 2 * err;
            if (e2 >= dy) err += dy, x0 += sx;
            if (e2 <= dx) err += dx, y0 += sy;
        }
    }
    std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    out.reserve(out.size() + px.size() * 3);
    for (auto v : px) out.append(3, static_cast<char>(v));
    return out;
}

std::vector<std::filesystem::path> render_recording(const facemesh::Recording& rec,
                                                    const std::optional<facemesh::CalibrationState>& calibration,
                                                    const facemesh::TessellationTable& table,
                                                    const RenderOptions& options, const std::filesystem::path& out_dir,
                                                    ImageFormat format) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + out_dir.string() + ": " + ec.message());
    std::vector<std::filesystem::path> written;
    std::optional<facemesh::CalibrationState> cal = calibration;
    for (std::size_t i = 0; i < rec.frames.size(); ++i) {
        if (!cal) cal = facemesh::calibrate(rec.frames[i]);
        const auto wf = project_wireframe(rec.frames[i], *cal, table, options);
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%05zu.%s", i, format == ImageFormat::Svg ? "svg" : "ppm");
        const auto path = out_dir / name;
        std::ofstream out(path, std::ios::binary);
        out << (format == ImageFormat::Svg ? to_svg(wf, options) : to_ppm(wf, options));
        if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
        written.push_back(path);
    }
    return written;
}

}  // namespace avatar::sim
