// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the failure count.

#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "avatar/cluster/instance.hpp"
#include "avatar/codec.hpp"
#include "avatar/facemesh.hpp"
#include "avatar/geometry.hpp"
#include "avatar/signaling/room.hpp"
#include "avatar/sim.hpp"
#include "avatar/synthetic.hpp"
#include "oracle/half_reference.hpp"
#include "oracle/room_table.hpp"

using namespace avatar;
using geometry::Vec3;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), f, args...);
    return buf;
}

double max_abs(const Vec3& a, const Vec3& b) {
    return std::max({std::abs(a.x - b.x), std::abs(a.y - b.y), std::abs(a.z - b.z)});
}

// ---------------------------------------------------------------------------------------

Outcome frame_size() {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> d(-10, 10);
    std::uniform_int_distribution<std::uint32_t> seq;
    std::size_t bad = 0;
    for (int k = 0; k < 10000; ++k) {
        facemesh::LandmarkFrame f;
        f.timestamp_ms = static_cast<std::int64_t>(seq(rng));
        for (auto& p : f.points) p = {d(rng), d(rng), d(rng)};
        codec::FramePose pose{{d(rng), d(rng), d(rng)}, geometry::euler_to_quaternion({d(rng), d(rng), d(rng)})};
        const auto packet = codec::encode_frame(f, pose, seq(rng));
        bad += packet.size() != 2838;
    }
    return {bad == 0, fmt("10000 frames, %zu not 2838 bytes", bad)};
}

Outcome rate_budget() {
    const auto b = codec::budget(30, codec::kPacketSize);
    const double reference = codec::h264_reference_rate(1080, 1920, 3, 30, 2000);
    sim::BenchConfig cfg;
    cfg.duration_s = 10.0;
    const auto bench = sim::run_bench(cfg);
    const double measured = bench.report.bytes_per_second;
    const double dev = std::abs(measured - 85140.0) / 85140.0;
    const bool pass = b.bytes_per_second == 85140.0 && reference == 93312.0 && dev <= 0.05 && bench.within_tolerance;
    return {pass, fmt("budget %.0f B/s, bench %.1f B/s (%.2f%%, %zu frames), reference %.0f B/s", b.bytes_per_second,
                      measured, 100.0 * dev, bench.report.frames_received, reference)};
}

Outcome half_oracle() {
    auto check = [](std::uint32_t bits) {
        const float x = std::bit_cast<float>(bits);
        return codec::f32_to_f16(x).bits == avatar::oracle::reference_f16(static_cast<double>(x));
    };
    const float fmax = std::numeric_limits<float>::max();
    const float fmin = std::numeric_limits<float>::min();
    const float fden = std::numeric_limits<float>::denorm_min();
    const float inf = std::numeric_limits<float>::infinity();
    std::vector<float> boundaries{0.0f, fmax, fmin, fden, inf, 65504.0f, 65519.0f, 65520.0f, 65535.0f, 65536.0f,
                                  std::ldexp(1.0f, -14), std::ldexp(1.0f, -24), std::ldexp(1.0f, -25),
                                  std::nextafter(std::ldexp(1.0f, -14), 0.0f), 1.0f, std::nextafter(1.0f, 2.0f)};
    std::size_t mismatches = 0, checked = 0;
    for (float b : boundaries) {
        for (float v : {b, -b}) {
            mismatches += !check(std::bit_cast<std::uint32_t>(v));
            ++checked;
        }
    }
    for (std::uint32_t nan : {0x7FC00000u, 0xFFC00000u, 0x7F800001u, 0x7FFFFFFFu}) {
        mismatches += !check(nan);
        ++checked;
    }
    std::mt19937 rng(2);
    for (int i = 0; i < 10'000'000; ++i) {
        mismatches += !check(rng());
        ++checked;
    }
    return {mismatches == 0, fmt("%zu patterns, %zu mismatches", checked, mismatches)};
}

Outcome round_trip() {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> d(-8, 8);
    std::size_t over = 0, away = 0;
    double worst = 0.0;
    for (int k = 0; k < 100000; ++k) {
        facemesh::LandmarkFrame f;
        for (auto& p : f.points) p = {d(rng), d(rng), d(rng)};
        const auto out = codec::decode_frame(codec::encode_frame(f, {}, static_cast<std::uint32_t>(k)));
        for (std::size_t i = 0; i < f.points.size(); ++i) {
            for (auto [a, b] : {std::pair{f[i].x, out.frame[i].x}, {f[i].y, out.frame[i].y}, {f[i].z, out.frame[i].z}}) {
                const double ulps = std::abs(a - b) / codec::truncation_ulp(a);
                worst = std::max(worst, ulps);
                over += ulps > 1.0;
                away += std::abs(b) > std::abs(a);
            }
        }
    }
    return {over == 0 && away == 0,
            fmt("1e5 frames, worst %.4f ulp, %zu over one ulp, %zu away from zero", worst, over, away)};
}

Outcome quaternion_matrix() {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
    std::uniform_real_distribution<double> d(-5, 5);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const geometry::EulerAngles e{ang(rng), ang(rng), ang(rng)};
        const auto m = geometry::euler_to_matrix(e);
        const auto q = geometry::euler_to_quaternion(e);
        for (int j = 0; j < 10; ++j) {
            const Vec3 v{d(rng), d(rng), d(rng)};
            worst = std::max(worst, max_abs(m * v, geometry::rotate_vector(q, v)));
        }
    }
    return {worst <= 1e-9, fmt("1000 triples, max deviation %.3g", worst)};
}

Outcome calibration() {
    const auto face = facemesh::canonical_face(7);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
    std::uniform_real_distribution<double> off(-3, 3);
    double nose = 0.0, normal = 0.0;
    Vec3 last_normal;
    for (int k = 0; k < 1000; ++k) {
        facemesh::RigidPose pose;
        pose.rotation = geometry::euler_to_quaternion({ang(rng), ang(rng) / 2, ang(rng)});
        pose.translation = {off(rng), off(rng), off(rng)};
        const auto raw = facemesh::apply_pose(pose, face);
        const auto fixed = facemesh::apply_calibration(facemesh::calibrate(raw), raw);
        nose = std::max(nose, max_abs(fixed[facemesh::kCenterNose], {}));
        last_normal = geometry::cross(geometry::normalized(facemesh::compute_up(fixed)),
                                      geometry::normalized(facemesh::compute_right(fixed)));
        normal = std::max(normal, max_abs(last_normal, geometry::kUnitZ));
    }
    return {nose <= 1e-9 && normal <= 1e-6,
            fmt("1000 poses, nose offset %.3g, up x right = (%.3g, %.3g, %.3g), deviation from +z %.3g", nose,
                last_normal.x, last_normal.y, last_normal.z, normal)};
}

// Homogeneous 4x4 pipeline built from first principles.
using M4 = std::array<std::array<double, 4>, 4>;

M4 mul(const M4& a, const M4& b) {
    M4 r{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            for (int k = 0; k < 4; ++k) r[i][j] += a[i][k] * b[k][j];
    return r;
}

geometry::Point2 brute_force_project(const geometry::CameraPose& cam, const Vec3& p) {
    const auto& [tx, ty, tz] = cam.orientation;
    const double cx = std::cos(-tx), sx = std::sin(-tx);
    const double cy = std::cos(-ty), sy = std::sin(-ty);
    const double cz = std::cos(-tz), sz = std::sin(-tz);
    const M4 rx{{{1, 0, 0, 0}, {0, cx, -sx, 0}, {0, sx, cx, 0}, {0, 0, 0, 1}}};
    const M4 ry{{{cy, 0, sy, 0}, {0, 1, 0, 0}, {-sy, 0, cy, 0}, {0, 0, 0, 1}}};
    const M4 rz{{{cz, -sz, 0, 0}, {sz, cz, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}}};
    const M4 t{{{1, 0, 0, -cam.position.x}, {0, 1, 0, -cam.position.y}, {0, 0, 1, -cam.position.z}, {0, 0, 0, 1}}};
    const auto& e = cam.surface;
    const M4 persp{{{1, 0, e.x / e.z, 0}, {0, 1, e.y / e.z, 0}, {0, 0, 0, 0}, {0, 0, 1.0 / e.z, 0}}};
    const M4 m = mul(persp, mul(rx, mul(ry, mul(rz, t))));
    const std::array<double, 4> h{p.x, p.y, p.z, 1.0};
    std::array<double, 4> f{};
    for (int i = 0; i < 4; ++i)
        for (int k = 0; k < 4; ++k) f[i] += m[i][k] * h[k];
    return {f[0] / f[3], f[1] / f[3]};
}

Outcome projection() {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
    std::uniform_real_distribution<double> pos(-3, 3);
    std::uniform_real_distribution<double> ez(0.5, 3);
    double worst = 0.0;
    int scenes = 0, skipped = 0;
    while (scenes < 1000) {
        geometry::CameraPose cam;
        cam.position = {pos(rng), pos(rng), pos(rng)};
        cam.orientation = {ang(rng), ang(rng), ang(rng)};
        cam.surface = {pos(rng) / 3, pos(rng) / 3, (rng() & 1 ? 1 : -1) * ez(rng)};
        const Vec3 p{pos(rng), pos(rng), pos(rng)};
        const auto ref = brute_force_project(cam, p);
        if (!std::isfinite(ref.x) || !std::isfinite(ref.y) || std::abs(ref.x) > 1e3 || std::abs(ref.y) > 1e3) {
            ++skipped;
            continue;
        }
        const auto got = geometry::project(cam, p);
        const double scale = std::max({1.0, std::abs(ref.x), std::abs(ref.y)});
        worst = std::max({worst, std::abs(got.x - ref.x) / scale, std::abs(got.y - ref.y) / scale});
        ++scenes;
    }
    return {worst <= 1e-9, fmt("1000 scenes (%d near-degenerate redrawn), max deviation %.3g", skipped, worst)};
}

sim::PairConfig pair_config(const cluster::ClusterHandle& cl, std::size_t frames) {
    sim::PairConfig cfg;
    facemesh::MotionParams nod{facemesh::MotionKind::Nod};
    facemesh::MotionParams shake{facemesh::MotionKind::Shake};
    cfg.dispatcher = cl.dispatcher_address();
    cfg.owner_recording = facemesh::generate_recording(nod, frames, 11);
    cfg.guest_recording = facemesh::generate_recording(shake, frames, 12);
    return cfg;
}

Outcome cluster_transparency() {
    cluster::ClusterOptions one;
    one.seed = 21;
    cluster::ClusterOptions two = one;
    two.instances = 2;
    auto c1 = cluster::spawn_cluster(one);
    const auto local = sim::run_pair(pair_config(*c1, 60));
    auto c2 = cluster::spawn_cluster(two);
    const auto split = sim::run_pair(pair_config(*c2, 60));
    const bool transcripts = local.owner.sent_transcript == split.owner.sent_transcript &&
                             local.owner.received_transcript == split.owner.received_transcript &&
                             local.guest.sent_transcript == split.guest.sent_transcript &&
                             local.guest.received_transcript == split.guest.received_transcript;
    const bool frames = local.owner.frames_received == split.owner.frames_received &&
                        local.guest.frames_received == split.guest.frames_received;
    const bool placed = split.owner.instance != split.guest.instance && split.guest.proxy_used && !local.guest.proxy_used;
    const double est = std::max(split.owner.establishment_ms, split.guest.establishment_ms);
    return {transcripts && frames && placed && est < 2000.0,
            fmt("transcripts %s, frames %zu/%zu vs %zu/%zu, split %s, proxied establishment %.1f ms",
                transcripts ? "identical" : "differ", local.owner.frames_received, local.guest.frames_received,
                split.owner.frames_received, split.guest.frames_received, placed ? "across instances" : "not split", est)};
}

Outcome lifecycle() {
    cluster::ClusterOptions opts;
    opts.instances = 2;
    opts.seed = 31;
    auto cl = cluster::spawn_cluster(opts);
    auto cfg = pair_config(*cl, 300);
    bool killed = false;
    cfg.after_both_hung_up = [&] {
        cl->kill_all();
        killed = true;
    };
    const auto r = sim::run_pair(cfg);
    const bool pass = killed && r.owner.frames_received == 300 && r.guest.frames_received == 300;
    return {pass, fmt("instances killed after hang-up: %s, delivered %zu/300 and %zu/300", killed ? "yes" : "no",
                      r.guest.frames_received, r.owner.frames_received)};
}

Outcome state_machine() {
    using namespace signaling;
    std::size_t checked = 0, wrong = 0, rejected = 0;
    for (auto state : kAllRoomStates)
        for (const auto& presence : ::oracle::reachable_presences(state))
            for (auto role : kAllRoles)
                for (const auto& input : ::oracle::all_inputs()) {
                    const auto got = step(presence, role, input);
                    const auto want = ::oracle::expected(presence, role, input);
                    wrong += !(got.next == want.next && got.reject == want.reject && got.effects == want.effects);
                    rejected += want.reject.has_value();
                    ++checked;
                }
    return {wrong == 0 && checked == 7 * 3 * 11,
            fmt("%zu (state, role, input) cases, %zu rejections, %zu mismatches", checked, rejected, wrong)};
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        double limit_s;
        std::function<Outcome()> run;
    };
    const std::array<Criterion, 10> criteria{{
        {"frame-size", 1, frame_size},
        {"rate-budget", 15, rate_budget},
        {"half-oracle", 30, half_oracle},
        {"round-trip", 10, round_trip},
        {"quaternion-matrix", 1, quaternion_matrix},
        {"calibration", 1, calibration},
        {"projection-oracle", 1, projection},
        {"cluster-transparency", 30, cluster_transparency},
        {"lifecycle", 30, lifecycle},
        {"state-machine", 1, state_machine},
    }};
    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool pass = o.pass && s < c.limit_s;
        failures += !pass;
        std::printf("%s %s: %s [%.2f s, limit %.0f s]\n", pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), s,
                    c.limit_s);
        std::fflush(stdout);
    }
    return failures;
}
