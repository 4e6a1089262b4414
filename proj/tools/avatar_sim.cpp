#include <CLI11.hpp>
#include <csignal>
#include <fstream>
#include <iostream>

#include "avatar/cluster/instance.hpp"
#include "avatar/error.hpp"
#include "avatar/sim.hpp"

using namespace avatar;

namespace {

struct Globals {
    std::uint64_t seed = 1;
    std::string store = "memory";
    std::string store_path;
    std::string dispatcher = "127.0.0.1:8080";
};

void block_signals(sigset_t& set) {
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

void wait_for_signal(const sigset_t& set) {
    int sig = 0;
    sigwait(&set, &sig);
}

facemesh::Recording load_or_generate(const std::string& path, const std::string& motion, std::size_t frames,
                                     double fps, std::uint64_t seed) {
    if (!path.empty()) return facemesh::read_recording(path);
    facemesh::MotionParams params;
    const auto kind = facemesh::parse_motion(motion);
    if (!kind) throw Error(ErrorCode::UnreadableRecording, "unknown motion " + motion);
    params.kind = *kind;
    params.fps = fps;
    return facemesh::generate_recording(params, frames, seed);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Avatar session simulator: signaling servers, clients, recordings and renders."};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Seed for room ids and synthetic recordings");
    app.add_option("--store", g.store, "Directory store: memory or file")->check(CLI::IsMember({"memory", "file"}));
    app.add_option("--store-path", g.store_path, "Directory for the file store");
    app.add_option("--dispatcher", g.dispatcher, "host:port clients connect to");

    // serve
    auto* serve = app.add_subcommand("serve", "Run one signaling instance");
    std::string host = "127.0.0.1", id = "instance-0";
    std::uint16_t port = 8080;
    serve->add_option("--host", host);
    serve->add_option("--port", port);
    serve->add_option("--id", id, "Instance id reported in X-Instance-Id");

    // cluster
    auto* cluster_cmd = app.add_subcommand("cluster", "Run n instances behind a round-robin dispatcher");
    std::size_t instances = 2;
    std::uint16_t base_port = 0, dispatcher_port = 8080;
    cluster_cmd->add_option("-n,--instances", instances)->check(CLI::PositiveNumber);
    cluster_cmd->add_option("--host", host);
    cluster_cmd->add_option("--base-port", base_port, "Instance i listens on base+i (0 picks free ports)");
    cluster_cmd->add_option("--dispatcher-port", dispatcher_port);

    // client
    auto* client = app.add_subcommand("client", "Run one owner or guest through a full session");
    std::string role = "owner", room, recording_path, motion = "nod", peer_motion, peer_recording;
    std::size_t frames = 300;
    double fps = 30.0, fps_cap = 30.0, timeout_s = 120.0;
    client->add_option("--role", role)->check(CLI::IsMember({"owner", "guest"}));
    client->add_option("--room", room, "Room id to join (guest)");
    client->add_option("--recording", recording_path, "Landmark recording to stream");
    client->add_option("--motion", motion, "Synthetic motion when no recording is given");
    client->add_option("--frames", frames);
    client->add_option("--fps", fps, "Offer rate");
    client->add_option("--fps-cap", fps_cap, "Pacing cap");
    client->add_option("--peer-recording", peer_recording, "Recording the peer streams, for error statistics");
    client->add_option("--peer-motion", peer_motion, "Synthetic motion the peer streams, for error statistics");
    client->add_option("--timeout", timeout_s, "Seconds to wait for each signaling step");

    // gen-recording
    auto* gen = app.add_subcommand("gen-recording", "Write a synthetic landmark recording");
    std::string out_path;
    double amplitude = 30.0, period = 2.0;
    gen->add_option("--kind", motion)->check(CLI::IsMember({"still", "nod", "shake", "orbit"}));
    gen->add_option("--frames", frames)->check(CLI::PositiveNumber);
    gen->add_option("--fps", fps);
    gen->add_option("--amplitude", amplitude, "Degrees");
    gen->add_option("--period", period, "Seconds");
    gen->add_option("-o,--out", out_path)->required();

    // render
    auto* render = app.add_subcommand("render", "Render a recording to wireframe images");
    std::string calibration_path, format = "svg";
    sim::RenderOptions ropts;
    double cam_x = 0.0, cam_y = 0.0, cam_z = -2.0, ex = 0.0, ey = 0.0, ez = 1.0;
    render->add_option("--recording", recording_path)->required();
    render->add_option("--calibration", calibration_path, "Calibration profile (default: calibrate on frame 0)");
    render->add_option("-o,--out", out_path)->required();
    render->add_option("--format", format)->check(CLI::IsMember({"svg", "ppm"}));
    render->add_option("--width", ropts.width);
    render->add_option("--height", ropts.height);
    render->add_option("--pixels-per-unit", ropts.pixels_per_unit);
    render->add_option("--camera-x", cam_x);
    render->add_option("--camera-y", cam_y);
    render->add_option("--camera-z", cam_z);
    render->add_option("--ex", ex);
    render->add_option("--ey", ey);
    render->add_option("--ez", ez);

    // bench
    auto* bench = app.add_subcommand("bench", "Measure the streamed byte rate on a loopback cluster");
    double duration = 10.0;
    bench->add_option("--duration", duration, "Seconds");
    bench->add_option("--fps", fps);
    bench->add_option("-n,--instances", instances);

    CLI11_PARSE(app, argc, argv);

    try {
        const auto store_kind = cluster::parse_store_kind(g.store);

        if (*serve) {
            sigset_t set;
            block_signals(set);
            cluster::InstanceConfig cfg;
            cfg.instance_id = id;
            cfg.bind_host = host;
            cfg.port = port;
            cfg.seed = g.seed;
            cluster::Instance inst(cfg, cluster::make_store(store_kind, g.store_path));
            inst.start();
            std::cout << sim::Json{{"instance", id}, {"address", inst.address().to_string()}}.dump() << std::endl;
            wait_for_signal(set);
            inst.stop();
            return 0;
        }

        if (*cluster_cmd) {
            sigset_t set;
            block_signals(set);
            cluster::ClusterOptions opts;
            opts.instances = instances;
            opts.store = store_kind;
            opts.store_path = g.store_path;
            opts.seed = g.seed;
            opts.host = host;
            opts.base_port = base_port;
            opts.dispatcher_port = dispatcher_port;
            auto cl = cluster::spawn_cluster(opts);
            sim::Json doc{{"dispatcher", cl->dispatcher_address().to_string()}, {"instances", sim::Json::array()}};
            for (std::size_t i = 0; i < cl->size(); ++i)
                doc["instances"].push_back({{"id", cl->instance(i).id()}, {"address", cl->instance(i).address().to_string()}});
            std::cout << doc.dump() << std::endl;
            wait_for_signal(set);
            return 0;
        }

        if (*client) {
            sim::ClientConfig cfg;
            cfg.role = role == "owner" ? sim::Role::Owner : sim::Role::Guest;
            cfg.dispatcher = net::parse_host_port(g.dispatcher);
            if (!room.empty()) cfg.room = room;
            const std::uint64_t own_seed = g.seed + (cfg.role == sim::Role::Owner ? 0 : 1);
            const std::uint64_t peer_seed = g.seed + (cfg.role == sim::Role::Owner ? 1 : 0);
            cfg.recording = load_or_generate(recording_path, motion, frames, fps, own_seed);
            if (!peer_recording.empty() || !peer_motion.empty())
                cfg.expected_peer = load_or_generate(peer_recording, peer_motion, frames, fps, peer_seed);
            cfg.fps_offer = fps;
            cfg.fps_cap = fps_cap;
            cfg.signaling_timeout = std::chrono::milliseconds(static_cast<long>(timeout_s * 1000));
            cfg.on_room_created = [](const std::string& id) { std::cerr << "room " << id << std::endl; };
            std::cout << sim::run_client(cfg).to_json().dump(2) << std::endl;
            return 0;
        }

        if (*gen) {
            facemesh::MotionParams params;
            params.kind = *facemesh::parse_motion(motion);
            params.amplitude_deg = amplitude;
            params.period_s = period;
            params.fps = fps;
            facemesh::write_recording(out_path, facemesh::generate_recording(params, frames, g.seed));
            return 0;
        }

        if (*render) {
            const auto rec = facemesh::read_recording(recording_path);
            std::optional<facemesh::CalibrationState> cal;
            if (!calibration_path.empty()) {
                std::ifstream in(calibration_path);
                if (!in) throw Error(ErrorCode::Io, "cannot read " + calibration_path);
                cal = facemesh::load_calibration(std::string(std::istreambuf_iterator<char>(in), {}));
            }
            ropts.camera.position = {cam_x, cam_y, cam_z};
            ropts.camera.surface = {ex, ey, ez};
            const auto table = facemesh::TessellationTable::load(std::filesystem::path(AVATAR_ASSET_DIR) /
                                                                 "face_tessellation.txt");
            const auto paths = sim::render_recording(rec, cal, table, ropts, out_path,
                                                     format == "svg" ? sim::ImageFormat::Svg : sim::ImageFormat::Ppm);
            std::cout << sim::Json{{"images", paths.size()}, {"out", out_path}}.dump() << std::endl;
            return 0;
        }

        if (*bench) {
            sim::BenchConfig cfg;
            cfg.duration_s = duration;
            cfg.fps = fps;
            cfg.seed = g.seed;
            cfg.instances = bench->count("--instances") ? instances : 1;
            cfg.store = store_kind;
            cfg.store_path = g.store_path;
            const auto result = sim::run_bench(cfg);
            auto doc = result.report.to_json();
            doc["budget_bytes_per_second"] = result.budget.bytes_per_second;
            doc["within_tolerance"] = result.within_tolerance;
            std::cout << doc.dump(2) << std::endl;
            sim::check_budget(result);
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return sim::exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
