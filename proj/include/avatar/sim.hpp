#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "avatar/cluster/directory.hpp"
#include "avatar/codec.hpp"
#include "avatar/facemesh.hpp"
#include "avatar/geometry.hpp"
#include "avatar/net.hpp"
#include "avatar/peer.hpp"
#include "avatar/signaling/protocol.hpp"
#include "avatar/synthetic.hpp"

namespace avatar::sim {

using Json = nlohmann::json;

/// "Type room=X code=N"; blobs are left out so transcripts compare across placements.
std::string transcript_entry(const signaling::SignalMessage& msg);

/// Blocking WebSocket client for the signaling protocol.
class SignalClient {
public:
    /// Throws Io when the endpoint cannot be reached or refuses the upgrade.
    static SignalClient connect(const net::HostPort& addr, std::chrono::milliseconds timeout = std::chrono::seconds(5));

    ~SignalClient();
    SignalClient(SignalClient&&) noexcept;
    SignalClient& operator=(SignalClient&&) noexcept;

    void send(const signaling::SignalMessage& msg);

    /// Throws Timeout, PeerGone once the server closes, MalformedMessage. A timeout
    /// leaves the client unusable.
    signaling::SignalMessage receive(std::chrono::milliseconds timeout);

    void close();

    /// Instance that accepted the WebSocket, from the upgrade response.
    [[nodiscard]] const std::string& instance_id() const;
    [[nodiscard]] const std::vector<std::string>& sent() const;
    [[nodiscard]] const std::vector<std::string>& received() const;

private:
    SignalClient();
    struct State;
    std::unique_ptr<State> state_;
};

enum class Role { Owner, Guest };

struct ClientConfig {
    Role role = Role::Owner;
    net::HostPort dispatcher;
    std::optional<std::string> room;                 // required for guests
    facemesh::Recording recording;                   // frames this client streams
    std::optional<facemesh::Recording> expected_peer; // enables error statistics
    double fps_offer = 30.0;
    double fps_cap = 30.0;
    std::string peer_bind_host = "127.0.0.1";
    std::chrono::milliseconds signaling_timeout{10000};
    std::chrono::milliseconds establish_timeout = peer::kDefaultEstablishTimeout;
    bool send_track = true;
    std::function<void(const std::string&)> on_room_created;
    /// Runs once signaling has been hung up, before streaming.
    std::function<void()> after_hangup;
};

struct RunReport {
    std::string role;
    std::string room;
    std::string instance;
    std::size_t frames_offered = 0;
    std::size_t frames_sent = 0;
    std::size_t frames_received = 0;
    std::size_t track_messages_received = 0;
    double bytes_per_second = 0.0;
    double mean_error = 0.0;
    double max_error = 0.0;
    double max_error_ulps = 0.0;  // worst error in units of the truncation step
    bool error_within_bound = true;
    double establishment_ms = 0.0;
    bool proxy_used = false;
    std::vector<std::string> sent_transcript;
    std::vector<std::string> received_transcript;

    [[nodiscard]] Json to_json() const;
};

/// Full lifecycle: signaling, peer establishment, hang-up, streaming.
RunReport run_client(const ClientConfig& config);

struct PairConfig {
    net::HostPort dispatcher;
    facemesh::Recording owner_recording;
    facemesh::Recording guest_recording;
    double fps_offer = 30.0;
    double fps_cap = 30.0;
    bool send_track = true;
    std::chrono::milliseconds signaling_timeout{10000};
    /// Runs once both clients have hung up signaling.
    std::function<void()> after_both_hung_up;
};

struct PairReport {
    RunReport owner;
    RunReport guest;
};

/// Owner and guest in separate threads; the guest joins once the room exists.
PairReport run_pair(const PairConfig& config);

struct BenchConfig {
    double duration_s = 10.0;
    double fps = 30.0;
    std::uint64_t seed = 1;
    std::size_t instances = 1;
    cluster::StoreKind store = cluster::StoreKind::Memory;
    std::filesystem::path store_path;
};

struct BenchResult {
    RunReport report;  // receiving side
    codec::RateBudget budget;
    bool within_tolerance = true;
};

inline constexpr double kBenchTolerance = 0.05;

/// Streams a synthetic recording across a loopback cluster.
BenchResult run_bench(const BenchConfig& config);
/// Throws BudgetViolation when the measured rate strays beyond 5%.
void check_budget(const BenchResult& result);

struct RenderOptions {
    geometry::CameraPose camera = default_camera();
    int width = 512;
    int height = 512;
    double pixels_per_unit = 200.0;

    static geometry::CameraPose default_camera();
};

struct Edge2 {
    geometry::Point2 a;
    geometry::Point2 b;
};

/// Projected wireframe in image coordinates.
struct Wireframe {
    std::vector<Edge2> edges;
    std::vector<std::optional<geometry::Point2>> vertices;  // empty for culled vertices
    std::size_t culled_triangles = 0;
};

Wireframe project_wireframe(const facemesh::LandmarkFrame& frame, const facemesh::CalibrationState& calibration,
                            const facemesh::TessellationTable& table, const RenderOptions& options);

std::string to_svg(const Wireframe& wf, const RenderOptions& options);
std::string to_ppm(const Wireframe& wf, const RenderOptions& options);

enum class ImageFormat { Svg, Ppm };

/// One image per frame named frame_NNNNN.svg|ppm; returns the written paths.
std::vector<std::filesystem::path> render_recording(const facemesh::Recording& rec,
                                                    const std::optional<facemesh::CalibrationState>& calibration,
                                                    const facemesh::TessellationTable& table,
                                                    const RenderOptions& options, const std::filesystem::path& out_dir,
                                                    ImageFormat format = ImageFormat::Svg);

/// 0 success, 10-19 signaling, 20-29 peer, 30-39 I/O, 1 anything else.
int exit_code(ErrorCode code) noexcept;

}  // namespace avatar::sim
