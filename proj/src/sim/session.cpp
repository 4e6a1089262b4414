#include <atomic>
#include <cmath>
#include <future>
#include <numbers>
#include <thread>

#include "avatar/cluster/instance.hpp"
#include "avatar/error.hpp"
#include "avatar/sim.hpp"

namespace avatar::sim {

using Clock = std::chrono::steady_clock;
using signaling::MessageType;
using signaling::SignalMessage;

Json RunReport::to_json() const {
    return {
        {"role", role},
        {"room", room},
        {"instance", instance},
        {"frames_offered", frames_offered},
        {"frames_sent", frames_sent},
        {"frames_received", frames_received},
        {"track_messages_received", track_messages_received},
        {"bytes_per_second", bytes_per_second},
        {"mean_error", mean_error},
        {"max_error", max_error},
        {"max_error_ulps", max_error_ulps},
        {"error_within_bound", error_within_bound},
        {"establishment_ms", establishment_ms},
        {"proxy_used", proxy_used},
        {"sent_transcript", sent_transcript},
        {"received_transcript", received_transcript},
    };
}

int exit_code(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::RoomNotFound:
        case ErrorCode::RoomClosed: return 11;
        case ErrorCode::RoomFull: return 12;
        case ErrorCode::IllegalState: return 13;
        case ErrorCode::NoPeer: return 14;
        case ErrorCode::PeerGone:
        case ErrorCode::RemoteUnreachable:
        case ErrorCode::RemoteRoomGone: return 15;
        case ErrorCode::MalformedMessage: return 16;
        case ErrorCode::IdExhaustion: return 17;
        case ErrorCode::NoUsableEndpoint: return 20;
        case ErrorCode::AllCandidatesFailed: return 21;
        case ErrorCode::VersionMismatch: return 22;
        case ErrorCode::TokenMismatch: return 23;
        case ErrorCode::Timeout: return 24;
        case ErrorCode::ChannelClosed: return 25;
        case ErrorCode::OversizedMessage:
        case ErrorCode::WrongPacketSize: return 26;
        case ErrorCode::Io: return 30;
        case ErrorCode::UnreadableRecording:
        case ErrorCode::MalformedProfile:
        case ErrorCode::NonUnitQuaternion: return 31;
        case ErrorCode::StoreUnavailable: return 32;
        case ErrorCode::PortUnavailable: return 33;
        default: return 1;
    }
}

namespace {

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

SignalMessage expect(SignalClient& sig, MessageType type, std::chrono::milliseconds timeout) {
    SignalMessage m = sig.receive(timeout);
    if (m.type == MessageType::Error) {
        const auto code = m.code().value_or(signaling::WireCode::IllegalState);
        throw Error(signaling::error_code(code), m.body.value("text", std::string("signaling error")));
    }
    if (m.type != type)
        throw Error(ErrorCode::IllegalState, "expected " + std::string(signaling::to_string(type)) + ", got " +
                                                 std::string(signaling::to_string(m.type)));
    return m;
}

codec::FramePose pose_of(const facemesh::Recording& rec) {
    if (rec.frames.empty()) return {};
    try {
        const auto cal = facemesh::calibrate(rec.frames.front());
        return {cal.translation, cal.rotation};
    } catch (const Error&) {
        return {};
    }
}

/// 16-bit PCM sine at 8 kHz, one chunk per frame tick.
class ToneSource {
public:
    explicit ToneSource(double fps) : samples_(static_cast<std::size_t>(std::lround(8000.0 / fps))) {}

    std::string next() {
        std::string out(samples_ * 2, '\0');
        for (std::size_t i = 0; i < samples_; ++i, ++n_) {
            const auto v = static_cast<std::int16_t>(8000.0 * std::sin(2.0 * std::numbers::pi * 440.0 * n_ / 8000.0));
            out[2 * i] = static_cast<char>(v & 0xFF);
            out[2 * i + 1] = static_cast<char>((v >> 8) & 0xFF);
        }
        return out;
    }

private:
    std::size_t samples_;
    std::uint64_t n_ = 0;
};

struct ReceiveStats {
    std::size_t frames = 0;
    std::size_t track = 0;
    Clock::time_point first, last;
    double error_sum = 0.0;
    std::size_t error_count = 0;
    double max_error = 0.0;
    double max_ulps = 0.0;
    bool within = true;
};

void account(ReceiveStats& st, const codec::DecodedFrame& got, const facemesh::LandmarkFrame& want) {
    for (std::size_t i = 0; i < facemesh::kLandmarkCount; ++i) {
        const double w[3] = {want[i].x, want[i].y, want[i].z};
        const double g[3] = {got.frame[i].x, got.frame[i].y, got.frame[i].z};
        for (int a = 0; a < 3; ++a) {
            if (std::isnan(w[a])) continue;
            const double err = std::abs(g[a] - w[a]);
            const double ulp = codec::truncation_ulp(w[a]);
            st.error_sum += err;
            ++st.error_count;
            st.max_error = std::max(st.max_error, err);
            st.max_ulps = std::max(st.max_ulps, ulp > 0.0 ? err / ulp : (err > 0.0 ? INFINITY : 0.0));
            if (!(err <= ulp)) st.within = false;
        }
    }
}

void stream(peer::PeerChannel& channel, const ClientConfig& cfg, RunReport& report) {
    ReceiveStats stats;
    std::thread receiver([&] {
        try {
            while (auto msg = channel.receive()) {
                if (msg->channel == peer::ChannelId::Track) {
                    ++stats.track;
                    continue;
                }
                const auto now = Clock::now();
                const auto* bytes = reinterpret_cast<const std::uint8_t*>(msg->payload.data());
                const auto frame = codec::decode_frame(std::span(bytes, msg->payload.size()));
                if (stats.frames == 0) stats.first = now;
                stats.last = now;
                ++stats.frames;
                if (cfg.expected_peer && frame.sequence < cfg.expected_peer->frames.size())
                    account(stats, frame, cfg.expected_peer->frames[frame.sequence]);
            }
        } catch (const Error&) {
        }
    });

    const auto& frames = cfg.recording.frames;
    const codec::FramePose pose = pose_of(cfg.recording);
    codec::Pacer<std::size_t> pacer(cfg.fps_cap);
    ToneSource tone(cfg.fps_offer);
    const auto start = Clock::now();
    auto send_frame = [&](std::size_t k) {
        const auto packet = codec::encode_frame(frames[k], pose, static_cast<std::uint32_t>(k));
        channel.send(peer::ChannelId::Data, std::span<const std::uint8_t>(packet));
        ++report.frames_sent;
    };
    try {
        for (std::size_t k = 0; k < frames.size(); ++k) {
            const auto t = std::chrono::nanoseconds(std::llround(static_cast<double>(k) * 1e9 / cfg.fps_offer));
            std::this_thread::sleep_until(start + t);
            ++report.frames_offered;
            if (auto due = pacer.offer(t, k)) send_frame(*due);
            if (cfg.send_track) channel.send(peer::ChannelId::Track, tone.next());
        }
        if (pacer.has_pending()) {
            const auto t = pacer.next_due();
            std::this_thread::sleep_until(start + t);
            if (auto due = pacer.poll(t)) send_frame(*due);
        }
        channel.finish();
    } catch (const Error&) {
        channel.close();
        receiver.join();
        throw;
    }
    receiver.join();
    channel.close();

    report.frames_received = stats.frames;
    report.track_messages_received = stats.track;
    if (stats.frames >= 2) {
        const double secs = std::chrono::duration<double>(stats.last - stats.first).count();
        if (secs > 0.0) report.bytes_per_second = static_cast<double>(stats.frames - 1) * codec::kPacketSize / secs;
    }
    if (stats.error_count) report.mean_error = stats.error_sum / static_cast<double>(stats.error_count);
    report.max_error = stats.max_error;
    report.max_error_ulps = stats.max_ulps;
    report.error_within_bound = stats.within;
}

void hang_up(SignalClient& sig, const std::string& room, RunReport& report) {
    sig.send(SignalMessage::make(MessageType::HangUp, room, {{"established", true}}));
    sig.close();
    report.sent_transcript = sig.sent();
    report.received_transcript = sig.received();
}

RunReport run_owner(const ClientConfig& cfg) {
    RunReport report;
    report.role = "owner";
    auto sig = SignalClient::connect(cfg.dispatcher, cfg.signaling_timeout);
    report.instance = sig.instance_id();

    sig.send(SignalMessage::make(MessageType::CreateRoom));
    const std::string room = *expect(sig, MessageType::RoomCreated, cfg.signaling_timeout).room;
    report.room = room;
    if (cfg.on_room_created) cfg.on_room_created(room);

    expect(sig, MessageType::PeerJoined, cfg.signaling_timeout);
    const auto t0 = Clock::now();
    peer::Offerer offerer{peer::PeerListener(cfg.peer_bind_host)};
    const peer::PeerOffer& full = offerer.offer();
    peer::PeerOffer first = full;
    first.endpoints.resize(1);
    sig.send(SignalMessage::blob(MessageType::Offer, first.to_blob(), room));
    for (std::size_t i = 1; i < full.endpoints.size(); ++i)
        sig.send(SignalMessage::blob(MessageType::IceCandidate, peer::candidates_to_blob({full.endpoints[i]}), room));
    sig.send(SignalMessage::blob(MessageType::IceCandidate, peer::candidates_to_blob({}), room));

    const auto answer_msg = expect(sig, MessageType::Answer, cfg.signaling_timeout);
    const auto answer = peer::PeerAnswer::from_blob(answer_msg.blob_bytes());
    peer::PeerChannel channel = offerer.establish(answer, cfg.establish_timeout);
    report.establishment_ms = ms_since(t0);
    report.proxy_used = answer.signaling_instance != sig.instance_id();

    hang_up(sig, room, report);
    if (cfg.after_hangup) cfg.after_hangup();
    stream(channel, cfg, report);
    return report;
}

RunReport run_guest(const ClientConfig& cfg) {
    if (!cfg.room) throw Error(ErrorCode::RoomNotFound, "guest needs a room id");
    RunReport report;
    report.role = "guest";
    report.room = *cfg.room;
    auto sig = SignalClient::connect(cfg.dispatcher, cfg.signaling_timeout);
    report.instance = sig.instance_id();

    sig.send(SignalMessage::make(MessageType::JoinRoom, *cfg.room));
    const auto joined = expect(sig, MessageType::PeerJoined, cfg.signaling_timeout);
    const auto t0 = Clock::now();
    report.proxy_used = joined.body.is_object() && joined.body.value("instance", sig.instance_id()) != sig.instance_id();

    auto offer = peer::PeerOffer::from_blob(expect(sig, MessageType::Offer, cfg.signaling_timeout).blob_bytes());
    for (;;) {
        const auto more = peer::candidates_from_blob(
            expect(sig, MessageType::IceCandidate, cfg.signaling_timeout).blob_bytes());
        if (more.empty()) break;
        offer.endpoints.insert(offer.endpoints.end(), more.begin(), more.end());
    }

    peer::AcceptResult accepted = peer::accept_offer(offer);
    report.establishment_ms = ms_since(t0);
    peer::PeerAnswer answer = accepted.answer;
    answer.signaling_instance = sig.instance_id();
    sig.send(SignalMessage::blob(MessageType::Answer, answer.to_blob(), *cfg.room));

    hang_up(sig, *cfg.room, report);
    if (cfg.after_hangup) cfg.after_hangup();
    stream(accepted.channel, cfg, report);
    return report;
}

}  // namespace

RunReport run_client(const ClientConfig& config) {
    return config.role == Role::Owner ? run_owner(config) : run_guest(config);
}

PairReport run_pair(const PairConfig& config) {
    std::promise<std::string> room_promise;
    auto room_future = room_promise.get_future();
    std::atomic<int> hung_up{0};
    auto on_hangup = [&] {
        if (++hung_up == 2 && config.after_both_hung_up) config.after_both_hung_up();
    };

    ClientConfig owner;
    owner.role = Role::Owner;
    owner.dispatcher = config.dispatcher;
    owner.recording = config.owner_recording;
    owner.expected_peer = config.guest_recording;
    owner.fps_offer = config.fps_offer;
    owner.fps_cap = config.fps_cap;
    owner.send_track = config.send_track;
    owner.signaling_timeout = config.signaling_timeout;
    owner.after_hangup = on_hangup;

    ClientConfig guest = owner;
    guest.role = Role::Guest;
    guest.recording = config.guest_recording;
    guest.expected_peer = config.owner_recording;

    std::atomic<bool> room_published{false};
    owner.on_room_created = [&](const std::string& id) {
        room_published = true;
        room_promise.set_value(id);
    };

    PairReport out;
    std::exception_ptr owner_error, guest_error;
    std::thread owner_thread([&] {
        try {
            out.owner = run_client(owner);
        } catch (...) {
            owner_error = std::current_exception();
            if (!room_published) room_promise.set_exception(owner_error);
        }
    });
    try {
        guest.room = room_future.get();
        out.guest = run_client(guest);
    } catch (...) {
        guest_error = std::current_exception();
    }
    owner_thread.join();
    if (owner_error && !room_published) std::rethrow_exception(owner_error);
    if (guest_error) std::rethrow_exception(guest_error);
    if (owner_error) std::rethrow_exception(owner_error);
    return out;
}

BenchResult run_bench(const BenchConfig& config) {
    BenchResult result;
    result.budget = codec::budget(config.fps, codec::kPacketSize);
    const auto frames = static_cast<std::size_t>(std::llround(config.duration_s * config.fps));
    result.report.role = "guest";
    if (frames == 0) return result;

    cluster::ClusterOptions opts;
    opts.instances = config.instances;
    opts.store = config.store;
    opts.store_path = config.store_path;
    opts.seed = config.seed;
    auto cl = cluster::spawn_cluster(opts);

    facemesh::MotionParams motion;
    motion.kind = facemesh::MotionKind::Nod;
    motion.fps = config.fps;
    PairConfig pair;
    pair.dispatcher = cl->dispatcher_address();
    pair.owner_recording = facemesh::generate_recording(motion, frames, config.seed);
    motion.kind = facemesh::MotionKind::Shake;
    pair.guest_recording = facemesh::generate_recording(motion, frames, config.seed + 1);
    pair.fps_offer = config.fps;
    pair.fps_cap = config.fps;
    result.report = run_pair(pair).guest;

    const double target = result.budget.bytes_per_second;
    result.within_tolerance = target > 0.0 && std::abs(result.report.bytes_per_second - target) <= kBenchTolerance * target;
    return result;
}

void check_budget(const BenchResult& result) {
    if (result.report.frames_received == 0 || result.within_tolerance) return;
    throw Error(ErrorCode::BudgetViolation, "measured " + std::to_string(result.report.bytes_per_second) +
                                                " B/s against a budget of " +
                                                std::to_string(result.budget.bytes_per_second) + " B/s");
}

}  // namespace avatar::sim
