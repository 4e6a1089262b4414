#include "avatar/peer.hpp"

#include <arpa/inet.h>
#include <ifaddrs.h>
#include <net/if.h>
#include <sys/socket.h>

#include <boost/asio/read.hpp>
#include <boost/asio/write.hpp>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <nlohmann/json.hpp>
#include <random>
#include <thread>

#include "avatar/codec.hpp"
#include "avatar/error.hpp"

namespace avatar::peer {

namespace asio = net::asio;
using net::tcp;
using nlohmann::json;

Token random_token() {
    static thread_local std::random_device rd;
    Token t{};
    for (auto& b : t) b = static_cast<std::uint8_t>(rd());
    return t;
}

std::string to_hex(const Token& t) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    for (auto b : t) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xF]);
    }
    return out;
}

Token token_from_hex(std::string_view hex) {
    if (hex.size() != 32) throw Error(ErrorCode::MalformedMessage, "token must be 32 hex digits");
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw Error(ErrorCode::MalformedMessage, "bad hex digit in token");
    };
    Token t{};
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
    return t;
}

namespace {

json endpoints_json(const std::vector<net::HostPort>& eps) {
    json arr = json::array();
    for (const auto& e : eps) arr.push_back(e.to_string());
    return arr;
}

std::vector<net::HostPort> endpoints_from(const json& arr) {
    if (!arr.is_array()) throw Error(ErrorCode::MalformedMessage, "endpoints must be a list");
    std::vector<net::HostPort> out;
    for (const auto& e : arr) {
        if (!e.is_string()) throw Error(ErrorCode::MalformedMessage, "endpoint must be a string");
        out.push_back(net::parse_host_port(e.get<std::string>()));
    }
    return out;
}

json parse_blob(std::string_view blob) {
    json doc = json::parse(blob, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw Error(ErrorCode::MalformedMessage, "peer blob is not an object");
    return doc;
}

template <typename T>
T field(const json& doc, const char* key) {
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::MalformedMessage, std::string("peer blob lacks ") + key);
    }
}

using Handshake = std::array<std::uint8_t, 17>;

Handshake handshake_bytes(const Token& t, std::uint8_t version) {
    Handshake h{};
    std::copy(t.begin(), t.end(), h.begin());
    h[16] = version;
    return h;
}

}  // namespace

std::string PeerOffer::to_blob() const {
    return json{{"token", to_hex(token)}, {"endpoints", endpoints_json(endpoints)}, {"version", version}}.dump();
}

PeerOffer PeerOffer::from_blob(std::string_view blob) {
    const json doc = parse_blob(blob);
    PeerOffer o;
    o.token = token_from_hex(field<std::string>(doc, "token"));
    o.endpoints = endpoints_from(doc.value("endpoints", json::array()));
    o.version = field<int>(doc, "version");
    return o;
}

std::string PeerAnswer::to_blob() const {
    return json{{"token", to_hex(token)}, {"version", version}, {"signaling_instance", signaling_instance}}.dump();
}

PeerAnswer PeerAnswer::from_blob(std::string_view blob) {
    const json doc = parse_blob(blob);
    PeerAnswer a;
    a.token = token_from_hex(field<std::string>(doc, "token"));
    a.version = field<int>(doc, "version");
    a.signaling_instance = doc.value("signaling_instance", "");
    return a;
}

std::string candidates_to_blob(const std::vector<net::HostPort>& endpoints) {
    return json{{"endpoints", endpoints_json(endpoints)}}.dump();
}

std::vector<net::HostPort> candidates_from_blob(std::string_view blob) {
    return endpoints_from(parse_blob(blob).value("endpoints", json::array()));
}

// ---------------------------------------------------------------------------------------

struct PeerChannel::State {
    std::shared_ptr<asio::io_context> io;
    tcp::socket sock;
    std::mutex write_mu;
    std::atomic<bool> closed{false};
    std::chrono::steady_clock::time_point at = std::chrono::steady_clock::now();
    net::HostPort remote;

    State(std::shared_ptr<asio::io_context> i, tcp::socket s) : io(std::move(i)), sock(std::move(s)) {
        boost::system::error_code ec;
        const auto ep = sock.remote_endpoint(ec);
        if (!ec) remote = {ep.address().to_string(), ep.port()};
    }
};

PeerChannel::PeerChannel(std::shared_ptr<asio::io_context> io, tcp::socket sock)
    : state_(std::make_unique<State>(std::move(io), std::move(sock))) {}

PeerChannel::~PeerChannel() {
    if (state_) close();
}

PeerChannel::PeerChannel(PeerChannel&&) noexcept = default;
PeerChannel& PeerChannel::operator=(PeerChannel&&) noexcept = default;

void PeerChannel::send(ChannelId channel, std::span<const std::uint8_t> payload) {
    if (!state_ || state_->closed) throw Error(ErrorCode::ChannelClosed, "send on closed channel");
    if (channel == ChannelId::Data && payload.size() != codec::kPacketSize)
        throw Error(ErrorCode::WrongPacketSize,
                    "data channel carries 2838-byte packets, got " + std::to_string(payload.size()));
    if (payload.size() > kMaxMessageBytes)
        throw Error(ErrorCode::OversizedMessage, std::to_string(payload.size()) + " bytes exceeds 65536");

    const auto n = static_cast<std::uint32_t>(payload.size() + 1);
    const std::array<std::uint8_t, 5> header{static_cast<std::uint8_t>(n), static_cast<std::uint8_t>(n >> 8),
                                             static_cast<std::uint8_t>(n >> 16), static_cast<std::uint8_t>(n >> 24),
                                             static_cast<std::uint8_t>(channel)};
    const std::array<asio::const_buffer, 2> bufs{asio::buffer(header), asio::buffer(payload.data(), payload.size())};
    std::lock_guard lock(state_->write_mu);
    boost::system::error_code ec;
    asio::write(state_->sock, bufs, ec);
    if (ec) {
        state_->closed = true;
        throw Error(ErrorCode::ChannelClosed, "peer connection lost: " + ec.message());
    }
}

void PeerChannel::send(ChannelId channel, std::string_view payload) {
    send(channel, std::span(reinterpret_cast<const std::uint8_t*>(payload.data()), payload.size()));
}

std::optional<PeerMessage> PeerChannel::receive() {
    if (!state_ || state_->closed) throw Error(ErrorCode::ChannelClosed, "receive on closed channel");
    std::array<std::uint8_t, 4> prefix{};
    boost::system::error_code ec;
    const std::size_t got = asio::read(state_->sock, asio::buffer(prefix), ec);
    if (ec == asio::error::eof && got == 0) return std::nullopt;
    if (ec) throw Error(ErrorCode::ChannelClosed, "peer connection lost: " + ec.message());
    const std::uint32_t n = prefix[0] | (prefix[1] << 8) | (prefix[2] << 16) | (static_cast<std::uint32_t>(prefix[3]) << 24);
    if (n == 0 || n > kMaxMessageBytes + 1) {
        close();
        throw Error(ErrorCode::OversizedMessage, "incoming message of " + std::to_string(n) + " bytes");
    }
    std::string body(n, '\0');
    asio::read(state_->sock, asio::buffer(body), ec);
    if (ec) throw Error(ErrorCode::ChannelClosed, "truncated peer message: " + ec.message());
    const auto id = static_cast<std::uint8_t>(body[0]);
    if (id > 1) throw Error(ErrorCode::MalformedMessage, "unknown channel " + std::to_string(id));
    return PeerMessage{static_cast<ChannelId>(id), body.substr(1)};
}

void PeerChannel::finish() {
    if (!state_) return;
    std::lock_guard lock(state_->write_mu);
    net::shutdown_send(state_->sock);
}

void PeerChannel::close() {
    if (!state_ || state_->closed.exchange(true)) return;
    net::shutdown_both(state_->sock);
    boost::system::error_code ec;
    state_->sock.close(ec);
}

bool PeerChannel::is_open() const { return state_ && !state_->closed; }
std::chrono::steady_clock::time_point PeerChannel::established_at() const { return state_->at; }
net::HostPort PeerChannel::remote() const { return state_->remote; }

// ---------------------------------------------------------------------------------------

struct PeerListener::State {
    std::shared_ptr<asio::io_context> io = std::make_shared<asio::io_context>();
    tcp::acceptor acceptor{*io};
    std::string bind_host;
};

PeerListener::PeerListener(const std::string& bind_host, std::uint16_t port) : state_(std::make_unique<State>()) {
    state_->bind_host = bind_host;
    boost::system::error_code ec;
    const auto ip = asio::ip::make_address(bind_host, ec);
    if (ec) throw Error(ErrorCode::NoUsableEndpoint, "bad bind host " + bind_host);
    const tcp::endpoint ep(ip, port);
    state_->acceptor.open(ep.protocol(), ec);
    if (!ec) state_->acceptor.bind(ep, ec);
    if (!ec) state_->acceptor.listen(asio::socket_base::max_listen_connections, ec);
    if (ec) throw Error(ErrorCode::NoUsableEndpoint, "cannot listen on " + bind_host + ": " + ec.message());
}

PeerListener::~PeerListener() = default;
PeerListener::PeerListener(PeerListener&&) noexcept = default;

std::uint16_t PeerListener::port() const { return state_->acceptor.local_endpoint().port(); }

std::vector<net::HostPort> PeerListener::endpoints() const {
    const std::uint16_t p = port();
    const auto ip = state_->acceptor.local_endpoint().address();
    if (!ip.is_unspecified()) return {{ip.to_string(), p}};

    std::vector<net::HostPort> out;
    ifaddrs* list = nullptr;
    if (::getifaddrs(&list) != 0) return out;
    for (const ifaddrs* it = list; it; it = it->ifa_next) {
        if (!it->ifa_addr || it->ifa_addr->sa_family != AF_INET || !(it->ifa_flags & IFF_UP)) continue;
        char buf[INET_ADDRSTRLEN] = {};
        const auto* sin = reinterpret_cast<const sockaddr_in*>(it->ifa_addr);
        if (::inet_ntop(AF_INET, &sin->sin_addr, buf, sizeof(buf))) out.push_back({buf, p});
    }
    ::freeifaddrs(list);
    return out;
}

PeerOffer make_offer(const PeerListener& listener) {
    PeerOffer o;
    o.token = random_token();
    o.endpoints = listener.endpoints();
    if (o.endpoints.empty()) throw Error(ErrorCode::NoUsableEndpoint, "listener has no usable address");
    return o;
}

// ---------------------------------------------------------------------------------------

struct Offerer::State {
    PeerListener listener;
    PeerOffer offer;
    std::thread accept_thread;
    std::atomic<bool> stopping{false};
    std::mutex mu;
    std::condition_variable cv;
    std::deque<tcp::socket> ready;

    State(PeerListener l, PeerOffer o) : listener(std::move(l)), offer(std::move(o)) {}

    void serve() {
        auto& acc = listener.state_->acceptor;
        auto& io = *listener.state_->io;
        const Handshake expected = handshake_bytes(offer.token, kPeerProtocolVersion);
        while (!stopping) {
            tcp::socket sock(io);
            boost::system::error_code ec;
            acc.accept(sock, ec);
            if (ec || stopping) break;
            Handshake got{};
            if (!net::read_exact_for(sock, asio::buffer(got), std::chrono::milliseconds(2000)) || got != expected) {
                net::shutdown_both(sock);
                continue;
            }
            asio::write(sock, asio::buffer(got), ec);
            if (ec) continue;
            sock.set_option(tcp::no_delay(true), ec);
            std::lock_guard lock(mu);
            ready.push_back(std::move(sock));
            cv.notify_all();
        }
    }
};

Offerer::Offerer(PeerListener listener) : Offerer(std::move(listener), PeerOffer{}) {}

Offerer::Offerer(PeerListener listener, PeerOffer offer) {
    if (offer.endpoints.empty()) offer = make_offer(listener);
    state_ = std::make_shared<State>(std::move(listener), std::move(offer));
    state_->accept_thread = std::thread([s = state_.get()] { s->serve(); });
}

Offerer::~Offerer() {
    state_->stopping = true;
    ::shutdown(state_->listener.state_->acceptor.native_handle(), SHUT_RDWR);
    if (state_->accept_thread.joinable()) state_->accept_thread.join();
    for (auto& s : state_->ready) net::shutdown_both(s);
}

const PeerOffer& Offerer::offer() const { return state_->offer; }

PeerChannel Offerer::establish(const PeerAnswer& answer, std::chrono::milliseconds timeout) {
    if (answer.token != state_->offer.token) throw Error(ErrorCode::TokenMismatch, "answer token does not match offer");
    if (answer.version != kPeerProtocolVersion)
        throw Error(ErrorCode::VersionMismatch, "answer version " + std::to_string(answer.version));
    std::unique_lock lock(state_->mu);
    if (!state_->cv.wait_for(lock, timeout, [&] { return !state_->ready.empty(); }))
        throw Error(ErrorCode::Timeout, "no peer connection within " + std::to_string(timeout.count()) + " ms");
    tcp::socket sock = std::move(state_->ready.front());
    state_->ready.pop_front();
    return PeerChannel(state_->listener.state_->io, std::move(sock));
}

PeerChannel Offerer::establish(AnswerMailbox& answers, std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    auto answer = answers.pop_until(deadline);
    if (!answer) throw Error(ErrorCode::Timeout, "no answer within " + std::to_string(timeout.count()) + " ms");
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    return establish(*answer, std::max(left, std::chrono::milliseconds(0)));
}

AcceptResult accept_offer(const PeerOffer& offer, std::chrono::milliseconds per_candidate) {
    if (offer.version != kPeerProtocolVersion)
        throw Error(ErrorCode::VersionMismatch, "offer version " + std::to_string(offer.version));
    const Handshake hello = handshake_bytes(offer.token, kPeerProtocolVersion);
    bool rejected = false;
    auto io = std::make_shared<asio::io_context>();
    for (const auto& ep : offer.endpoints) {
        auto sock = net::connect(*io, ep, per_candidate);
        if (!sock) continue;
        boost::system::error_code ec;
        asio::write(*sock, asio::buffer(hello), ec);
        if (ec) continue;
        Handshake echo{};
        if (!net::read_exact_for(*sock, asio::buffer(echo), per_candidate) || echo != hello) {
            rejected = true;
            continue;
        }
        PeerAnswer answer;
        answer.token = offer.token;
        return {answer, PeerChannel(io, std::move(*sock)), ep};
    }
    if (rejected) throw Error(ErrorCode::TokenMismatch, "every reachable candidate rejected the handshake");
    throw Error(ErrorCode::AllCandidatesFailed, "none of " + std::to_string(offer.endpoints.size()) + " candidates answered");
}

}  // namespace avatar::peer
