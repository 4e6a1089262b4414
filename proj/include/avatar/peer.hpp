#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "avatar/net.hpp"

namespace avatar::peer {

inline constexpr std::uint8_t kPeerProtocolVersion = 1;
inline constexpr std::size_t kMaxMessageBytes = 65536;
inline constexpr std::chrono::milliseconds kDefaultEstablishTimeout{10000};

enum class ChannelId : std::uint8_t { Data = 0, Track = 1 };

using Token = std::array<std::uint8_t, 16>;

Token random_token();
std::string to_hex(const Token& t);
/// Throws MalformedMessage.
Token token_from_hex(std::string_view hex);

struct PeerOffer {
    Token token{};
    std::vector<net::HostPort> endpoints;
    int version = kPeerProtocolVersion;

    [[nodiscard]] std::string to_blob() const;
    /// Throws MalformedMessage.
    static PeerOffer from_blob(std::string_view blob);
};

struct PeerAnswer {
    Token token{};
    int version = kPeerProtocolVersion;
    std::string signaling_instance;  // informational, lets the offerer report proxying

    [[nodiscard]] std::string to_blob() const;
    static PeerAnswer from_blob(std::string_view blob);
};

/// Trickled candidates; an empty list marks the end of candidates.
std::string candidates_to_blob(const std::vector<net::HostPort>& endpoints);
std::vector<net::HostPort> candidates_from_blob(std::string_view blob);

struct PeerMessage {
    ChannelId channel = ChannelId::Data;
    std::string payload;
};

/// Established peer connection carrying the data and track channels. One sender and
/// one receiver may use it concurrently.
class PeerChannel {
public:
    PeerChannel(std::shared_ptr<net::asio::io_context> io, net::tcp::socket sock);
    ~PeerChannel();
    PeerChannel(PeerChannel&&) noexcept;
    PeerChannel& operator=(PeerChannel&&) noexcept;

    /// Throws ChannelClosed, WrongPacketSize (data channel needs one 2838-byte packet),
    /// OversizedMessage (> 65536 bytes).
    void send(ChannelId channel, std::span<const std::uint8_t> payload);
    void send(ChannelId channel, std::string_view payload);

    /// Blocks for the next message; nullopt once the remote side has finished.
    /// Throws ChannelClosed or OversizedMessage.
    std::optional<PeerMessage> receive();

    /// Half-close: the remote receive() returns nullopt after draining.
    void finish();
    void close();

    [[nodiscard]] bool is_open() const;
    [[nodiscard]] std::chrono::steady_clock::time_point established_at() const;
    [[nodiscard]] net::HostPort remote() const;

private:
    struct State;
    std::unique_ptr<State> state_;
};

/// Bound listening socket for incoming peer connections.
class PeerListener {
public:
    /// An unspecified bind host ("0.0.0.0") advertises every IPv4 interface.
    explicit PeerListener(const std::string& bind_host = "127.0.0.1", std::uint16_t port = 0);
    ~PeerListener();
    PeerListener(PeerListener&&) noexcept;

    [[nodiscard]] std::vector<net::HostPort> endpoints() const;
    [[nodiscard]] std::uint16_t port() const;

    struct State;

private:
    friend class Offerer;
    std::unique_ptr<State> state_;
};

/// Fresh token plus every local candidate. Throws NoUsableEndpoint.
PeerOffer make_offer(const PeerListener& listener);

using AnswerMailbox = net::BoundedQueue<PeerAnswer>;

/// Offering side: accepts and handshakes incoming connections in the background.
class Offerer {
public:
    explicit Offerer(PeerListener listener);
    Offerer(PeerListener listener, PeerOffer offer);
    ~Offerer();

    [[nodiscard]] const PeerOffer& offer() const;

    /// Throws TokenMismatch for a stale answer, Timeout if no handshaken connection arrives.
    PeerChannel establish(const PeerAnswer& answer, std::chrono::milliseconds timeout = kDefaultEstablishTimeout);

    /// Waits for the answer as well; Timeout if none arrives in time.
    PeerChannel establish(AnswerMailbox& answers, std::chrono::milliseconds timeout = kDefaultEstablishTimeout);

    struct State;

private:
    std::shared_ptr<State> state_;
};

struct AcceptResult {
    PeerAnswer answer;
    PeerChannel channel;
    net::HostPort via;
};

/// Dials the offer's candidates in order; the first completed handshake wins.
/// Throws VersionMismatch, TokenMismatch (every reachable candidate rejected the
/// handshake), AllCandidatesFailed.
AcceptResult accept_offer(const PeerOffer& offer, std::chrono::milliseconds per_candidate = std::chrono::milliseconds(1000));

}  // namespace avatar::peer
