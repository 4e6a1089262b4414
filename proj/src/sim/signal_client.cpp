#include <boost/asio/io_context.hpp>
#include <boost/beast/core/buffers_to_string.hpp>
#include <boost/beast/core/flat_buffer.hpp>
#include <boost/beast/websocket.hpp>
#include <optional>

#include "avatar/error.hpp"
#include "avatar/sim.hpp"

namespace avatar::sim {

namespace asio = net::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using signaling::SignalMessage;

std::string transcript_entry(const SignalMessage& msg) {
    std::string out(signaling::to_string(msg.type));
    if (msg.room) out += " room=" + *msg.room;
    if (auto code = msg.code()) out += " code=" + std::to_string(static_cast<int>(*code));
    return out;
}

struct SignalClient::State {
    asio::io_context io;
    std::optional<websocket::stream<net::tcp::socket>> ws;
    beast::flat_buffer buffer;
    std::string instance;
    std::vector<std::string> sent;
    std::vector<std::string> received;
    bool broken = false;
};

SignalClient::SignalClient() : state_(std::make_unique<State>()) {}
SignalClient::~SignalClient() {
    if (state_) close();
}
SignalClient::SignalClient(SignalClient&&) noexcept = default;
SignalClient& SignalClient::operator=(SignalClient&&) noexcept = default;

SignalClient SignalClient::connect(const net::HostPort& addr, std::chrono::milliseconds timeout) {
    SignalClient client;
    auto& s = *client.state_;
    auto sock = net::connect(s.io, addr, timeout);
    if (!sock) throw Error(ErrorCode::Io, "cannot reach signaling at " + addr.to_string());
    sock->set_option(net::tcp::no_delay(true));
    s.ws.emplace(std::move(*sock));

    websocket::response_type response;
    boost::system::error_code ec;
    bool done = false;
    s.ws->async_handshake(response, addr.to_string(), "/ws", [&](boost::system::error_code e) {
        ec = e;
        done = true;
    });
    s.io.run_for(timeout);
    if (!done) {
        net::shutdown_both(s.ws->next_layer());
        s.io.restart();
        s.io.run();
        throw Error(ErrorCode::Io, "signaling upgrade timed out");
    }
    if (ec) throw Error(ErrorCode::Io, "signaling upgrade failed: " + ec.message());
    s.instance = std::string(response["X-Instance-Id"]);
    s.ws->text(true);
    return client;
}

void SignalClient::send(const SignalMessage& msg) {
    auto& s = *state_;
    if (s.broken || !s.ws) throw Error(ErrorCode::PeerGone, "signaling connection closed");
    boost::system::error_code ec;
    s.ws->write(asio::buffer(signaling::serialize(msg)), ec);
    if (ec) {
        s.broken = true;
        throw Error(ErrorCode::PeerGone, "signaling write failed: " + ec.message());
    }
    s.sent.push_back(transcript_entry(msg));
}

SignalMessage SignalClient::receive(std::chrono::milliseconds timeout) {
    auto& s = *state_;
    if (s.broken || !s.ws) throw Error(ErrorCode::PeerGone, "signaling connection closed");
    s.buffer.clear();
    boost::system::error_code ec;
    bool done = false;
    s.ws->async_read(s.buffer, [&](boost::system::error_code e, std::size_t) {
        ec = e;
        done = true;
    });
    s.io.restart();
    s.io.run_for(timeout);
    if (!done) {
        s.broken = true;
        net::shutdown_both(s.ws->next_layer());
        s.io.restart();
        s.io.run();
        throw Error(ErrorCode::Timeout, "no signaling message within " + std::to_string(timeout.count()) + " ms");
    }
    if (ec) {
        s.broken = true;
        throw Error(ErrorCode::PeerGone, "signaling connection closed: " + ec.message());
    }
    SignalMessage msg = signaling::parse(beast::buffers_to_string(s.buffer.data()));
    s.received.push_back(transcript_entry(msg));
    return msg;
}

void SignalClient::close() {
    auto& s = *state_;
    if (!s.ws) return;
    if (!s.broken) {
        bool done = false;
        s.ws->async_close(websocket::close_code::normal, [&](boost::system::error_code) { done = true; });
        s.io.restart();
        s.io.run_for(std::chrono::seconds(1));
        if (!done) {
            net::shutdown_both(s.ws->next_layer());
            s.io.restart();
            s.io.run();
        }
    }
    boost::system::error_code ec;
    s.ws->next_layer().close(ec);
    s.ws.reset();
    s.broken = true;
}

const std::string& SignalClient::instance_id() const { return state_->instance; }
const std::vector<std::string>& SignalClient::sent() const { return state_->sent; }
const std::vector<std::string>& SignalClient::received() const { return state_->received; }

}  // namespace avatar::sim
