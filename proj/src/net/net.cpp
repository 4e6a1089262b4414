#include "avatar/net.hpp"

#include <poll.h>
#include <sys/socket.h>
#include <sys/time.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/read.hpp>
#include <boost/asio/write.hpp>
#include <array>
#include <charconv>

#include "avatar/error.hpp"

namespace avatar::net {

HostPort parse_host_port(const std::string& text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos || colon == 0) throw Error(ErrorCode::MalformedMessage, "expected host:port, got " + text);
    unsigned port = 0;
    const char* first = text.data() + colon + 1;
    const char* last = text.data() + text.size();
    const auto res = std::from_chars(first, last, port);
    if (res.ec != std::errc{} || res.ptr != last || port > 65535)
        throw Error(ErrorCode::MalformedMessage, "bad port in " + text);
    return {text.substr(0, colon), static_cast<std::uint16_t>(port)};
}

std::optional<tcp::socket> connect(asio::io_context& io, const HostPort& addr, std::chrono::milliseconds timeout) {
    boost::system::error_code ec;
    const auto ip = asio::ip::make_address(addr.host, ec);
    tcp::endpoint ep;
    if (!ec) {
        ep = tcp::endpoint(ip, addr.port);
    } else {
        tcp::resolver resolver(io);
        auto results = resolver.resolve(addr.host, std::to_string(addr.port), ec);
        if (ec || results.empty()) return std::nullopt;
        ep = *results.begin();
    }

    tcp::socket sock(io);
    sock.open(ep.protocol(), ec);
    if (ec) return std::nullopt;
    sock.non_blocking(true, ec);
    sock.connect(ep, ec);
    if (ec == asio::error::in_progress || ec == asio::error::would_block) {
        pollfd pfd{sock.native_handle(), POLLOUT, 0};
        const int ready = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
        if (ready <= 0) return std::nullopt;
        int err = 0;
        socklen_t len = sizeof(err);
        ::getsockopt(sock.native_handle(), SOL_SOCKET, SO_ERROR, &err, &len);
        if (err != 0) return std::nullopt;
        ec = {};
    }
    if (ec) return std::nullopt;
    sock.non_blocking(false, ec);
    sock.set_option(tcp::no_delay(true), ec);
    return sock;
}

void shutdown_both(tcp::socket& sock) noexcept {
    if (sock.is_open()) ::shutdown(sock.native_handle(), SHUT_RDWR);
}

void shutdown_send(tcp::socket& sock) noexcept {
    if (sock.is_open()) ::shutdown(sock.native_handle(), SHUT_WR);
}

bool read_exact_for(tcp::socket& sock, asio::mutable_buffer buf, std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    auto* data = static_cast<char*>(buf.data());
    std::size_t got = 0;
    while (got < buf.size()) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) return false;
        pollfd pfd{sock.native_handle(), POLLIN, 0};
        if (::poll(&pfd, 1, static_cast<int>(left.count())) <= 0) return false;
        boost::system::error_code ec;
        got += sock.read_some(asio::buffer(data + got, buf.size() - got), ec);
        if (ec) return false;
    }
    return true;
}

void write_frame(tcp::socket& sock, const std::string& payload) {
    const auto n = static_cast<std::uint32_t>(payload.size());
    const std::array<std::uint8_t, 4> prefix{static_cast<std::uint8_t>(n), static_cast<std::uint8_t>(n >> 8),
                                             static_cast<std::uint8_t>(n >> 16), static_cast<std::uint8_t>(n >> 24)};
    const std::array<asio::const_buffer, 2> bufs{asio::buffer(prefix), asio::buffer(payload)};
    boost::system::error_code ec;
    asio::write(sock, bufs, ec);
    if (ec) throw Error(ErrorCode::Io, "frame write failed: " + ec.message());
}

std::optional<std::string> read_frame(tcp::socket& sock) {
    std::array<std::uint8_t, 4> prefix{};
    boost::system::error_code ec;
    const std::size_t got = asio::read(sock, asio::buffer(prefix), ec);
    if (ec == asio::error::eof && got == 0) return std::nullopt;
    if (ec) throw Error(ErrorCode::Io, "frame read failed: " + ec.message());
    const std::uint32_t n = prefix[0] | (prefix[1] << 8) | (prefix[2] << 16) | (static_cast<std::uint32_t>(prefix[3]) << 24);
    if (n > kMaxFrameBytes) throw Error(ErrorCode::Io, "frame of " + std::to_string(n) + " bytes exceeds limit");
    std::string payload(n, '\0');
    asio::read(sock, asio::buffer(payload), ec);
    if (ec) throw Error(ErrorCode::Io, "truncated frame: " + ec.message());
    return payload;
}

}  // namespace avatar::net
