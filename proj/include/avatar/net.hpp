#pragma once

#include <boost/asio/ip/tcp.hpp>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <string>

namespace avatar::net {

namespace asio = boost::asio;
using tcp = asio::ip::tcp;

struct HostPort {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;

    [[nodiscard]] std::string to_string() const { return host + ":" + std::to_string(port); }
    bool operator==(const HostPort&) const = default;
};

/// Parses "host:port"; throws MalformedMessage.
HostPort parse_host_port(const std::string& text);

/// Connects with a deadline. Returns nullopt on refusal or timeout.
std::optional<tcp::socket> connect(asio::io_context& io, const HostPort& addr,
                                   std::chrono::milliseconds timeout = std::chrono::milliseconds(2000));

/// Unblocks any thread reading or writing the socket. Safe to call from another thread.
void shutdown_both(tcp::socket& sock) noexcept;
void shutdown_send(tcp::socket& sock) noexcept;

/// Reads exactly `buf.size()` bytes. False on timeout, error or early end of stream.
bool read_exact_for(tcp::socket& sock, asio::mutable_buffer buf, std::chrono::milliseconds timeout);

inline constexpr std::size_t kMaxFrameBytes = 1 << 20;

/// u32 little-endian length prefix followed by the payload.
void write_frame(tcp::socket& sock, const std::string& payload);

/// Returns nullopt on orderly end of stream; throws Io on errors or oversized frames.
std::optional<std::string> read_frame(tcp::socket& sock);

/// Multi-producer queue that blocks producers once `capacity` items are waiting.
template <typename T>
class BoundedQueue {
public:
    explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

    /// Returns false if the queue was closed.
    bool push(T item) {
        std::unique_lock lock(mu_);
        not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
        if (closed_) return false;
        items_.push_back(std::move(item));
        not_empty_.notify_one();
        return true;
    }

    /// Blocks until an item arrives; nullopt once closed and drained.
    std::optional<T> pop() {
        std::unique_lock lock(mu_);
        not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
        return take(lock);
    }

    std::optional<T> pop_until(std::chrono::steady_clock::time_point deadline) {
        std::unique_lock lock(mu_);
        not_empty_.wait_until(lock, deadline, [&] { return closed_ || !items_.empty(); });
        return take(lock);
    }

    void close() {
        std::lock_guard lock(mu_);
        closed_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }

    [[nodiscard]] std::size_t size() const {
        std::lock_guard lock(mu_);
        return items_.size();
    }

    [[nodiscard]] std::size_t capacity() const { return capacity_; }

private:
    std::optional<T> take(std::unique_lock<std::mutex>&) {
        if (items_.empty()) return std::nullopt;
        T item = std::move(items_.front());
        items_.pop_front();
        not_full_.notify_one();
        return item;
    }

    std::size_t capacity_;
    mutable std::mutex mu_;
    std::condition_variable not_empty_;
    std::condition_variable not_full_;
    std::deque<T> items_;
    bool closed_ = false;
};

}  // namespace avatar::net
