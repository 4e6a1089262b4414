#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include "avatar/cluster/directory.hpp"
#include "avatar/net.hpp"
#include "avatar/signaling/protocol.hpp"

namespace avatar::cluster {

class ProxyLink;

/// Receives documents coming back from the owner's instance.
class LinkSink {
public:
    virtual ~LinkSink() = default;
    virtual void link_message(const signaling::SignalMessage& msg) = 0;
    virtual void link_ended(const ProxyLink* link, bool peer_gone_seen) = 0;
};

/// Guest-side end of an inter-instance link. One writer thread drains a bounded queue,
/// so senders block once 1024 documents are waiting; one reader thread feeds the sink.
class ProxyLink {
public:
    static constexpr std::size_t kQueueCapacity = 1024;

    /// Returns nullptr when the owner's instance cannot be reached.
    static std::shared_ptr<ProxyLink> open(const InstanceAddress& remote, std::string room,
                                           std::weak_ptr<LinkSink> sink);
    ~ProxyLink();

    void start();
    /// Wraps the document in the room envelope and queues it.
    void send(signaling::SignalMessage msg);
    /// Flushes queued documents, then half-closes.
    void finish();
    /// Drops the connection immediately.
    void close();
    void join();

    [[nodiscard]] bool finished() const { return reader_done_ && writer_done_; }
    [[nodiscard]] const std::string& room() const { return room_; }

private:
    ProxyLink(std::string room, std::weak_ptr<LinkSink> sink);
    void write_loop();
    void read_loop();

    net::asio::io_context io_;
    net::tcp::socket sock_{io_};
    std::string room_;
    std::weak_ptr<LinkSink> sink_;
    net::BoundedQueue<std::string> queue_{kQueueCapacity};
    std::thread writer_;
    std::thread reader_;
    std::atomic<bool> reader_done_{false};
    std::atomic<bool> writer_done_{false};
};

}  // namespace avatar::cluster
