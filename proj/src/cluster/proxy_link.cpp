#include "proxy_link.hpp"

#include "avatar/error.hpp"

namespace avatar::cluster {

using signaling::SignalMessage;

ProxyLink::ProxyLink(std::string room, std::weak_ptr<LinkSink> sink) : room_(std::move(room)), sink_(std::move(sink)) {}

ProxyLink::~ProxyLink() {
    close();
    join();
}

std::shared_ptr<ProxyLink> ProxyLink::open(const InstanceAddress& remote, std::string room,
                                           std::weak_ptr<LinkSink> sink) {
    std::shared_ptr<ProxyLink> link(new ProxyLink(std::move(room), std::move(sink)));
    auto sock = net::connect(link->io_, remote);
    if (!sock) return nullptr;
    link->sock_ = std::move(*sock);
    return link;
}

void ProxyLink::start() {
    writer_ = std::thread([this] { write_loop(); });
    reader_ = std::thread([this] { read_loop(); });
}

void ProxyLink::send(SignalMessage msg) {
    msg.proxy_room = room_;
    queue_.push(signaling::serialize(msg));
}

void ProxyLink::finish() { queue_.close(); }

void ProxyLink::close() {
    queue_.close();
    net::shutdown_both(sock_);
}

void ProxyLink::join() {
    if (writer_.joinable() && writer_.get_id() != std::this_thread::get_id()) writer_.join();
    if (reader_.joinable() && reader_.get_id() != std::this_thread::get_id()) reader_.join();
}

void ProxyLink::write_loop() {
    try {
        while (auto doc = queue_.pop()) net::write_frame(sock_, *doc);
        net::shutdown_send(sock_);
    } catch (const Error&) {
        queue_.close();
    }
    writer_done_ = true;
}

void ProxyLink::read_loop() {
    bool peer_gone = false;
    try {
        while (auto doc = net::read_frame(sock_)) {
            SignalMessage msg;
            try {
                msg = signaling::parse(*doc);
            } catch (const Error&) {
                continue;
            }
            msg.proxy_room.reset();
            if (msg.code() == signaling::WireCode::PeerGone) peer_gone = true;
            if (auto sink = sink_.lock()) sink->link_message(msg);
        }
    } catch (const Error&) {
    }
    queue_.close();
    if (auto sink = sink_.lock()) sink->link_ended(this, peer_gone);
    net::shutdown_both(sock_);
    reader_done_ = true;
}

}  // namespace avatar::cluster
