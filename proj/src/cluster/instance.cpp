#include "avatar/cluster/instance.hpp"

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/strand.hpp>
#include <boost/asio/write.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <thread>

#include "avatar/error.hpp"
#include "proxy_link.hpp"

namespace avatar::cluster {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using signaling::MessageType;
using signaling::SignalMessage;
using signaling::WireCode;

namespace {

std::string framed(const std::string& payload) {
    const auto n = static_cast<std::uint32_t>(payload.size());
    std::string out;
    out.reserve(4 + payload.size());
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((n >> (8 * i)) & 0xFF));
    out += payload;
    return out;
}

}  // namespace

class ServerSession {
public:
    virtual ~ServerSession() = default;
    /// Called only after the io threads have stopped.
    virtual void force_close() = 0;
};

struct Instance::Impl {
    asio::io_context io;
    InstanceConfig config;
    std::shared_ptr<DirectoryStore> store;
    InstanceAddress addr;
    std::unique_ptr<signaling::RoomService> service;

    std::optional<asio::executor_work_guard<asio::io_context::executor_type>> work;
    tcp::acceptor acceptor{io};
    std::vector<std::thread> threads;

    std::thread reaper;
    std::mutex reaper_mu;
    std::condition_variable reaper_cv;
    std::atomic<bool> running{false};

    std::mutex sessions_mu;
    std::vector<std::weak_ptr<ServerSession>> sessions;

    mutable std::mutex links_mu;
    std::vector<std::shared_ptr<ProxyLink>> links;

    Impl(InstanceConfig c, std::shared_ptr<DirectoryStore> s) : config(std::move(c)), store(std::move(s)) {}

    void start();
    void stop();
    void do_accept();
    void track(const std::shared_ptr<ServerSession>& s) {
        std::lock_guard lock(sessions_mu);
        std::erase_if(sessions, [](const auto& w) { return w.expired(); });
        sessions.push_back(s);
    }
    void add_link(const std::shared_ptr<ProxyLink>& link) {
        std::lock_guard lock(links_mu);
        links.push_back(link);
    }
    void prune_links() {
        std::vector<std::shared_ptr<ProxyLink>> done;
        {
            std::lock_guard lock(links_mu);
            auto it = std::partition(links.begin(), links.end(), [](const auto& l) { return !l->finished(); });
            done.assign(it, links.end());
            links.erase(it, links.end());
        }
        for (auto& l : done) l->join();
    }
};

namespace {

using ImplPtr = Instance::Impl*;

class WsSession final : public signaling::Connection,
                        public LinkSink,
                        public ServerSession,
                        public std::enable_shared_from_this<WsSession> {
public:
    WsSession(beast::tcp_stream&& stream, ImplPtr inst) : ws_(std::move(stream)), inst_(std::move(inst)) {}

    void start(http::request<http::string_body> req) {
        member_ = inst_->service->attach(shared_from_this());
        const std::string id = inst_->config.instance_id;
        ws_.set_option(websocket::stream_base::decorator(
            [id](websocket::response_type& res) { res.set("X-Instance-Id", id); }));
        ws_.text(true);
        ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
            if (ec) return self->gone();
            self->do_read();
        });
    }

    void deliver(const SignalMessage& msg) override {
        auto text = std::make_shared<std::string>(signaling::serialize(msg));
        asio::post(ws_.get_executor(), [self = shared_from_this(), text] {
            self->queue_.push_back(std::move(*text));
            if (!self->writing_) self->write_next();
        });
    }

    void link_message(const SignalMessage& msg) override { deliver(msg); }

    void link_ended(const ProxyLink* link, bool peer_gone_seen) override {
        std::shared_ptr<ProxyLink> ended;
        {
            std::lock_guard lock(link_mu_);
            if (link_.get() != link) return;
            ended = std::move(link_);
        }
        if (!peer_gone_seen) deliver(SignalMessage::error(WireCode::PeerGone, "owner instance went away", ended->room()));
    }

    void force_close() override {
        beast::error_code ec;
        beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ec);
        beast::get_lowest_layer(ws_).socket().close(ec);
        std::lock_guard lock(link_mu_);
        member_.reset();
        link_.reset();
    }

    std::shared_ptr<ProxyLink> link() {
        std::lock_guard lock(link_mu_);
        return link_;
    }
    void set_link(std::shared_ptr<ProxyLink> l) {
        std::lock_guard lock(link_mu_);
        link_ = std::move(l);
    }
    signaling::RoomService::MemberPtr member() {
        std::lock_guard lock(link_mu_);
        return member_;
    }

private:
    void do_read() {
        ws_.async_read(buf_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return self->gone();
            std::string text = beast::buffers_to_string(self->buf_.data());
            self->buf_.consume(self->buf_.size());
            self->on_text(text);
            self->do_read();
        });
    }

    void on_text(const std::string& text) {
        SignalMessage msg;
        try {
            msg = signaling::parse(text);
        } catch (const Error& e) {
            deliver(SignalMessage::error(WireCode::Malformed, e.what()));
            return;
        }
        route(msg);
    }

    void route(const SignalMessage& msg) {
        if (auto l = link()) {
            l->send(msg);
            if (msg.type == MessageType::HangUp) {
                set_link(nullptr);
                l->finish();
            }
            return;
        }
        auto m = member();
        if (!m) return;
        auto& service = *inst_->service;
        if (msg.type == MessageType::JoinRoom && msg.room && !service.room_of(m) && !service.has_room(*msg.room)) {
            std::optional<RoomRecord> rec;
            try {
                rec = inst_->store->get(*msg.room);
            } catch (const Error&) {
            }
            if (rec && rec->instance_id != inst_->config.instance_id) {
                auto l = ProxyLink::open(rec->instance, *msg.room, weak_from_this());
                if (!l) {
                    deliver(SignalMessage::error(WireCode::PeerGone, "owner instance unreachable", msg.room));
                    return;
                }
                set_link(l);
                inst_->add_link(l);
                l->start();
                l->send(msg);
                return;
            }
        }
        service.handle(m, msg);
    }

    void write_next() {
        writing_ = true;
        ws_.async_write(asio::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            self->queue_.pop_front();
            if (ec) {
                self->queue_.clear();
                self->writing_ = false;
                return;
            }
            if (self->queue_.empty())
                self->writing_ = false;
            else
                self->write_next();
        });
    }

    void gone() {
        if (gone_.exchange(true)) return;
        if (auto l = link()) {
            l->send(SignalMessage::make(MessageType::HangUp));
            l->finish();
            set_link(nullptr);
        } else if (auto m = member()) {
            inst_->service->detach(m);
        }
        std::lock_guard lock(link_mu_);
        member_.reset();
    }

    websocket::stream<beast::tcp_stream> ws_;
    ImplPtr inst_;
    beast::flat_buffer buf_;
    std::deque<std::string> queue_;
    bool writing_ = false;
    std::atomic<bool> gone_{false};

    std::mutex link_mu_;
    std::shared_ptr<ProxyLink> link_;
    signaling::RoomService::MemberPtr member_;
};

/// Owner-side end of an inter-instance link: framed documents for one proxied guest.
class ProxySession final : public signaling::Connection,
                           public ServerSession,
                           public std::enable_shared_from_this<ProxySession> {
public:
    ProxySession(beast::tcp_stream&& stream, beast::flat_buffer&& buf, ImplPtr inst)
        : stream_(std::move(stream)), buf_(std::move(buf)), inst_(std::move(inst)) {}

    void start() {
        member_ = inst_->service->attach(shared_from_this());
        pump();
    }

    void deliver(const SignalMessage& msg) override {
        SignalMessage out = msg;
        out.proxy_room = room_;
        auto bytes = std::make_shared<std::string>(framed(signaling::serialize(out)));
        asio::post(stream_.get_executor(), [self = shared_from_this(), bytes] {
            self->queue_.push_back(std::move(*bytes));
            if (!self->writing_) self->write_next();
        });
    }

    void room_closed(const std::string&) override {
        asio::post(stream_.get_executor(), [self = shared_from_this()] {
            self->closing_ = true;
            if (!self->writing_) self->finish_send();
        });
    }

    void force_close() override {
        beast::error_code ec;
        stream_.socket().shutdown(tcp::socket::shutdown_both, ec);
        stream_.socket().close(ec);
        member_.reset();
    }

private:
    void pump() {
        for (;;) {
            const auto data = buf_.data();
            if (data.size() < 4) break;
            const auto* p = static_cast<const std::uint8_t*>(data.data());
            const std::uint32_t n = p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
            if (n > net::kMaxFrameBytes) return gone();
            if (data.size() < 4 + n) break;
            std::string payload(reinterpret_cast<const char*>(p) + 4, n);
            buf_.consume(4 + n);
            on_payload(payload);
        }
        stream_.async_read_some(buf_.prepare(64 * 1024), [self = shared_from_this()](beast::error_code ec, std::size_t n) {
            if (ec) return self->gone();
            self->buf_.commit(n);
            self->pump();
        });
    }

    void on_payload(const std::string& payload) {
        SignalMessage msg;
        try {
            msg = signaling::parse(payload);
        } catch (const Error& e) {
            deliver(SignalMessage::error(WireCode::Malformed, e.what()));
            return;
        }
        if (!room_ && msg.proxy_room) room_ = msg.proxy_room;
        msg.proxy_room.reset();
        if (member_) inst_->service->handle(member_, msg);
    }

    void write_next() {
        writing_ = true;
        asio::async_write(stream_, asio::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            self->queue_.pop_front();
            if (ec) {
                self->queue_.clear();
                self->writing_ = false;
                return;
            }
            if (!self->queue_.empty()) return self->write_next();
            self->writing_ = false;
            if (self->closing_) self->finish_send();
        });
    }

    void finish_send() {
        beast::error_code ec;
        stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
    }

    void gone() {
        if (gone_) return;
        gone_ = true;
        if (member_) inst_->service->detach(member_);
        member_.reset();
        closing_ = true;
        if (!writing_) finish_send();
    }

    beast::tcp_stream stream_;
    beast::flat_buffer buf_;
    ImplPtr inst_;
    std::optional<std::string> room_;
    signaling::RoomService::MemberPtr member_;
    std::deque<std::string> queue_;
    bool writing_ = false;
    bool closing_ = false;
    bool gone_ = false;
};

class HttpSession final : public std::enable_shared_from_this<HttpSession> {
public:
    HttpSession(beast::tcp_stream&& stream, beast::flat_buffer&& buf, ImplPtr inst)
        : stream_(std::move(stream)), buf_(std::move(buf)), inst_(std::move(inst)) {}

    void start() {
        stream_.expires_after(std::chrono::seconds(10));
        http::async_read(stream_, buf_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return;
            self->on_request();
        });
    }

private:
    void on_request() {
        if (websocket::is_upgrade(req_) && req_.target() == "/ws") {
            stream_.expires_never();
            auto ws = std::make_shared<WsSession>(std::move(stream_), inst_);
            inst_->track(ws);
            ws->start(std::move(req_));
            return;
        }
        res_.version(req_.version());
        res_.keep_alive(false);
        res_.set(http::field::server, "avatar-signal");
        if (req_.target() == "/healthz") {
            res_.result(http::status::ok);
            res_.set(http::field::content_type, "application/json");
            res_.body() = signaling::Json{{"instance", inst_->config.instance_id},
                                          {"rooms", inst_->service->live_rooms()}}
                              .dump();
        } else {
            res_.result(http::status::not_found);
            res_.set(http::field::content_type, "text/plain");
            res_.body() = "not found\n";
        }
        res_.prepare_payload();
        http::async_write(stream_, res_, [self = shared_from_this()](beast::error_code, std::size_t) {
            beast::error_code ec;
            self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
        });
    }

    beast::tcp_stream stream_;
    beast::flat_buffer buf_;
    ImplPtr inst_;
    http::request<http::string_body> req_;
    http::response<http::string_body> res_;
};

/// Looks at the first bytes to tell HTTP from the framed proxy protocol.
class Detector final : public std::enable_shared_from_this<Detector> {
public:
    Detector(tcp::socket&& sock, ImplPtr inst) : stream_(std::move(sock)), inst_(std::move(inst)) {}

    void start() {
        stream_.expires_after(std::chrono::seconds(10));
        read_more();
    }

private:
    void read_more() {
        stream_.async_read_some(buf_.prepare(4096), [self = shared_from_this()](beast::error_code ec, std::size_t n) {
            if (ec) return;
            self->buf_.commit(n);
            if (self->buf_.size() < 4) return self->read_more();
            self->dispatch();
        });
    }

    void dispatch() {
        const auto* p = static_cast<const char*>(buf_.data().data());
        if (std::string_view(p, 4) == "GET ") {
            std::make_shared<HttpSession>(std::move(stream_), std::move(buf_), inst_)->start();
            return;
        }
        stream_.expires_never();
        auto session = std::make_shared<ProxySession>(std::move(stream_), std::move(buf_), inst_);
        inst_->track(session);
        session->start();
    }

    beast::tcp_stream stream_;
    beast::flat_buffer buf_;
    ImplPtr inst_;
};

}  // namespace

void Instance::Impl::start() {
    beast::error_code ec;
    const auto ip = asio::ip::make_address(config.bind_host, ec);
    if (ec) throw Error(ErrorCode::PortUnavailable, "bad bind host " + config.bind_host);
    const tcp::endpoint ep(ip, config.port);
    acceptor.open(ep.protocol(), ec);
    if (!ec) acceptor.set_option(asio::socket_base::reuse_address(true), ec);
    if (!ec) acceptor.bind(ep, ec);
    if (!ec) acceptor.listen(asio::socket_base::max_listen_connections, ec);
    if (ec) {
        acceptor.close(ec);
        throw Error(ErrorCode::PortUnavailable, config.bind_host + ":" + std::to_string(config.port));
    }
    const auto bound = acceptor.local_endpoint();
    addr = config.advertise.value_or(InstanceAddress{config.bind_host, bound.port()});

    signaling::ServiceConfig sc;
    sc.seed = config.seed;
    sc.instance_id = config.instance_id;
    sc.waiting_ttl = config.waiting_ttl;
    service = std::make_unique<signaling::RoomService>(
        sc, std::make_shared<StoreRegistry>(store, addr, config.instance_id));

    running = true;
    work.emplace(io.get_executor());
    do_accept();
    for (unsigned i = 0; i < std::max(1u, config.io_threads); ++i) threads.emplace_back([this] { io.run(); });
    reaper = std::thread([this] {
        std::unique_lock lock(reaper_mu);
        while (running) {
            reaper_cv.wait_for(lock, config.reap_interval, [this] { return !running; });
            if (!running) break;
            lock.unlock();
            service->reap_expired();
            prune_links();
            lock.lock();
        }
    });
}

void Instance::Impl::do_accept() {
    acceptor.async_accept(asio::make_strand(io), [this](beast::error_code ec, tcp::socket sock) {
        if (ec) return;
        sock.set_option(tcp::no_delay(true), ec);
        std::make_shared<Detector>(std::move(sock), this)->start();
        do_accept();
    });
}

void Instance::Impl::stop() {
    if (!running.exchange(false)) return;
    {
        std::lock_guard lock(reaper_mu);
        reaper_cv.notify_all();
    }
    if (reaper.joinable()) reaper.join();
    work.reset();
    io.stop();
    for (auto& t : threads) t.join();
    threads.clear();
    beast::error_code ec;
    acceptor.close(ec);

    std::vector<std::shared_ptr<ServerSession>> live;
    {
        std::lock_guard lock(sessions_mu);
        for (auto& w : sessions)
            if (auto s = w.lock()) live.push_back(std::move(s));
        sessions.clear();
    }
    for (auto& s : live) s->force_close();

    std::vector<std::shared_ptr<ProxyLink>> all;
    {
        std::lock_guard lock(links_mu);
        all.swap(links);
    }
    for (auto& l : all) l->close();
    for (auto& l : all) l->join();
}

Instance::Instance(InstanceConfig config, std::shared_ptr<DirectoryStore> store)
    : impl_(std::make_shared<Impl>(std::move(config), std::move(store))) {}

Instance::~Instance() { stop(); }

void Instance::start() { impl_->start(); }
void Instance::stop() { impl_->stop(); }
bool Instance::running() const { return impl_->running; }
InstanceAddress Instance::address() const { return impl_->addr; }
const std::string& Instance::id() const { return impl_->config.instance_id; }
std::size_t Instance::live_rooms() const { return impl_->service ? impl_->service->live_rooms() : 0; }

std::size_t Instance::open_proxy_links() const {
    std::lock_guard lock(impl_->links_mu);
    std::size_t n = 0;
    for (const auto& l : impl_->links) n += l->finished() ? 0 : 1;
    return n;
}

signaling::RoomService& Instance::service() {
    if (!impl_->service) throw Error(ErrorCode::IllegalState, "instance not started");
    return *impl_->service;
}

}  // namespace avatar::cluster
