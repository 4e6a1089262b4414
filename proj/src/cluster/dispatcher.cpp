#include <sys/socket.h>

#include <boost/asio/write.hpp>
#include <array>
#include <atomic>
#include <list>
#include <mutex>
#include <thread>

#include "avatar/cluster/instance.hpp"
#include "avatar/error.hpp"

namespace avatar::cluster {

namespace asio = net::asio;
using net::tcp;

namespace {

/// Copies bytes in both directions until each side finishes.
struct Pipe {
    tcp::socket client;
    tcp::socket backend;
    std::thread up;
    std::thread down;
    std::atomic<int> finished{0};

    Pipe(tcp::socket c, tcp::socket b) : client(std::move(c)), backend(std::move(b)) {}

    static void pump(tcp::socket& from, tcp::socket& to, std::atomic<int>& finished) {
        std::array<char, 16 * 1024> buf{};
        boost::system::error_code ec;
        for (;;) {
            const std::size_t n = from.read_some(asio::buffer(buf), ec);
            if (ec) break;
            asio::write(to, asio::buffer(buf.data(), n), ec);
            if (ec) break;
        }
        if (ec == asio::error::eof)
            net::shutdown_send(to);
        else {
            net::shutdown_both(to);
            net::shutdown_both(from);
        }
        ++finished;
    }

    void start() {
        up = std::thread([this] { pump(client, backend, finished); });
        down = std::thread([this] { pump(backend, client, finished); });
    }

    void kill() {
        net::shutdown_both(client);
        net::shutdown_both(backend);
    }

    void join() {
        if (up.joinable()) up.join();
        if (down.joinable()) down.join();
    }
};

}  // namespace

struct Dispatcher::Impl {
    std::vector<InstanceAddress> backends;
    std::string bind_host;
    std::uint16_t port;
    asio::io_context io;
    tcp::acceptor acceptor{io};
    std::thread accept_thread;
    std::atomic<bool> running{false};
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> forwarded{0};
    std::mutex mu;
    std::list<std::unique_ptr<Pipe>> pipes;
    InstanceAddress addr;

    void prune() {
        std::list<std::unique_ptr<Pipe>> done;
        {
            std::lock_guard lock(mu);
            for (auto it = pipes.begin(); it != pipes.end();) {
                if ((*it)->finished == 2) {
                    done.push_back(std::move(*it));
                    it = pipes.erase(it);
                } else {
                    ++it;
                }
            }
        }
        for (auto& p : done) p->join();
    }

    void serve() {
        while (running) {
            boost::system::error_code ec;
            tcp::socket client(io);
            acceptor.accept(client, ec);
            if (ec || !running) break;
            prune();
            const std::size_t start = next++;
            std::optional<tcp::socket> backend;
            for (std::size_t k = 0; k < backends.size() && !backend; ++k)
                backend = net::connect(io, backends[(start + k) % backends.size()], std::chrono::milliseconds(500));
            if (!backend) {
                net::shutdown_both(client);
                continue;
            }
            client.set_option(tcp::no_delay(true), ec);
            auto pipe = std::make_unique<Pipe>(std::move(client), std::move(*backend));
            pipe->start();
            ++forwarded;
            std::lock_guard lock(mu);
            pipes.push_back(std::move(pipe));
        }
    }
};

Dispatcher::Dispatcher(std::vector<InstanceAddress> backends, std::string bind_host, std::uint16_t port)
    : impl_(std::make_shared<Impl>()) {
    impl_->backends = std::move(backends);
    impl_->bind_host = std::move(bind_host);
    impl_->port = port;
}

Dispatcher::~Dispatcher() { stop(); }

void Dispatcher::start() {
    boost::system::error_code ec;
    const auto ip = asio::ip::make_address(impl_->bind_host, ec);
    if (ec) throw Error(ErrorCode::PortUnavailable, "bad bind host " + impl_->bind_host);
    const tcp::endpoint ep(ip, impl_->port);
    auto& acc = impl_->acceptor;
    acc.open(ep.protocol(), ec);
    if (!ec) acc.set_option(asio::socket_base::reuse_address(true), ec);
    if (!ec) acc.bind(ep, ec);
    if (!ec) acc.listen(asio::socket_base::max_listen_connections, ec);
    if (ec) throw Error(ErrorCode::PortUnavailable, impl_->bind_host + ":" + std::to_string(impl_->port));
    impl_->addr = {impl_->bind_host, acc.local_endpoint().port()};
    impl_->running = true;
    impl_->accept_thread = std::thread([impl = impl_.get()] { impl->serve(); });
}

void Dispatcher::stop() {
    if (!impl_->running.exchange(false)) return;
    ::shutdown(impl_->acceptor.native_handle(), SHUT_RDWR);
    if (impl_->accept_thread.joinable()) impl_->accept_thread.join();
    boost::system::error_code ec;
    impl_->acceptor.close(ec);
    std::lock_guard lock(impl_->mu);
    for (auto& p : impl_->pipes) p->kill();
    for (auto& p : impl_->pipes) p->join();
    impl_->pipes.clear();
}

InstanceAddress Dispatcher::address() const { return impl_->addr; }

std::size_t Dispatcher::connections_forwarded() const { return impl_->forwarded; }

}  // namespace avatar::cluster
