#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "avatar/cluster/directory.hpp"
#include "avatar/signaling/service.hpp"

namespace avatar::cluster {

struct InstanceConfig {
    std::string instance_id = "instance-0";
    std::string bind_host = "127.0.0.1";
    std::uint16_t port = 0;                     // 0 picks a free port
    std::optional<InstanceAddress> advertise;   // defaults to the bound address
    std::uint64_t seed = 1;
    std::chrono::seconds waiting_ttl{600};
    std::chrono::milliseconds reap_interval{500};
    unsigned io_threads = 4;
};

/// One signaling server: WebSocket clients on /ws, health on /healthz, and framed
/// inter-instance proxy links, all on a single port.
class Instance {
public:
    Instance(InstanceConfig config, std::shared_ptr<DirectoryStore> store);
    ~Instance();

    Instance(const Instance&) = delete;
    Instance& operator=(const Instance&) = delete;

    /// Binds and starts serving. Throws PortUnavailable.
    void start();

    /// Abrupt shutdown: every client and proxy connection is dropped.
    void stop();

    [[nodiscard]] bool running() const;
    [[nodiscard]] InstanceAddress address() const;
    [[nodiscard]] const std::string& id() const;
    [[nodiscard]] std::size_t live_rooms() const;
    /// Outbound proxy links still open from this instance.
    [[nodiscard]] std::size_t open_proxy_links() const;
    signaling::RoomService& service();

    struct Impl;

private:
    std::shared_ptr<Impl> impl_;
};

/// Round-robin TCP forwarder standing in for a load balancer. Backends that refuse
/// connections are skipped.
class Dispatcher {
public:
    Dispatcher(std::vector<InstanceAddress> backends, std::string bind_host = "127.0.0.1", std::uint16_t port = 0);
    ~Dispatcher();

    Dispatcher(const Dispatcher&) = delete;
    Dispatcher& operator=(const Dispatcher&) = delete;

    /// Throws PortUnavailable.
    void start();
    void stop();

    [[nodiscard]] InstanceAddress address() const;
    [[nodiscard]] std::size_t connections_forwarded() const;

    struct Impl;

private:
    std::shared_ptr<Impl> impl_;
};

struct ClusterOptions {
    std::size_t instances = 1;
    StoreKind store = StoreKind::Memory;
    std::filesystem::path store_path;
    std::uint64_t seed = 1;
    std::string host = "127.0.0.1";
    std::uint16_t base_port = 0;        // instance i listens on base_port + i when nonzero
    std::uint16_t dispatcher_port = 0;
};

/// n instances sharing one store, fronted by a dispatcher.
class ClusterHandle {
public:
    explicit ClusterHandle(const ClusterOptions& options);
    ~ClusterHandle();

    [[nodiscard]] InstanceAddress dispatcher_address() const;
    [[nodiscard]] std::size_t size() const { return instances_.size(); }
    Instance& instance(std::size_t i) { return *instances_.at(i); }
    DirectoryStore& store() { return *store_; }

    void kill(std::size_t i);
    void kill_all();
    [[nodiscard]] std::size_t live_rooms() const;

private:
    std::shared_ptr<DirectoryStore> store_;
    std::vector<std::unique_ptr<Instance>> instances_;
    std::unique_ptr<Dispatcher> dispatcher_;
};

/// Throws PortUnavailable, StoreUnavailable.
std::unique_ptr<ClusterHandle> spawn_cluster(const ClusterOptions& options);

}  // namespace avatar::cluster
