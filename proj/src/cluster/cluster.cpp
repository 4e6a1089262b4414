#include "avatar/cluster/instance.hpp"
#include "avatar/error.hpp"

namespace avatar::cluster {

ClusterHandle::ClusterHandle(const ClusterOptions& options) {
    if (options.instances < 1) throw Error(ErrorCode::IllegalState, "a cluster needs at least one instance");
    store_ = make_store(options.store, options.store_path);
    std::vector<InstanceAddress> addrs;
    for (std::size_t i = 0; i < options.instances; ++i) {
        InstanceConfig cfg;
        cfg.instance_id = "instance-" + std::to_string(i);
        cfg.bind_host = options.host;
        cfg.port = options.base_port ? static_cast<std::uint16_t>(options.base_port + i) : 0;
        cfg.seed = options.seed + i;
        auto inst = std::make_unique<Instance>(cfg, store_);
        inst->start();
        addrs.push_back(inst->address());
        instances_.push_back(std::move(inst));
    }
    dispatcher_ = std::make_unique<Dispatcher>(addrs, options.host, options.dispatcher_port);
    dispatcher_->start();
}

ClusterHandle::~ClusterHandle() {
    if (dispatcher_) dispatcher_->stop();
    kill_all();
}

InstanceAddress ClusterHandle::dispatcher_address() const { return dispatcher_->address(); }

void ClusterHandle::kill(std::size_t i) { instances_.at(i)->stop(); }

void ClusterHandle::kill_all() {
    for (auto& inst : instances_) inst->stop();
}

std::size_t ClusterHandle::live_rooms() const {
    std::size_t n = 0;
    for (const auto& inst : instances_) n += inst->running() ? inst->live_rooms() : 0;
    return n;
}

std::unique_ptr<ClusterHandle> spawn_cluster(const ClusterOptions& options) {
    return std::make_unique<ClusterHandle>(options);
}

}  // namespace avatar::cluster
