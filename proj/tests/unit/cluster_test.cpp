#include <gtest/gtest.h>

#include <boost/asio/read.hpp>
#include <boost/asio/write.hpp>
#include <atomic>
#include <nlohmann/json.hpp>
#include <fstream>
#include <random>
#include <set>
#include <thread>

#include "avatar/cluster/directory.hpp"
#include "avatar/cluster/instance.hpp"
#include "avatar/error.hpp"
#include "avatar/sim.hpp"

using namespace avatar;
using namespace avatar::cluster;
using namespace std::chrono_literals;
using signaling::MessageType;
using signaling::SignalMessage;
using signaling::WireCode;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() /
               (name + "-" + std::to_string(::getpid()) + "-" + std::to_string(std::random_device{}()));
    std::filesystem::remove_all(dir);
    return dir;
}

RoomRecord record(const std::string& id, std::uint16_t port = 9000) {
    return {id, {"127.0.0.1", port}, "instance-x", "OwnerWaiting", 1};
}

nlohmann::json http_get(const InstanceAddress& addr, const std::string& path, int* status = nullptr) {
    net::asio::io_context io;
    auto sock = net::connect(io, addr);
    if (!sock) throw Error(ErrorCode::Io, "connect");
    const std::string req = "GET " + path + " HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n";
    net::asio::write(*sock, net::asio::buffer(req));
    std::string resp;
    boost::system::error_code ec;
    std::array<char, 4096> buf{};
    for (;;) {
        const auto n = sock->read_some(net::asio::buffer(buf), ec);
        resp.append(buf.data(), n);
        if (ec) break;
    }
    if (status) *status = std::stoi(resp.substr(9, 3));
    const auto body = resp.find("\r\n\r\n");
    return nlohmann::json::parse(resp.substr(body + 4), nullptr, false);
}

SignalMessage expect(sim::SignalClient& c, MessageType t) {
    auto m = c.receive(5s);
    EXPECT_EQ(m.type, t) << signaling::serialize(m);
    return m;
}

template <typename Pred>
bool eventually(Pred p, std::chrono::milliseconds limit = 3s) {
    const auto end = std::chrono::steady_clock::now() + limit;
    while (std::chrono::steady_clock::now() < end) {
        if (p()) return true;
        std::this_thread::sleep_for(10ms);
    }
    return p();
}

ClusterOptions options(std::size_t n) {
    ClusterOptions o;
    o.instances = n;
    return o;
}

}  // namespace

// ---------------------------------------------------------------------------------------
// Directory stores

class StoreTest : public ::testing::TestWithParam<StoreKind> {
protected:
    void SetUp() override {
        dir_ = temp_dir("avatar-store");
        store_ = make_store(GetParam(), dir_);
    }
    void TearDown() override { std::filesystem::remove_all(dir_); }

    std::filesystem::path dir_;
    std::shared_ptr<DirectoryStore> store_;
};

TEST_P(StoreTest, CompareAndSet) {
    auto& s = *store_;
    EXPECT_FALSE(s.get("42"));
    EXPECT_TRUE(s.compare_and_set("42", std::nullopt, record("42")));
    EXPECT_FALSE(s.compare_and_set("42", std::nullopt, record("42")));
    EXPECT_EQ(s.get("42"), record("42"));
    auto moved = record("42");
    moved.state = "Negotiating";
    EXPECT_FALSE(s.compare_and_set("42", moved, record("42")));
    EXPECT_TRUE(s.compare_and_set("42", record("42"), moved));
    EXPECT_EQ(s.get("42")->state, "Negotiating");
    EXPECT_TRUE(s.compare_and_set("42", moved, std::nullopt));
    EXPECT_FALSE(s.get("42"));
}

TEST_P(StoreTest, RegisterLookupRemove) {
    auto& s = *store_;
    register_room(s, record("7", 1234));
    EXPECT_EQ(lookup_room(s, "7").port, 1234);
    try {
        register_room(s, record("7"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Duplicate);
    }
    try {
        lookup_room(s, "8");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NotFound);
    }
    register_room(s, record("8"));
    auto keys = s.keys();
    std::sort(keys.begin(), keys.end());
    EXPECT_EQ(keys, (std::vector<std::string>{"7", "8"}));
    EXPECT_TRUE(s.remove("7"));
    EXPECT_FALSE(s.remove("7"));
    EXPECT_EQ(s.keys(), std::vector<std::string>{"8"});
}

TEST_P(StoreTest, ConcurrentRegistrationHasOneWinner) {
    for (int round = 0; round < 20; ++round) {
        const std::string id = std::to_string(1000 + round);
        std::atomic<int> wins{0};
        std::vector<std::thread> ts;
        for (int t = 0; t < 8; ++t)
            ts.emplace_back([&, t] {
                if (store_->compare_and_set(id, std::nullopt, record(id, static_cast<std::uint16_t>(t + 1)))) ++wins;
            });
        for (auto& t : ts) t.join();
        EXPECT_EQ(wins, 1) << id;
    }
}

TEST_P(StoreTest, ConcurrentCasCounter) {
    store_->put(record("c", 0));
    std::vector<std::thread> ts;
    for (int t = 0; t < 4; ++t)
        ts.emplace_back([&] {
            for (int i = 0; i < 50;) {
                auto cur = store_->get("c");
                auto next = *cur;
                next.created_at_ms += 1;
                if (store_->compare_and_set("c", cur, next)) ++i;
            }
        });
    for (auto& t : ts) t.join();
    EXPECT_EQ(store_->get("c")->created_at_ms, 1 + 200);
}

INSTANTIATE_TEST_SUITE_P(Kinds, StoreTest, ::testing::Values(StoreKind::Memory, StoreKind::File),
                         [](const auto& info) { return info.param == StoreKind::Memory ? "Memory" : "File"; });

TEST(FileStore, SharedBetweenHandles) {
    const auto dir = temp_dir("avatar-shared");
    FileStore a(dir), b(dir);
    register_room(a, record("55", 4242));
    EXPECT_EQ(lookup_room(b, "55").port, 4242);
    EXPECT_TRUE(b.remove("55"));
    EXPECT_FALSE(a.get("55"));
    std::filesystem::remove_all(dir);
}

TEST(FileStore, RejectsUnsafeKeys) {
    const auto dir = temp_dir("avatar-keys");
    FileStore s(dir);
    EXPECT_FALSE(s.get("../etc"));
    EXPECT_THROW(s.compare_and_set("a/b", std::nullopt, record("a/b")), Error);
    std::filesystem::remove_all(dir);
}

TEST(FileStore, UnusablePath) {
    try {
        FileStore s("/proc/avatar-no-such-dir");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::StoreUnavailable);
    }
}

TEST(FileStore, CorruptRecord) {
    const auto dir = temp_dir("avatar-corrupt");
    FileStore s(dir);
    std::ofstream(dir / "9.json") << "{not json";
    EXPECT_THROW(s.get("9"), Error);
    std::filesystem::remove_all(dir);
}

TEST(RecordJson, RoundTrip) {
    const auto r = record("123", 777);
    EXPECT_EQ(record_from_json(to_json(r)), r);
    EXPECT_THROW(record_from_json("[]"), Error);
}

TEST(StoreRegistry, TracksRoomLifecycle) {
    auto store = std::make_shared<InMemoryStore>();
    StoreRegistry reg(store, {"127.0.0.1", 5000}, "instance-a");
    EXPECT_TRUE(reg.try_register("1"));
    EXPECT_FALSE(reg.try_register("1"));
    EXPECT_EQ(store->get("1")->instance_id, "instance-a");
    reg.update("1", signaling::RoomState::Established);
    EXPECT_EQ(store->get("1")->state, "Established");
    reg.unregister("1");
    EXPECT_FALSE(store->get("1"));
}

// ---------------------------------------------------------------------------------------
// Instances and clusters

TEST(Instance, HealthzAndNotFound) {
    Instance inst({.instance_id = "solo"}, std::make_shared<InMemoryStore>());
    inst.start();
    const auto doc = http_get(inst.address(), "/healthz");
    EXPECT_EQ(doc["instance"], "solo");
    EXPECT_EQ(doc["rooms"], 0);
    int status = 0;
    http_get(inst.address(), "/nope", &status);
    EXPECT_EQ(status, 404);

    auto owner = sim::SignalClient::connect(inst.address());
    EXPECT_EQ(owner.instance_id(), "solo");
    owner.send(SignalMessage::make(MessageType::CreateRoom));
    expect(owner, MessageType::RoomCreated);
    EXPECT_EQ(http_get(inst.address(), "/healthz")["rooms"], 1);
}

TEST(Instance, PortInUse) {
    Instance a({.instance_id = "a"}, std::make_shared<InMemoryStore>());
    a.start();
    Instance b({.instance_id = "b", .port = a.address().port}, std::make_shared<InMemoryStore>());
    try {
        b.start();
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::PortUnavailable);
    }
}

TEST(Instance, MalformedDocumentGetsErrorCode) {
    Instance inst({}, std::make_shared<InMemoryStore>());
    inst.start();
    auto c = sim::SignalClient::connect(inst.address());
    c.send(SignalMessage::make(MessageType::JoinRoom));
    EXPECT_EQ(expect(c, MessageType::Error).code(), WireCode::Malformed);
}

TEST(Instance, StopDropsClients) {
    Instance inst({}, std::make_shared<InMemoryStore>());
    inst.start();
    auto c = sim::SignalClient::connect(inst.address());
    c.send(SignalMessage::make(MessageType::CreateRoom));
    expect(c, MessageType::RoomCreated);
    inst.stop();
    EXPECT_FALSE(inst.running());
    try {
        c.receive(2s);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::PeerGone);
    }
}

class ClusterSize : public ::testing::TestWithParam<std::size_t> {};

TEST_P(ClusterSize, BootsDistinctInstances) {
    auto cl = spawn_cluster(options(GetParam()));
    ASSERT_EQ(cl->size(), GetParam());
    std::set<std::uint16_t> ports;
    for (std::size_t i = 0; i < cl->size(); ++i) {
        ports.insert(cl->instance(i).address().port);
        EXPECT_EQ(http_get(cl->instance(i).address(), "/healthz")["instance"], "instance-" + std::to_string(i));
    }
    EXPECT_EQ(ports.size(), GetParam());
    // The dispatcher rotates across instances.
    std::set<std::string> seen;
    for (std::size_t i = 0; i < cl->size(); ++i) seen.insert(http_get(cl->dispatcher_address(), "/healthz")["instance"].get<std::string>());
    EXPECT_EQ(seen.size(), GetParam());
}

INSTANTIATE_TEST_SUITE_P(N, ClusterSize, ::testing::Values(1, 2, 3));

TEST(Cluster, BadStorePath) {
    ClusterOptions o = options(2);
    o.store = StoreKind::File;
    o.store_path = "/proc/avatar-no-such-dir";
    try {
        spawn_cluster(o);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::StoreUnavailable);
    }
}

TEST(Cluster, DispatcherSkipsDeadBackend) {
    auto cl = spawn_cluster(options(2));
    cl->kill(0);
    for (int i = 0; i < 4; ++i) EXPECT_EQ(http_get(cl->dispatcher_address(), "/healthz")["instance"], "instance-1");
}

struct SplitRoom {
    std::unique_ptr<ClusterHandle> cl;
    std::optional<sim::SignalClient> owner;
    std::optional<sim::SignalClient> guest;
    std::string room;
};

SplitRoom split_room(StoreKind kind = StoreKind::Memory, std::filesystem::path path = {}) {
    SplitRoom s;
    auto o = options(2);
    o.store = kind;
    o.store_path = std::move(path);
    s.cl = spawn_cluster(o);
    s.owner.emplace(sim::SignalClient::connect(s.cl->instance(0).address()));
    s.guest.emplace(sim::SignalClient::connect(s.cl->instance(1).address()));
    s.owner->send(SignalMessage::make(MessageType::CreateRoom));
    s.room = *expect(*s.owner, MessageType::RoomCreated).room;
    s.guest->send(SignalMessage::make(MessageType::JoinRoom, s.room));
    const auto joined = expect(*s.guest, MessageType::PeerJoined);
    EXPECT_EQ(joined.body["instance"], "instance-0");
    expect(*s.owner, MessageType::PeerJoined);
    return s;
}

TEST(Proxy, RelaysBlobsByteIdentical) {
    auto s = split_room();
    std::mt19937_64 rng(11);
    const MessageType types[] = {MessageType::Offer, MessageType::Answer, MessageType::IceCandidate};
    for (int i = 0; i < 200; ++i) {
        std::string bytes(rng() % 2000, '\0');
        for (auto& c : bytes) c = static_cast<char>(rng());
        auto& from = i % 2 ? *s.owner : *s.guest;
        auto& to = i % 2 ? *s.guest : *s.owner;
        from.send(SignalMessage::blob(types[i % 3], bytes, s.room));
        const auto got = to.receive(5s);
        ASSERT_EQ(got.type, types[i % 3]);
        ASSERT_EQ(got.room, s.room);
        ASSERT_EQ(got.blob_bytes(), bytes);
    }
}

TEST(Proxy, InterleavedOrderAcrossInstances) {
    auto s = split_room();
    constexpr int kN = 300;
    std::thread a([&] {
        for (int i = 0; i < kN; ++i)
            s.owner->send(SignalMessage::blob(MessageType::IceCandidate, "o" + std::to_string(i), s.room));
    });
    for (int i = 0; i < kN; ++i)
        s.guest->send(SignalMessage::blob(MessageType::IceCandidate, "g" + std::to_string(i), s.room));
    a.join();
    for (int i = 0; i < kN; ++i) ASSERT_EQ(s.guest->receive(5s).blob_bytes(), "o" + std::to_string(i));
    for (int i = 0; i < kN; ++i) ASSERT_EQ(s.owner->receive(5s).blob_bytes(), "g" + std::to_string(i));
}

TEST(Proxy, ErrorsReachRemoteGuest) {
    auto s = split_room();
    s.guest->send(SignalMessage::make(MessageType::CreateRoom));
    EXPECT_EQ(expect(*s.guest, MessageType::Error).code(), WireCode::IllegalState);
    auto third = sim::SignalClient::connect(s.cl->instance(1).address());
    third.send(SignalMessage::make(MessageType::JoinRoom, s.room));
    EXPECT_EQ(expect(third, MessageType::Error).code(), WireCode::RoomFull);
}

TEST(Proxy, OwnerLeavingNotifiesRemoteGuest) {
    auto s = split_room();
    s.owner->send(SignalMessage::make(MessageType::HangUp, s.room));
    EXPECT_EQ(expect(*s.guest, MessageType::Error).code(), WireCode::PeerGone);
    EXPECT_TRUE(eventually([&] { return s.cl->store().keys().empty(); }));
    EXPECT_TRUE(eventually([&] { return s.cl->instance(1).open_proxy_links() == 0; }));
}

TEST(Proxy, GuestLeavingBeforeEstablishClosesRoom) {
    auto s = split_room();
    s.guest->close();
    EXPECT_EQ(expect(*s.owner, MessageType::Error).code(), WireCode::PeerGone);
    EXPECT_TRUE(eventually([&] { return s.cl->live_rooms() == 0; }));
}

TEST(Proxy, HangUpAfterEstablishTearsDown) {
    auto s = split_room();
    s.guest->send(SignalMessage::make(MessageType::HangUp, s.room, {{"established", true}}));
    s.guest->close();
    EXPECT_TRUE(eventually([&] { return s.cl->instance(0).service().state(s.room) == signaling::RoomState::Established; }));
    s.owner->send(SignalMessage::make(MessageType::HangUp, s.room, {{"established", true}}));
    s.owner->close();
    EXPECT_TRUE(eventually([&] { return s.cl->live_rooms() == 0; }));
    EXPECT_TRUE(eventually([&] { return s.cl->store().keys().empty(); }));
    EXPECT_TRUE(eventually([&] { return s.cl->instance(1).open_proxy_links() == 0; }));
}

TEST(Proxy, RemoteInstanceDeathReachesGuest) {
    auto s = split_room();
    s.cl->kill(0);
    EXPECT_EQ(expect(*s.guest, MessageType::Error).code(), WireCode::PeerGone);
}

TEST(Proxy, UnreachableOwnerInstance) {
    auto cl = spawn_cluster(options(2));
    auto owner = sim::SignalClient::connect(cl->instance(0).address());
    owner.send(SignalMessage::make(MessageType::CreateRoom));
    const auto room = *expect(owner, MessageType::RoomCreated).room;
    cl->kill(0);
    ASSERT_TRUE(cl->store().get(room));
    auto guest = sim::SignalClient::connect(cl->instance(1).address());
    guest.send(SignalMessage::make(MessageType::JoinRoom, room));
    EXPECT_EQ(expect(guest, MessageType::Error).code(), WireCode::PeerGone);
}

TEST(Proxy, UnknownRoomAcrossCluster) {
    auto cl = spawn_cluster(options(3));
    auto guest = sim::SignalClient::connect(cl->instance(2).address());
    guest.send(SignalMessage::make(MessageType::JoinRoom, "424242"));
    EXPECT_EQ(expect(guest, MessageType::Error).code(), WireCode::RoomNotFound);
}

TEST(Proxy, FileStoreBackedCluster) {
    const auto dir = temp_dir("avatar-cluster");
    {
        auto s = split_room(StoreKind::File, dir);
        s.owner->send(SignalMessage::blob(MessageType::Offer, "offer", s.room));
        EXPECT_EQ(s.guest->receive(5s).blob_bytes(), "offer");
        EXPECT_TRUE(std::filesystem::exists(dir / (s.room + ".json")));
    }
    std::filesystem::remove_all(dir);
}

TEST(Proxy, ManyConcurrentSplitRooms) {
    auto cl = spawn_cluster(options(3));
    constexpr int kRooms = 24;
    std::atomic<int> ok{0};
    std::vector<std::thread> ts;
    for (int r = 0; r < kRooms; ++r)
        ts.emplace_back([&, r] {
            try {
                auto owner = sim::SignalClient::connect(cl->instance(r % 3).address());
                auto guest = sim::SignalClient::connect(cl->instance((r + 1) % 3).address());
                owner.send(SignalMessage::make(MessageType::CreateRoom));
                const auto room = *owner.receive(5s).room;
                guest.send(SignalMessage::make(MessageType::JoinRoom, room));
                if (guest.receive(5s).type != MessageType::PeerJoined) return;
                owner.receive(5s);
                const std::string tag = "room" + std::to_string(r);
                for (int i = 0; i < 20; ++i) owner.send(SignalMessage::blob(MessageType::IceCandidate, tag, room));
                for (int i = 0; i < 20; ++i)
                    if (guest.receive(5s).blob_bytes() != tag) return;
                ++ok;
            } catch (const Error&) {
            }
        });
    for (auto& t : ts) t.join();
    EXPECT_EQ(ok, kRooms);
}
