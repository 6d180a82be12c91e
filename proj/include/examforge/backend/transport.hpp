#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>

#include "examforge/backend/core.hpp"

namespace examforge::backend {

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A line-oriented duplex connection to a backend.
class Channel {
public:
    virtual ~Channel() = default;
    virtual void send(std::string_view line) = 0;
    /// Next reply line including its '\n'. Throws TransportError on EOF.
    virtual std::string receive() = 0;
    /// Tear the connection down; safe to call from another thread and
    /// unblocks a pending receive.
    virtual void abort() noexcept = 0;
};

class Connector {
public:
    virtual ~Connector() = default;
    virtual std::unique_ptr<Channel> connect() = 0;
    virtual std::string address() const = 0;
    /// Local path of a workspace's scratch directory, when observable.
    virtual std::optional<std::filesystem::path> scratch_dir(const std::string& ws) const { return std::nullopt; }
};

/// In-process connector. Frames still go through encode and decode.
class LoopbackConnector : public Connector {
public:
    explicit LoopbackConnector(BackendCore& core) : core_(core) {}
    std::unique_ptr<Channel> connect() override;
    std::string address() const override { return "loopback"; }
    std::optional<std::filesystem::path> scratch_dir(const std::string& ws) const override {
        return core_.scratch_path(ws);
    }

private:
    BackendCore& core_;
};

struct Address {
    std::string host;
    std::uint16_t port = 0;
};

/// "host:port"; throws std::invalid_argument.
Address parse_address(std::string_view text);

class TcpConnector : public Connector {
public:
    explicit TcpConnector(Address address) : address_(std::move(address)) {}
    std::unique_ptr<Channel> connect() override;
    std::string address() const override { return address_.host + ":" + std::to_string(address_.port); }

private:
    Address address_;
};

/// Thread-per-connection TCP front end for a BackendCore.
class TcpServer {
public:
    /// Binds and listens; throws TransportError on failure. Port 0 picks
    /// an ephemeral port.
    TcpServer(BackendCore& core, const Address& listen);
    ~TcpServer();

    std::uint16_t port() const { return port_; }

    /// Accept loop; returns after stop().
    void run();
    void start();
    void stop();

    static constexpr std::size_t kMaxLine = 16 << 20;

private:
    struct Client {
        int fd = -1;
        std::thread thread;
        std::atomic<bool> done{false};
    };

    void serve(Client& client);
    void reap(bool all);

    BackendCore& core_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> stopping_{false};
    std::thread runner_;
    std::mutex clients_mutex_;
    std::list<Client> clients_;
};

}  // namespace examforge::backend
