#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "examforge/backend/transport.hpp"

namespace examforge::backend {

/// Error reply from the backend.
class BackendError : public std::runtime_error {
public:
    BackendError(ErrorKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class CapacityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Clock = std::function<std::chrono::steady_clock::time_point()>;

/// One workspace on its own connection. Requests are serialized.
class WorkspaceConnection {
public:
    enum class State { Open, Closed };

    /// Connects and opens a fresh workspace.
    static std::shared_ptr<WorkspaceConnection> open(Connector& connector, Clock clock = {});

    ~WorkspaceConnection();

    /// Throws BackendError (including no-such-workspace once closed) or
    /// TransportError, after which the connection is unusable.
    expr::Value eval(std::string_view code);

    /// Idempotent. An eval in flight on another thread is aborted and its
    /// reply discarded.
    void close() noexcept;

    std::uint64_t connection_id() const { return id_; }
    const std::string& workspace_id() const { return ws_; }
    const std::string& remote_address() const { return remote_; }
    State state() const;
    bool is_open() const { return state() == State::Open; }
    std::optional<std::filesystem::path> scratch_dir() const;
    std::chrono::steady_clock::time_point last_used() const;

private:
    WorkspaceConnection() = default;

    Reply roundtrip(const Request& request);

    std::uint64_t id_ = 0;
    std::string ws_;
    std::string remote_;
    Connector* connector_ = nullptr;
    Clock clock_;
    std::unique_ptr<Channel> channel_;
    mutable std::mutex io_mutex_;
    mutable std::mutex state_mutex_;
    State state_ = State::Open;
    std::chrono::steady_clock::time_point last_used_;
};

struct PoolOptions {
    std::size_t capacity = 256;
    std::chrono::steady_clock::duration idle_timeout = std::chrono::minutes(30);
    Clock clock;
};

/// Live connections keyed by (session, exercise).
class BackendPool {
public:
    using Key = std::pair<std::string, std::string>;

    explicit BackendPool(std::shared_ptr<Connector> connector, PoolOptions options = {});
    ~BackendPool();

    /// Existing open connection for the key, or a new workspace. Idle
    /// connections are evicted first; throws CapacityError when still full.
    std::shared_ptr<WorkspaceConnection> open(const std::string& session, const std::string& exercise);

    void close(const std::string& session, const std::string& exercise);

    /// Close and evict connections idle past the timeout.
    std::size_t evict_idle();

    std::size_t size() const;
    Connector& connector() { return *connector_; }

private:
    std::size_t evict_idle_locked();

    std::shared_ptr<Connector> connector_;
    PoolOptions options_;
    mutable std::mutex mutex_;
    std::map<Key, std::shared_ptr<WorkspaceConnection>> live_;
};

}  // namespace examforge::backend
