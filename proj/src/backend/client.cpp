#include "examforge/backend/client.hpp"

#include <atomic>

#include <spdlog/spdlog.h>

namespace examforge::backend {

namespace {

std::atomic<std::uint64_t> next_connection_id{0};

std::chrono::steady_clock::time_point now(const Clock& clock) {
    return clock ? clock() : std::chrono::steady_clock::now();
}

}  // namespace

std::shared_ptr<WorkspaceConnection> WorkspaceConnection::open(Connector& connector, Clock clock) {
    std::shared_ptr<WorkspaceConnection> c(new WorkspaceConnection());
    c->id_ = ++next_connection_id;
    c->remote_ = connector.address();
    c->connector_ = &connector;
    c->clock_ = std::move(clock);
    c->channel_ = connector.connect();
    c->last_used_ = now(c->clock_);
    Reply r = c->roundtrip(Request::open());
    if (auto* e = std::get_if<ErrorReply>(&r)) throw BackendError(e->kind, e->message);
    auto* w = std::get_if<WorkspaceReply>(&r);
    if (!w) throw TransportError("unexpected reply to open");
    c->ws_ = w->ws;
    return c;
}

WorkspaceConnection::~WorkspaceConnection() { close(); }

Reply WorkspaceConnection::roundtrip(const Request& request) {
    channel_->send(encode_request(request));
    const std::string line = channel_->receive();
    try {
        return decode_reply(line);
    } catch (const FrameError& e) {
        throw TransportError(std::string("undecodable reply: ") + e.what());
    }
}

expr::Value WorkspaceConnection::eval(std::string_view code) {
    std::lock_guard io(io_mutex_);
    {
        std::lock_guard lock(state_mutex_);
        if (state_ == State::Closed) throw BackendError(ErrorKind::NoSuchWorkspace, "workspace closed");
        last_used_ = now(clock_);
    }
    Reply r;
    try {
        r = roundtrip(Request::eval(ws_, std::string(code)));
    } catch (const TransportError&) {
        std::lock_guard lock(state_mutex_);
        if (state_ == State::Closed) throw BackendError(ErrorKind::NoSuchWorkspace, "workspace closed");
        throw;
    }
    if (auto* v = std::get_if<ValueReply>(&r)) return std::move(v->value);
    if (auto* e = std::get_if<ErrorReply>(&r)) throw BackendError(e->kind, e->message);
    throw TransportError("unexpected reply to eval");
}

void WorkspaceConnection::close() noexcept {
    {
        std::lock_guard lock(state_mutex_);
        if (state_ == State::Closed) return;
        state_ = State::Closed;
    }
    if (!channel_) return;
    std::unique_lock io(io_mutex_, std::try_to_lock);
    if (!io.owns_lock()) {
        // Another thread is mid-eval: abort the connection, the server
        // drops the workspace along with it.
        channel_->abort();
        return;
    }
    try {
        roundtrip(Request::close(ws_));
    } catch (const std::exception& e) {
        spdlog::debug("close of workspace {} failed: {}", ws_, e.what());
    }
    channel_->abort();
}

WorkspaceConnection::State WorkspaceConnection::state() const {
    std::lock_guard lock(state_mutex_);
    return state_;
}

std::optional<std::filesystem::path> WorkspaceConnection::scratch_dir() const {
    if (!is_open()) return std::nullopt;
    return connector_->scratch_dir(ws_);
}

std::chrono::steady_clock::time_point WorkspaceConnection::last_used() const {
    std::lock_guard lock(state_mutex_);
    return last_used_;
}

BackendPool::BackendPool(std::shared_ptr<Connector> connector, PoolOptions options)
    : connector_(std::move(connector)), options_(std::move(options)) {}

BackendPool::~BackendPool() {
    std::lock_guard lock(mutex_);
    for (auto& [key, conn] : live_) conn->close();
}

std::shared_ptr<WorkspaceConnection> BackendPool::open(const std::string& session, const std::string& exercise) {
    std::lock_guard lock(mutex_);
    evict_idle_locked();
    const Key key{session, exercise};
    if (auto it = live_.find(key); it != live_.end()) {
        if (it->second->is_open()) return it->second;
        live_.erase(it);
    }
    if (live_.size() >= options_.capacity) {
        throw CapacityError("backend pool full (" + std::to_string(options_.capacity) + " connections)");
    }
    auto conn = WorkspaceConnection::open(*connector_, options_.clock);
    live_.emplace(key, conn);
    return conn;
}

void BackendPool::close(const std::string& session, const std::string& exercise) {
    std::shared_ptr<WorkspaceConnection> conn;
    {
        std::lock_guard lock(mutex_);
        auto it = live_.find({session, exercise});
        if (it == live_.end()) return;
        conn = std::move(it->second);
        live_.erase(it);
    }
    conn->close();
}

std::size_t BackendPool::evict_idle() {
    std::lock_guard lock(mutex_);
    return evict_idle_locked();
}

std::size_t BackendPool::evict_idle_locked() {
    const auto t = now(options_.clock);
    std::size_t n = 0;
    for (auto it = live_.begin(); it != live_.end();) {
        if (!it->second->is_open() || t - it->second->last_used() >= options_.idle_timeout) {
            it->second->close();
            it = live_.erase(it);
            ++n;
        } else {
            ++it;
        }
    }
    return n;
}

std::size_t BackendPool::size() const {
    std::lock_guard lock(mutex_);
    return live_.size();
}

}  // namespace examforge::backend
