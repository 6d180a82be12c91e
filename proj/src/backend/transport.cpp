#include "examforge/backend/transport.hpp"

#include <cerrno>
#include <charconv>
#include <cstring>
#include <deque>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <spdlog/spdlog.h>

namespace examforge::backend {

namespace {

class LoopbackChannel : public Channel {
public:
    explicit LoopbackChannel(BackendCore& core) : core_(core) {}
    ~LoopbackChannel() override { core_.drop(connection_); }

    void send(std::string_view line) override {
        if (aborted_) throw TransportError("connection aborted");
        std::string reply = core_.handle_line(line, connection_);
        std::lock_guard lock(mutex_);
        pending_.push_back(std::move(reply));
    }

    std::string receive() override {
        std::lock_guard lock(mutex_);
        if (aborted_ || pending_.empty()) throw TransportError("connection closed");
        std::string line = std::move(pending_.front());
        pending_.pop_front();
        return line;
    }

    void abort() noexcept override {
        aborted_ = true;
        core_.drop(connection_);
    }

private:
    BackendCore& core_;
    BackendCore::Connection connection_;
    std::mutex mutex_;
    std::deque<std::string> pending_;
    std::atomic<bool> aborted_{false};
};

void write_all(int fd, std::string_view data) {
    while (!data.empty()) {
        const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw TransportError(std::string("send failed: ") + std::strerror(errno));
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

// Buffered line reader over a socket.
class LineReader {
public:
    explicit LineReader(int fd) : fd_(fd) {}

    /// false on EOF. Lines longer than `limit` throw TransportError.
    bool next(std::string& line, std::size_t limit) {
        for (;;) {
            if (auto nl = buffer_.find('\n', scanned_); nl != std::string::npos) {
                line.assign(buffer_, 0, nl + 1);
                buffer_.erase(0, nl + 1);
                scanned_ = 0;
                return true;
            }
            scanned_ = buffer_.size();
            if (buffer_.size() > limit) throw TransportError("line too long");
            char chunk[65536];
            const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
            if (n < 0) {
                if (errno == EINTR) continue;
                return false;
            }
            if (n == 0) return false;
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

private:
    int fd_;
    std::string buffer_;
    std::size_t scanned_ = 0;
};

class TcpChannel : public Channel {
public:
    explicit TcpChannel(int fd) : fd_(fd), reader_(fd) {}
    ~TcpChannel() override { ::close(fd_); }

    void send(std::string_view line) override {
        if (aborted_) throw TransportError("connection aborted");
        write_all(fd_, line);
    }

    std::string receive() override {
        std::string line;
        if (aborted_ || !reader_.next(line, TcpServer::kMaxLine)) throw TransportError("connection closed by backend");
        return line;
    }

    void abort() noexcept override {
        aborted_ = true;
        ::shutdown(fd_, SHUT_RDWR);
    }

private:
    int fd_;
    LineReader reader_;
    std::atomic<bool> aborted_{false};
};

struct AddrInfo {
    addrinfo* list = nullptr;
    ~AddrInfo() {
        if (list) freeaddrinfo(list);
    }
};

AddrInfo resolve(const Address& a, bool passive) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    if (passive) hints.ai_flags = AI_PASSIVE;
    AddrInfo out;
    const std::string port = std::to_string(a.port);
    const int rc = getaddrinfo(a.host.empty() ? nullptr : a.host.c_str(), port.c_str(), &hints, &out.list);
    if (rc != 0) throw TransportError("cannot resolve '" + a.host + "': " + gai_strerror(rc));
    return out;
}

}  // namespace

std::unique_ptr<Channel> LoopbackConnector::connect() { return std::make_unique<LoopbackChannel>(core_); }

Address parse_address(std::string_view text) {
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos) throw std::invalid_argument("address must be host:port");
    Address a;
    a.host = std::string(text.substr(0, colon));
    if (a.host.size() >= 2 && a.host.front() == '[' && a.host.back() == ']') a.host = a.host.substr(1, a.host.size() - 2);
    const auto port = text.substr(colon + 1);
    unsigned value = 0;
    auto [p, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
    if (ec != std::errc() || p != port.data() + port.size() || port.empty() || value > 65535) {
        throw std::invalid_argument("bad port in '" + std::string(text) + "'");
    }
    a.port = static_cast<std::uint16_t>(value);
    return a;
}

std::unique_ptr<Channel> TcpConnector::connect() {
    AddrInfo info = resolve(address_, false);
    std::string last_error = "no addresses";
    for (addrinfo* ai = info.list; ai; ai = ai->ai_next) {
        const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
            int one = 1;
            setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            return std::make_unique<TcpChannel>(fd);
        }
        last_error = std::strerror(errno);
        ::close(fd);
    }
    throw TransportError("backend unreachable at " + address() + ": " + last_error);
}

TcpServer::TcpServer(BackendCore& core, const Address& listen) : core_(core) {
    AddrInfo info = resolve(listen, true);
    std::string last_error = "no addresses";
    for (addrinfo* ai = info.list; ai; ai = ai->ai_next) {
        const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0) continue;
        int one = 1;
        setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 128) == 0) {
            listen_fd_ = fd;
            break;
        }
        last_error = std::strerror(errno);
        ::close(fd);
    }
    if (listen_fd_ < 0) throw TransportError("cannot listen on " + listen.host + ":" + std::to_string(listen.port) + ": " + last_error);
    sockaddr_storage addr{};
    socklen_t len = sizeof addr;
    getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.ss_family == AF_INET6 ? reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port
                                             : reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
}

TcpServer::~TcpServer() {
    stop();
    if (listen_fd_ >= 0) ::close(listen_fd_);
}

void TcpServer::start() {
    runner_ = std::thread([this] { run(); });
}

void TcpServer::run() {
    while (!stopping_) {
        pollfd p{listen_fd_, POLLIN, 0};
        const int rc = ::poll(&p, 1, 200);
        if (rc <= 0) {
            reap(false);
            continue;
        }
        const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
        if (fd < 0) continue;
        int one = 1;
        setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        std::lock_guard lock(clients_mutex_);
        if (stopping_) {
            ::close(fd);
            break;
        }
        Client& c = clients_.emplace_back();
        c.fd = fd;
        c.thread = std::thread([this, &c] { serve(c); });
    }
}

void TcpServer::serve(Client& client) {
    BackendCore::Connection connection;
    LineReader reader(client.fd);
    std::string line;
    try {
        while (reader.next(line, kMaxLine)) {
            write_all(client.fd, core_.handle_line(line, connection));
        }
    } catch (const TransportError& e) {
        try {
            write_all(client.fd, encode_reply(ErrorReply{ErrorKind::Malformed, e.what()}));
        } catch (const TransportError&) {
        }
        spdlog::info("backend connection dropped: {}", e.what());
    }
    core_.drop(connection);
    ::shutdown(client.fd, SHUT_RDWR);
    client.done = true;
}

void TcpServer::reap(bool all) {
    std::lock_guard lock(clients_mutex_);
    for (auto it = clients_.begin(); it != clients_.end();) {
        if (all) ::shutdown(it->fd, SHUT_RDWR);
        if (all || it->done) {
            if (it->thread.joinable()) it->thread.join();
            ::close(it->fd);
            it = clients_.erase(it);
        } else {
            ++it;
        }
    }
}

void TcpServer::stop() {
    if (stopping_.exchange(true)) return;
    if (runner_.joinable()) runner_.join();
    reap(true);
}

}  // namespace examforge::backend
