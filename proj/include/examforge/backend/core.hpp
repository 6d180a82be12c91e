#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "examforge/backend/frame.hpp"

namespace examforge::backend {

struct CoreOptions {
    std::filesystem::path scratch_root;
    /// Workspace n draws from mix_seed(seed, n). Without it every workspace
    /// is seeded from std::random_device.
    std::optional<std::uint64_t> fixed_seed;
};

/// The reference evaluation backend, transport independent. Workspaces hold
/// a binding environment, a random stream and a scratch directory under
/// `scratch_root/<ws>/`. Besides the expression language, eval accepts
/// `name := expr` and the workspace builtins
///
///   plot_histogram(v [, bins])  -> image/svg+xml, also written to scratch
///   set_seed(n) | set_seed(hi, lo) with seed = hi * 2^32 + lo
class BackendCore {
public:
    /// Per-connection bookkeeping: workspaces opened through a connection
    /// are closed when it drops.
    class Connection {
    public:
        Connection() = default;
        Connection(const Connection&) = delete;
        Connection& operator=(const Connection&) = delete;

    private:
        friend class BackendCore;
        std::mutex mutex_;
        std::set<std::string> owned_;
    };

    explicit BackendCore(CoreOptions options);
    ~BackendCore();

    BackendCore(const BackendCore&) = delete;
    BackendCore& operator=(const BackendCore&) = delete;

    /// Decode one request line and return the encoded reply. Never throws
    /// for bad input: malformed lines get a `malformed` error reply.
    std::string handle_line(std::string_view line, Connection& connection);

    Reply handle(const Request& request, Connection& connection);

    /// Close every workspace the connection opened.
    void drop(Connection& connection);

    std::optional<std::filesystem::path> scratch_path(std::string_view ws) const;
    std::size_t workspace_count() const;

private:
    struct Workspace;

    Reply open(Connection& connection);
    Reply eval(const std::string& ws, const std::string& code);
    Reply close(const std::string& ws, Connection* connection);
    std::shared_ptr<Workspace> find(std::string_view ws) const;

    CoreOptions options_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Workspace>, std::less<>> workspaces_;
    std::uint64_t next_id_ = 0;
};

/// Histogram of `data` as a standalone SVG document. `bins` = 0 picks
/// Sturges' rule.
std::string histogram_svg(const expr::Vector& data, std::size_t bins = 0);

}  // namespace examforge::backend
