#include "examforge/backend/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include <spdlog/spdlog.h>

#include "examforge/expr/errors.hpp"
#include "examforge/expr/evaluator.hpp"
#include "examforge/expr/parser.hpp"

namespace examforge::backend {

namespace fs = std::filesystem;

struct BackendCore::Workspace {
    std::mutex mutex;
    expr::Bindings bindings;
    expr::RandomStream rng;
    fs::path dir;
    std::size_t plots = 0;
    bool closed = false;
};

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Splits `name := expr`. Returns false when the code is a bare expression.
bool split_assignment(std::string_view code, std::string& name, std::string_view& rhs) {
    std::size_t i = 0;
    while (i < code.size() && std::isspace(static_cast<unsigned char>(code[i]))) ++i;
    if (i == code.size() || !ident_start(code[i])) return false;
    const std::size_t start = i;
    while (i < code.size() && ident_char(code[i])) ++i;
    const std::size_t end = i;
    while (i < code.size() && std::isspace(static_cast<unsigned char>(code[i]))) ++i;
    if (code.substr(i, 2) != ":=") return false;
    name = std::string(code.substr(start, end - start));
    rhs = code.substr(i + 2);
    return true;
}

class WorkspaceCalls : public expr::CallExtension {
public:
    WorkspaceCalls(expr::RandomStream& rng, const fs::path& dir, std::size_t& plots)
        : rng_(rng), dir_(dir), plots_(plots) {}

    std::optional<expr::Value> call(const expr::Expression& call, const expr::Evaluator& ev) const override {
        const auto& args = call.children();
        if (call.name() == "set_seed") {
            std::uint64_t seed = 0;
            if (args.size() == 1) {
                const std::int64_t n = ev.evaluate(args[0]).as_integer();
                if (n < 0) throw expr::EvalError(expr::EvalErrorKind::Domain, "seed must be non-negative");
                seed = static_cast<std::uint64_t>(n);
            } else {
                const std::int64_t hi = ev.evaluate(args[0]).as_integer();
                const std::int64_t lo = ev.evaluate(args[1]).as_integer();
                if (hi < 0 || lo < 0 || hi > 0xffffffffLL || lo > 0xffffffffLL) {
                    throw expr::EvalError(expr::EvalErrorKind::Domain, "seed halves must be in [0, 2^32)");
                }
                seed = (static_cast<std::uint64_t>(hi) << 32) | static_cast<std::uint64_t>(lo);
            }
            rng_.reseed(seed);
            return expr::Value(true);
        }
        if (call.name() == "plot_histogram") {
            const expr::Value data = ev.evaluate(args[0]);
            expr::Vector v = data.is_vector() ? data.as_vector() : expr::Vector{data.as_double()};
            std::size_t bins = 0;
            if (args.size() == 2) {
                const std::int64_t b = ev.evaluate(args[1]).as_integer();
                if (b < 1 || b > 500) throw expr::EvalError(expr::EvalErrorKind::Domain, "bins must be in [1, 500]");
                bins = static_cast<std::size_t>(b);
            }
            expr::Image img{"image/svg+xml", histogram_svg(v, bins)};
            const fs::path file = dir_ / ("plot-" + std::to_string(++plots_) + ".svg");
            std::ofstream out(file, std::ios::binary);
            out << img.bytes;
            if (!out) throw expr::EvalError(expr::EvalErrorKind::Domain, "cannot write plot to scratch directory");
            return expr::Value(std::move(img));
        }
        return std::nullopt;
    }

private:
    expr::RandomStream& rng_;
    const fs::path& dir_;
    std::size_t& plots_;
};

ErrorReply error_from(const expr::EvalError& e) {
    return {e.kind() == expr::EvalErrorKind::Unbound ? ErrorKind::Unbound : ErrorKind::Domain, e.what()};
}

}  // namespace

BackendCore::BackendCore(CoreOptions options) : options_(std::move(options)) {
    if (options_.scratch_root.empty()) options_.scratch_root = fs::temp_directory_path() / "examforge-scratch";
    fs::create_directories(options_.scratch_root);
}

BackendCore::~BackendCore() {
    std::lock_guard lock(mutex_);
    for (auto& [id, ws] : workspaces_) {
        std::error_code ec;
        fs::remove_all(ws->dir, ec);
    }
}

std::string BackendCore::handle_line(std::string_view line, Connection& connection) {
    Reply reply;
    try {
        reply = handle(decode_request(line), connection);
    } catch (const FrameError& e) {
        reply = ErrorReply{ErrorKind::Malformed, e.what()};
    }
    try {
        return encode_reply(reply);
    } catch (const FrameError& e) {
        return encode_reply(ErrorReply{ErrorKind::Domain, e.what()});
    }
}

Reply BackendCore::handle(const Request& request, Connection& connection) {
    switch (request.op) {
        case RequestOp::Open: return open(connection);
        case RequestOp::Eval: return eval(request.ws, request.code);
        case RequestOp::Close: return close(request.ws, &connection);
    }
    return ErrorReply{ErrorKind::Malformed, "unknown op"};
}

Reply BackendCore::open(Connection& connection) {
    auto ws = std::make_shared<Workspace>();
    std::string id;
    {
        std::lock_guard lock(mutex_);
        const std::uint64_t n = ++next_id_;
        id = "w" + std::to_string(n);
        ws->rng.reseed(options_.fixed_seed ? expr::mix_seed(*options_.fixed_seed, n)
                                           : (static_cast<std::uint64_t>(std::random_device{}()) << 32) ^
                                                 std::random_device{}());
        ws->dir = options_.scratch_root / id;
        std::error_code ec;
        fs::create_directories(ws->dir, ec);
        if (ec) return ErrorReply{ErrorKind::Domain, "cannot create scratch directory"};
        workspaces_.emplace(id, ws);
    }
    {
        std::lock_guard lock(connection.mutex_);
        connection.owned_.insert(id);
    }
    spdlog::debug("workspace {} opened", id);
    return WorkspaceReply{id};
}

std::shared_ptr<BackendCore::Workspace> BackendCore::find(std::string_view ws) const {
    std::lock_guard lock(mutex_);
    auto it = workspaces_.find(ws);
    return it == workspaces_.end() ? nullptr : it->second;
}

Reply BackendCore::eval(const std::string& id, const std::string& code) {
    auto ws = find(id);
    if (!ws) return ErrorReply{ErrorKind::NoSuchWorkspace, "no such workspace '" + id + "'"};
    std::lock_guard lock(ws->mutex);
    if (ws->closed) return ErrorReply{ErrorKind::NoSuchWorkspace, "no such workspace '" + id + "'"};

    std::string target;
    std::string_view text = code;
    const bool assign = split_assignment(code, target, text);
    try {
        const expr::Expression e = expr::parse(text);
        WorkspaceCalls calls(ws->rng, ws->dir, ws->plots);
        expr::Value v = expr::Evaluator(ws->bindings, &ws->rng, &calls).evaluate(e);
        if (assign) ws->bindings.set(target, v);
        return ValueReply{std::move(v)};
    } catch (const expr::ParseError& e) {
        const std::size_t offset = assign ? static_cast<std::size_t>(text.data() - code.data()) : 0;
        return ErrorReply{ErrorKind::Parse, e.detail() + " at offset " + std::to_string(e.position() + offset)};
    } catch (const expr::EvalError& e) {
        return error_from(e);
    } catch (const std::exception& e) {
        return ErrorReply{ErrorKind::Domain, e.what()};
    }
}

Reply BackendCore::close(const std::string& id, Connection* connection) {
    std::shared_ptr<Workspace> ws;
    {
        std::lock_guard lock(mutex_);
        auto it = workspaces_.find(id);
        if (it == workspaces_.end()) return ErrorReply{ErrorKind::NoSuchWorkspace, "no such workspace '" + id + "'"};
        ws = std::move(it->second);
        workspaces_.erase(it);
    }
    if (connection) {
        std::lock_guard lock(connection->mutex_);
        connection->owned_.erase(id);
    }
    std::lock_guard lock(ws->mutex);
    ws->closed = true;
    ws->bindings = {};
    std::error_code ec;
    fs::remove_all(ws->dir, ec);
    if (ec) spdlog::warn("workspace {}: scratch removal failed: {}", id, ec.message());
    spdlog::debug("workspace {} closed", id);
    return WorkspaceReply{id};
}

void BackendCore::drop(Connection& connection) {
    std::set<std::string> owned;
    {
        std::lock_guard lock(connection.mutex_);
        owned.swap(connection.owned_);
    }
    for (const auto& id : owned) close(id, nullptr);
}

std::optional<fs::path> BackendCore::scratch_path(std::string_view ws) const {
    auto w = find(ws);
    if (!w) return std::nullopt;
    return w->dir;
}

std::size_t BackendCore::workspace_count() const {
    std::lock_guard lock(mutex_);
    return workspaces_.size();
}

std::string histogram_svg(const expr::Vector& data, std::size_t bins) {
    if (data.empty()) throw expr::EvalError(expr::EvalErrorKind::Domain, "histogram of empty data");
    if (bins == 0) bins = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(data.size())))) + 1;
    auto [lo_it, hi_it] = std::minmax_element(data.begin(), data.end());
    double lo = *lo_it, hi = *hi_it;
    if (hi - lo <= 0.0) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double width = (hi - lo) / static_cast<double>(bins);
    std::vector<std::size_t> counts(bins, 0);
    for (double x : data) {
        auto b = static_cast<std::size_t>((x - lo) / width);
        counts[std::min(b, bins - 1)]++;
    }
    const std::size_t peak = *std::max_element(counts.begin(), counts.end());

    constexpr double W = 400, H = 300, margin = 30;
    const double bar_w = (W - 2 * margin) / static_cast<double>(bins);
    std::string svg;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" viewBox=\"0 0 %d %d\">\n",
                  int(W), int(H), int(W), int(H));
    svg += buf;
    std::snprintf(buf, sizeof buf, "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", margin,
                  H - margin, W - margin, H - margin);
    svg += buf;
    for (std::size_t i = 0; i < bins; ++i) {
        const double h = (H - 2 * margin) * static_cast<double>(counts[i]) / static_cast<double>(peak);
        std::snprintf(buf, sizeof buf,
                      "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"steelblue\" "
                      "stroke=\"white\"/>\n",
                      margin + bar_w * static_cast<double>(i), H - margin - h, bar_w, h);
        svg += buf;
    }
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%g\" y=\"%g\" font-size=\"10\">%.4g</text>\n"
                  "<text x=\"%g\" y=\"%g\" font-size=\"10\" text-anchor=\"end\">%.4g</text>\n",
                  margin, H - margin + 14, lo, W - margin, H - margin + 14, hi);
    svg += buf;
    svg += "</svg>\n";
    return svg;
}

}  // namespace examforge::backend
