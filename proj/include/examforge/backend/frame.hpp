#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include "examforge/expr/value.hpp"

namespace examforge::backend {

// One JSON object per line, '\n' terminated.
//
//   {"op":"open"}
//   {"op":"eval","ws":"<id>","code":"<text>"}
//   {"op":"close","ws":"<id>"}
//
//   {"ok":true,"ws":"<id>"}
//   {"ok":true,"type":"number","value":0.5}
//   {"ok":false,"kind":"domain","message":"..."}

enum class RequestOp { Open, Eval, Close };

struct Request {
    RequestOp op = RequestOp::Open;
    std::string ws;    // eval, close
    std::string code;  // eval

    bool operator==(const Request&) const = default;

    static Request open() { return {RequestOp::Open, {}, {}}; }
    static Request eval(std::string ws, std::string code) { return {RequestOp::Eval, std::move(ws), std::move(code)}; }
    static Request close(std::string ws) { return {RequestOp::Close, std::move(ws), {}}; }
};

enum class ErrorKind { Parse, Domain, Unbound, NoSuchWorkspace, Malformed };

std::string_view to_string(ErrorKind kind);

struct WorkspaceReply {
    std::string ws;
    bool operator==(const WorkspaceReply&) const = default;
};

struct ValueReply {
    expr::Value value;
    bool operator==(const ValueReply&) const = default;
};

struct ErrorReply {
    ErrorKind kind = ErrorKind::Malformed;
    std::string message;
    bool operator==(const ErrorReply&) const = default;
};

using Reply = std::variant<WorkspaceReply, ValueReply, ErrorReply>;
using Frame = std::variant<Request, Reply>;

class FrameError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Encoded line including the trailing newline. Throws FrameError for
/// values JSON cannot carry (non-finite numbers, invalid UTF-8).
std::string encode_frame(const Frame& frame);
std::string encode_request(const Request& request);
std::string encode_reply(const Reply& reply);

/// Inverse of encode_frame. The line must end in exactly one '\n'; unknown
/// or missing fields and wrongly typed members throw FrameError.
Frame decode_frame(std::string_view line);
Request decode_request(std::string_view line);
Reply decode_reply(std::string_view line);

std::string base64_encode(std::string_view bytes);
/// Strict: only canonical padded base64 is accepted.
std::string base64_decode(std::string_view text);

}  // namespace examforge::backend
