#include "examforge/backend/frame.hpp"

#include <cmath>
#include <initializer_list>

#include "json.hpp"
#include <sodium.h>

namespace examforge::backend {

using json = nlohmann::ordered_json;

namespace {

void ensure_sodium() {
    static const int rc = sodium_init();
    if (rc < 0) throw std::runtime_error("libsodium initialisation failed");
}

[[noreturn]] void malformed(const std::string& what) { throw FrameError(what); }

constexpr std::pair<ErrorKind, std::string_view> kErrorKinds[] = {
    {ErrorKind::Parse, "parse"},
    {ErrorKind::Domain, "domain"},
    {ErrorKind::Unbound, "unbound"},
    {ErrorKind::NoSuchWorkspace, "no-such-workspace"},
    {ErrorKind::Malformed, "malformed"},
};

ErrorKind error_kind_from(std::string_view text) {
    for (const auto& [kind, name] : kErrorKinds) {
        if (name == text) return kind;
    }
    malformed("unknown error kind '" + std::string(text) + "'");
}

double finite(double v) {
    if (!std::isfinite(v)) throw FrameError("non-finite number cannot be encoded");
    return v;
}

json value_json(const expr::Value& v) {
    json out;
    out["ok"] = true;
    out["type"] = std::string(expr::to_string(v.type()));
    switch (v.type()) {
        case expr::ValueType::Number: out["value"] = finite(v.as_double()); break;
        case expr::ValueType::Integer: out["value"] = v.as_integer(); break;
        case expr::ValueType::Boolean: out["value"] = v.as_boolean(); break;
        case expr::ValueType::String: out["value"] = v.as_string(); break;
        case expr::ValueType::Vector: {
            json arr = json::array();
            for (double x : v.as_vector()) arr.push_back(finite(x));
            out["value"] = std::move(arr);
            break;
        }
        case expr::ValueType::Image: {
            json img;
            img["media"] = v.as_image().media_type;
            img["data"] = base64_encode(v.as_image().bytes);
            out["value"] = std::move(img);
            break;
        }
    }
    return out;
}

std::string dump_line(const json& j) {
    try {
        return j.dump() + '\n';
    } catch (const json::exception& e) {
        throw FrameError(e.what());
    }
}

json parse_line(std::string_view line) {
    if (line.empty() || line.back() != '\n') malformed("frame is not newline terminated");
    line.remove_suffix(1);
    if (line.find('\n') != std::string_view::npos) malformed("embedded newline in frame");
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        malformed(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) malformed("frame is not a JSON object");
    return j;
}

void expect_keys(const json& j, std::initializer_list<std::string_view> keys) {
    for (const auto& [k, _] : j.items()) {
        bool known = false;
        for (auto key : keys) known = known || key == k;
        if (!known) malformed("unexpected member '" + k + "'");
    }
    for (auto key : keys) {
        if (!j.contains(key)) malformed("missing member '" + std::string(key) + "'");
    }
}

const std::string& string_member(const json& j, const char* key) {
    const json& v = j.at(key);
    if (!v.is_string()) malformed(std::string("member '") + key + "' must be a string");
    return v.get_ref<const std::string&>();
}

Request request_from(const json& j) {
    const std::string& op = string_member(j, "op");
    if (op == "open") {
        expect_keys(j, {"op"});
        return Request::open();
    }
    if (op == "eval") {
        expect_keys(j, {"op", "ws", "code"});
        return Request::eval(string_member(j, "ws"), string_member(j, "code"));
    }
    if (op == "close") {
        expect_keys(j, {"op", "ws"});
        return Request::close(string_member(j, "ws"));
    }
    malformed("unknown op '" + op + "'");
}

double number_of(const json& v) {
    if (!v.is_number()) malformed("expected a number");
    return v.get<double>();
}

expr::Value value_from(const std::string& type, const json& v) {
    if (type == "number") return expr::Value(number_of(v));
    if (type == "integer") {
        if (!v.is_number_integer()) malformed("integer value expected");
        if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
            malformed("integer out of range");
        }
        return expr::Value(v.get<std::int64_t>());
    }
    if (type == "boolean") {
        if (!v.is_boolean()) malformed("boolean value expected");
        return expr::Value(v.get<bool>());
    }
    if (type == "string") {
        if (!v.is_string()) malformed("string value expected");
        return expr::Value(v.get<std::string>());
    }
    if (type == "vector") {
        if (!v.is_array()) malformed("vector value must be an array");
        expr::Vector out;
        out.reserve(v.size());
        for (const auto& x : v) out.push_back(number_of(x));
        return expr::Value(std::move(out));
    }
    if (type == "image") {
        if (!v.is_object()) malformed("image value must be an object");
        expect_keys(v, {"media", "data"});
        return expr::Value(expr::Image{string_member(v, "media"), base64_decode(string_member(v, "data"))});
    }
    malformed("unknown value type '" + type + "'");
}

Reply reply_from(const json& j) {
    const json& ok = j.at("ok");
    if (!ok.is_boolean()) malformed("member 'ok' must be a boolean");
    if (!ok.get<bool>()) {
        expect_keys(j, {"ok", "kind", "message"});
        return ErrorReply{error_kind_from(string_member(j, "kind")), string_member(j, "message")};
    }
    if (j.contains("ws")) {
        expect_keys(j, {"ok", "ws"});
        return WorkspaceReply{string_member(j, "ws")};
    }
    expect_keys(j, {"ok", "type", "value"});
    return ValueReply{value_from(string_member(j, "type"), j.at("value"))};
}

}  // namespace

std::string_view to_string(ErrorKind kind) {
    for (const auto& [k, name] : kErrorKinds) {
        if (k == kind) return name;
    }
    return "malformed";
}

std::string encode_request(const Request& r) {
    json j;
    switch (r.op) {
        case RequestOp::Open: j["op"] = "open"; break;
        case RequestOp::Eval:
            j["op"] = "eval";
            j["ws"] = r.ws;
            j["code"] = r.code;
            break;
        case RequestOp::Close:
            j["op"] = "close";
            j["ws"] = r.ws;
            break;
    }
    return dump_line(j);
}

std::string encode_reply(const Reply& reply) {
    json j;
    if (const auto* w = std::get_if<WorkspaceReply>(&reply)) {
        j["ok"] = true;
        j["ws"] = w->ws;
    } else if (const auto* v = std::get_if<ValueReply>(&reply)) {
        j = value_json(v->value);
    } else {
        const auto& e = std::get<ErrorReply>(reply);
        j["ok"] = false;
        j["kind"] = std::string(to_string(e.kind));
        j["message"] = e.message;
    }
    return dump_line(j);
}

std::string encode_frame(const Frame& frame) {
    if (const auto* r = std::get_if<Request>(&frame)) return encode_request(*r);
    return encode_reply(std::get<Reply>(frame));
}

Request decode_request(std::string_view line) {
    json j = parse_line(line);
    if (!j.contains("op")) malformed("missing member 'op'");
    return request_from(j);
}

Reply decode_reply(std::string_view line) {
    json j = parse_line(line);
    if (!j.contains("ok")) malformed("missing member 'ok'");
    return reply_from(j);
}

Frame decode_frame(std::string_view line) {
    json j = parse_line(line);
    if (j.contains("op")) return request_from(j);
    if (j.contains("ok")) return reply_from(j);
    malformed("frame has neither 'op' nor 'ok'");
}

std::string base64_encode(std::string_view bytes) {
    ensure_sodium();
    const std::size_t len = sodium_base64_encoded_len(bytes.size(), sodium_base64_VARIANT_ORIGINAL);
    std::string out(len, '\0');
    sodium_bin2base64(out.data(), len, reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(),
                      sodium_base64_VARIANT_ORIGINAL);
    out.resize(len - 1);  // drop the terminator
    return out;
}

std::string base64_decode(std::string_view text) {
    ensure_sodium();
    std::string out(text.size() / 4 * 3 + 3, '\0');
    std::size_t len = 0;
    const char* end = nullptr;
    if (sodium_base642bin(reinterpret_cast<unsigned char*>(out.data()), out.size(), text.data(), text.size(),
                          nullptr, &len, &end, sodium_base64_VARIANT_ORIGINAL) != 0 ||
        end != text.data() + text.size()) {
        throw FrameError("invalid base64 payload");
    }
    out.resize(len);
    if (base64_encode(out) != text) throw FrameError("non-canonical base64 payload");
    return out;
}

}  // namespace examforge::backend
