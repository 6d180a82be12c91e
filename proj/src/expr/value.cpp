#include "examforge/expr/value.hpp"

#include <charconv>
#include <cmath>

#include "examforge/expr/errors.hpp"

namespace examforge::expr {

std::string_view to_string(ValueType type) {
    switch (type) {
        case ValueType::Number: return "number";
        case ValueType::Integer: return "integer";
        case ValueType::Boolean: return "boolean";
        case ValueType::String: return "string";
        case ValueType::Vector: return "vector";
        case ValueType::Image: return "image";
    }
    return "?";
}

namespace {

[[noreturn]] void type_error(const Value& v, std::string_view wanted) {
    throw EvalError(EvalErrorKind::Type, "expected " + std::string(wanted) + ", got " +
                                             std::string(to_string(v.type())));
}

}  // namespace

double Value::as_double() const {
    if (auto* d = std::get_if<double>(&storage_)) return *d;
    if (auto* i = std::get_if<std::int64_t>(&storage_)) return static_cast<double>(*i);
    type_error(*this, "number");
}

std::int64_t Value::as_integer() const {
    if (auto* i = std::get_if<std::int64_t>(&storage_)) return *i;
    if (auto* d = std::get_if<double>(&storage_)) {
        if (std::isfinite(*d) && std::trunc(*d) == *d && std::abs(*d) < 0x1.0p63) {
            return static_cast<std::int64_t>(*d);
        }
    }
    type_error(*this, "integer");
}

bool Value::as_boolean() const {
    if (auto* b = std::get_if<bool>(&storage_)) return *b;
    type_error(*this, "boolean");
}

const std::string& Value::as_string() const {
    if (auto* s = std::get_if<std::string>(&storage_)) return *s;
    type_error(*this, "string");
}

const Vector& Value::as_vector() const {
    if (auto* v = std::get_if<Vector>(&storage_)) return *v;
    type_error(*this, "vector");
}

const Image& Value::as_image() const {
    if (auto* v = std::get_if<Image>(&storage_)) return *v;
    type_error(*this, "image");
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

std::string canonical_text(const Value& value) {
    switch (value.type()) {
        case ValueType::Number: return format_double(value.as_double());
        case ValueType::Integer: return std::to_string(value.as_integer());
        case ValueType::Boolean: return value.as_boolean() ? "true" : "false";
        case ValueType::String: return value.as_string();
        case ValueType::Vector: {
            std::string out = "c(";
            const auto& v = value.as_vector();
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (i) out += ", ";
                out += format_double(v[i]);
            }
            return out + ")";
        }
        case ValueType::Image: return "<image:" + value.as_image().media_type + ">";
    }
    return {};
}

const Value* Bindings::find(std::string_view name) const {
    auto it = map_.find(name);
    return it == map_.end() ? nullptr : &it->second;
}

const Value& Bindings::get(std::string_view name) const {
    if (auto* v = find(name)) return *v;
    throw EvalError(EvalErrorKind::Unbound, "unbound identifier '" + std::string(name) + "'");
}

bool Bindings::erase(std::string_view name) {
    auto it = map_.find(name);
    if (it == map_.end()) return false;
    map_.erase(it);
    return true;
}

}  // namespace examforge::expr
