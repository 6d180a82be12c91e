#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace examforge::expr {

struct Image {
    std::string media_type;
    std::string bytes;

    bool operator==(const Image&) const = default;
};

using Vector = std::vector<double>;

enum class ValueType { Number, Integer, Boolean, String, Vector, Image };

std::string_view to_string(ValueType type);

/// Result of evaluating an expression. Integers stay integral through
/// +, -, * while they fit; everything else is double precision.
class Value {
public:
    using Storage = std::variant<double, std::int64_t, bool, std::string, Vector, Image>;

    Value() : storage_(0.0) {}
    Value(double v) : storage_(v) {}
    Value(std::int64_t v) : storage_(v) {}
    Value(int v) : storage_(static_cast<std::int64_t>(v)) {}
    Value(bool v) : storage_(v) {}
    Value(std::string v) : storage_(std::move(v)) {}
    Value(const char* v) : storage_(std::string(v)) {}
    Value(Vector v) : storage_(std::move(v)) {}
    Value(Image v) : storage_(std::move(v)) {}

    ValueType type() const noexcept { return static_cast<ValueType>(storage_.index()); }

    bool is_number() const noexcept { return std::holds_alternative<double>(storage_); }
    bool is_integer() const noexcept { return std::holds_alternative<std::int64_t>(storage_); }
    bool is_numeric() const noexcept { return is_number() || is_integer(); }
    bool is_boolean() const noexcept { return std::holds_alternative<bool>(storage_); }
    bool is_string() const noexcept { return std::holds_alternative<std::string>(storage_); }
    bool is_vector() const noexcept { return std::holds_alternative<Vector>(storage_); }
    bool is_image() const noexcept { return std::holds_alternative<Image>(storage_); }

    /// Numeric scalar as double; throws EvalError(Type) otherwise.
    double as_double() const;
    std::int64_t as_integer() const;
    bool as_boolean() const;
    const std::string& as_string() const;
    const Vector& as_vector() const;
    const Image& as_image() const;

    const Storage& storage() const noexcept { return storage_; }

    bool operator==(const Value&) const = default;

private:
    Storage storage_;
};

/// Canonical text of a value: numbers in shortest round-trip form, vectors
/// as `c(a, b, ...)`, booleans as true/false. Images have no text form and
/// render as `<image:media-type>`.
std::string canonical_text(const Value& value);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

/// Identifier -> value environment. Lookup of an unbound name throws.
class Bindings {
public:
    using Map = std::map<std::string, Value, std::less<>>;

    void set(std::string name, Value value) { map_.insert_or_assign(std::move(name), std::move(value)); }
    bool contains(std::string_view name) const { return map_.find(name) != map_.end(); }
    const Value* find(std::string_view name) const;
    const Value& get(std::string_view name) const;
    bool erase(std::string_view name);

    std::size_t size() const noexcept { return map_.size(); }
    bool empty() const noexcept { return map_.empty(); }
    auto begin() const { return map_.begin(); }
    auto end() const { return map_.end(); }

    bool operator==(const Bindings&) const = default;

private:
    Map map_;
};

}  // namespace examforge::expr
