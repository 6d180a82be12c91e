#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace examforge::expr {

/// Raised by the parser. `position` is a byte offset into the source text.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t position, const std::string& message)
        : std::runtime_error(message + " at offset " + std::to_string(position)),
          position_(position), detail_(message) {}

    std::size_t position() const noexcept { return position_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    std::size_t position_;
    std::string detail_;
};

enum class EvalErrorKind {
    Unbound,   // identifier without a binding
    Domain,    // numeric domain violation or non-finite result
    Arity,     // wrong argument count
    Type,      // operand of the wrong value variant
    Structure, // structural query failed (e.g. no such occurrence)
};

class EvalError : public std::runtime_error {
public:
    EvalError(EvalErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    EvalErrorKind kind() const noexcept { return kind_; }

private:
    EvalErrorKind kind_;
};

}  // namespace examforge::expr
