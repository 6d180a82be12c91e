#pragma once

#include <string_view>

#include "examforge/expr/expression.hpp"

namespace examforge::expr {

struct ParseOptions {
    bool allow_sampling = true;
    bool allow_predicates = true;
    bool allow_backend = true;
    std::size_t max_depth = 200;

    /// Student formula input: plain math only.
    static ParseOptions formula_input() { return {false, false, false, 200}; }
};

/// Precedence, tightest first: ^ (right-assoc), unary minus, * /, + -,
/// comparisons (non-chaining), !, &&, ||.
Expression parse(std::string_view text, const ParseOptions& options = {});

}  // namespace examforge::expr
