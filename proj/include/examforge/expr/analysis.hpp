#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>

#include "examforge/expr/expression.hpp"

namespace examforge::expr {

/// True iff `name` occurs as an identifier anywhere in `expr`. Syntactic:
/// `x - x` depends on x.
bool depends_on(const Expression& expr, std::string_view name);

/// True iff a call to `function` (or one of its aliases) occurs. Throws
/// EvalError(Structure) when `function` is not a registered name.
bool uses_function(const Expression& expr, std::string_view function);

/// Number of calls to `function`, in depth-first left-to-right order.
std::size_t count_calls(const Expression& expr, std::string_view function);

/// First argument of the `occurrence`-th (1-based, depth-first, left to
/// right) call to `function`. Throws EvalError(Structure) if absent.
Expression argument_of(const Expression& expr, std::string_view function, std::size_t occurrence);

/// All identifiers occurring in the tree (function names excluded).
std::set<std::string> identifiers(const Expression& expr);

/// Replace identifiers by the given trees.
Expression substitute(const Expression& expr, std::string_view name, const Expression& replacement);

}  // namespace examforge::expr
