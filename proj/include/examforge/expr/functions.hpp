#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace examforge::expr {

enum class FunctionCategory {
    Math,       // deterministic numeric builtins
    Sampling,   // draw from the random stream
    Predicate,  // structural checks over formulas, feedback conditions only
    Backend,    // workspace-only (plots, seeding)
};

/// How a call argument is interpreted by a predicate.
enum class ArgRole {
    Value,     // evaluated normally
    Formula,   // taken as an expression tree, not evaluated
    Name,      // a bare identifier naming a variable
    Function,  // a bare identifier naming a registered function
};

struct FunctionInfo {
    std::string name;
    FunctionCategory category;
    std::size_t min_args;
    std::size_t max_args;               // SIZE_MAX for variadic
    std::vector<ArgRole> fixed_roles;   // roles of the leading arguments
    std::vector<ArgRole> repeat_roles;  // roles of the repeating tail group

    ArgRole role_of(std::size_t index) const;
    bool accepts_count(std::size_t n) const;
};

/// Resolves aliases (arctan -> atan, log -> ln) and case; nullptr if unknown.
const FunctionInfo* find_function(std::string_view name);

/// Canonical spelling for a known function or alias.
std::optional<std::string> canonical_function_name(std::string_view name);

const std::vector<FunctionInfo>& all_functions();

/// Identifiers bound implicitly when no explicit binding exists.
bool is_implicit_constant(std::string_view name);

}  // namespace examforge::expr
