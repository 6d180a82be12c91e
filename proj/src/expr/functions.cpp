#include "examforge/expr/functions.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>

namespace examforge::expr {

namespace {

constexpr std::size_t kVariadic = SIZE_MAX;

FunctionInfo math(std::string name, std::size_t lo, std::size_t hi) {
    return {std::move(name), FunctionCategory::Math, lo, hi, {}, {}};
}

FunctionInfo sampling(std::string name, std::size_t lo, std::size_t hi) {
    return {std::move(name), FunctionCategory::Sampling, lo, hi, {}, {}};
}

FunctionInfo backend(std::string name, std::size_t lo, std::size_t hi) {
    return {std::move(name), FunctionCategory::Backend, lo, hi, {}, {}};
}

std::vector<FunctionInfo> build_registry() {
    using R = ArgRole;
    std::vector<FunctionInfo> f = {
        math("sin", 1, 1),    math("cos", 1, 1),     math("tan", 1, 1),
        math("atan", 1, 1),   math("asin", 1, 1),    math("acos", 1, 1),
        math("exp", 1, 1),    math("ln", 1, 1),      math("log10", 1, 1),
        math("sqrt", 1, 1),   math("abs", 1, 1),     math("min", 1, kVariadic),
        math("max", 1, kVariadic), math("floor", 1, 1), math("ceil", 1, 1),
        math("round", 1, 2),  math("mean", 1, 1),    math("sd", 1, 1),
        math("sum", 1, 1),    math("len", 1, 1),     math("qnorm", 1, 1),
        math("qt", 2, 2),     math("c", 1, kVariadic), math("ifelse", 3, 3),
        sampling("randint", 2, 2), sampling("runif", 2, 2), sampling("rnorm", 2, 2),
        sampling("rnormv", 3, 3),
        backend("plot_histogram", 1, 2), backend("set_seed", 1, 2),
    };
    f.push_back({"dependsOn", FunctionCategory::Predicate, 2, 2, {R::Formula, R::Name}, {}});
    f.push_back({"usesFunction", FunctionCategory::Predicate, 2, 2, {R::Formula, R::Function}, {}});
    f.push_back({"argumentOf", FunctionCategory::Predicate, 2, 3,
                 {R::Formula, R::Function, R::Value}, {}});
    f.push_back({"equivalent", FunctionCategory::Predicate, 2, kVariadic,
                 {R::Formula, R::Formula}, {R::Name, R::Value, R::Value}});
    f.push_back({"evalAt", FunctionCategory::Predicate, 1, kVariadic,
                 {R::Formula}, {R::Name, R::Value}});
    f.push_back({"inCorridor", FunctionCategory::Predicate, 2, 2, {R::Value, R::Value}, {}});
    return f;
}

const std::map<std::string, std::string, std::less<>>& aliases() {
    static const std::map<std::string, std::string, std::less<>> table = {
        {"arctan", "atan"}, {"arcsin", "asin"}, {"arccos", "acos"},
        {"log", "ln"},      {"dependson", "dependsOn"}, {"usesfunction", "usesFunction"},
        {"argumentof", "argumentOf"}, {"evalat", "evalAt"}, {"incorridor", "inCorridor"},
    };
    return table;
}

}  // namespace

ArgRole FunctionInfo::role_of(std::size_t index) const {
    if (index < fixed_roles.size()) return fixed_roles[index];
    if (repeat_roles.empty()) return ArgRole::Value;
    return repeat_roles[(index - fixed_roles.size()) % repeat_roles.size()];
}

bool FunctionInfo::accepts_count(std::size_t n) const {
    if (n < min_args || n > max_args) return false;
    if (!repeat_roles.empty() && n >= fixed_roles.size()) {
        return (n - fixed_roles.size()) % repeat_roles.size() == 0;
    }
    return true;
}

const std::vector<FunctionInfo>& all_functions() {
    static const std::vector<FunctionInfo> registry = build_registry();
    return registry;
}

std::optional<std::string> canonical_function_name(std::string_view name) {
    for (const auto& f : all_functions()) {
        if (f.name == name) return f.name;
    }
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (auto it = aliases().find(lower); it != aliases().end()) return it->second;
    for (const auto& f : all_functions()) {
        if (f.name == lower) return f.name;
    }
    return std::nullopt;
}

const FunctionInfo* find_function(std::string_view name) {
    auto canonical = canonical_function_name(name);
    if (!canonical) return nullptr;
    for (const auto& f : all_functions()) {
        if (f.name == *canonical) return &f;
    }
    return nullptr;
}

bool is_implicit_constant(std::string_view name) {
    return name == "pi" || name == "e" || name == "true" || name == "false";
}

}  // namespace examforge::expr
