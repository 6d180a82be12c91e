#include "examforge/expr/analysis.hpp"

#include "examforge/expr/errors.hpp"
#include "examforge/expr/functions.hpp"

namespace examforge::expr {

namespace {

std::string resolve_function(std::string_view function) {
    auto canonical = canonical_function_name(function);
    if (!canonical) {
        throw EvalError(EvalErrorKind::Structure, "unknown function '" + std::string(function) + "'");
    }
    return *canonical;
}

template <typename Visit>
bool any_node(const Expression& e, const Visit& visit) {
    if (visit(e)) return true;
    for (const auto& c : e.children()) {
        if (any_node(c, visit)) return true;
    }
    return false;
}

// Depth-first, left to right: a call is visited before its arguments.
const Expression* find_call(const Expression& e, const std::string& fn, std::size_t& remaining) {
    if (e.kind() == NodeKind::Call && e.name() == fn) {
        if (--remaining == 0) return &e;
    }
    for (const auto& c : e.children()) {
        if (auto* hit = find_call(c, fn, remaining)) return hit;
    }
    return nullptr;
}

}  // namespace

bool depends_on(const Expression& expr, std::string_view name) {
    return any_node(expr, [&](const Expression& e) {
        return e.kind() == NodeKind::Identifier && e.name() == name;
    });
}

bool uses_function(const Expression& expr, std::string_view function) {
    const std::string fn = resolve_function(function);
    return any_node(expr, [&](const Expression& e) { return e.kind() == NodeKind::Call && e.name() == fn; });
}

std::size_t count_calls(const Expression& expr, std::string_view function) {
    const std::string fn = resolve_function(function);
    std::size_t n = 0;
    any_node(expr, [&](const Expression& e) {
        if (e.kind() == NodeKind::Call && e.name() == fn) ++n;
        return false;
    });
    return n;
}

Expression argument_of(const Expression& expr, std::string_view function, std::size_t occurrence) {
    const std::string fn = resolve_function(function);
    std::size_t remaining = occurrence;
    const Expression* hit = occurrence == 0 ? nullptr : find_call(expr, fn, remaining);
    if (!hit || hit->children().empty()) {
        throw EvalError(EvalErrorKind::Structure,
                        "no occurrence " + std::to_string(occurrence) + " of '" + fn + "'");
    }
    return hit->child(0);
}

std::set<std::string> identifiers(const Expression& expr) {
    std::set<std::string> out;
    any_node(expr, [&](const Expression& e) {
        if (e.kind() == NodeKind::Identifier) out.insert(e.name());
        return false;
    });
    return out;
}

Expression substitute(const Expression& expr, std::string_view name, const Expression& replacement) {
    if (expr.kind() == NodeKind::Identifier) return expr.name() == name ? replacement : expr;
    if (expr.children().empty()) return expr;
    bool changed = false;
    std::vector<Expression> kids;
    kids.reserve(expr.children().size());
    for (const auto& c : expr.children()) {
        kids.push_back(substitute(c, name, replacement));
        changed = changed || !(kids.back() == c);
    }
    if (!changed) return expr;
    Node n = expr.node();
    n.children = std::move(kids);
    return Expression(std::make_shared<const Node>(std::move(n)));
}

}  // namespace examforge::expr
