#include "examforge/expr/predicates.hpp"

#include "examforge/expr/analysis.hpp"
#include "examforge/expr/errors.hpp"
#include "examforge/expr/functions.hpp"

namespace examforge::expr {

namespace {

std::size_t occurrence_arg(const Expression& call, const Evaluator& ev) {
    if (call.children().size() < 3) return 1;
    const std::int64_t n = ev.evaluate(call.child(2)).as_integer();
    if (n < 1) throw EvalError(EvalErrorKind::Structure, "occurrence index must be >= 1");
    return static_cast<std::size_t>(n);
}

}  // namespace

Expression PredicateScope::resolve_formula(const Expression& arg, const Evaluator& ev) const {
    switch (arg.kind()) {
        case NodeKind::Identifier:
            if (auto it = formulas_.find(arg.name()); it != formulas_.end()) return it->second;
            if (arg.name() == "sub" || arg.name().rfind("sub_", 0) == 0) {
                throw EvalError(EvalErrorKind::Unbound, "no formula bound to '" + arg.name() + "'");
            }
            return arg;
        case NodeKind::Number: return arg;
        case NodeKind::Call:
            if (arg.name() == "argumentOf") {
                return argument_of(resolve_formula(arg.child(0), ev), arg.child(1).name(),
                                   occurrence_arg(arg, ev));
            }
            break;
        default: break;
    }
    const FunctionInfo* info = arg.kind() == NodeKind::Call ? find_function(arg.name()) : nullptr;
    Node n = arg.node();
    for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (info) {
            ArgRole role = info->role_of(i);
            if (role == ArgRole::Name || role == ArgRole::Function) continue;
        }
        n.children[i] = resolve_formula(n.children[i], ev);
    }
    return Expression(std::make_shared<const Node>(std::move(n)));
}

std::optional<Value> PredicateScope::call(const Expression& call, const Evaluator& ev) const {
    const std::string& name = call.name();
    const auto& args = call.children();
    if (name == "dependsOn") {
        return Value(depends_on(resolve_formula(args[0], ev), args[1].name()));
    }
    if (name == "usesFunction") {
        return Value(uses_function(resolve_formula(args[0], ev), args[1].name()));
    }
    if (name == "argumentOf") {
        return ev.evaluate(resolve_formula(call, ev));
    }
    if (name == "evalAt") {
        std::vector<std::pair<std::string, Value>> point;
        for (std::size_t i = 1; i + 1 < args.size(); i += 2) {
            point.emplace_back(args[i].name(), ev.evaluate(args[i + 1]));
        }
        return ev.evaluate_with(resolve_formula(args[0], ev), point);
    }
    if (name == "equivalent") {
        std::vector<SampleVar> vars;
        for (std::size_t i = 2; i + 2 < args.size(); i += 3) {
            vars.push_back({args[i].name(), ev.evaluate_number(args[i + 1]), ev.evaluate_number(args[i + 2])});
        }
        return Value(equivalent(resolve_formula(args[0], ev), resolve_formula(args[1], ev), vars, ev,
                                equivalence_));
    }
    if (name == "inCorridor") {
        return Value(within_corridor(ev.evaluate_number(args[0]), ev.evaluate_number(args[1]), corridor_));
    }
    return std::nullopt;
}

bool evaluate_condition(const Expression& condition, const Bindings& bindings, const PredicateScope& scope) {
    return Evaluator(bindings, nullptr, &scope).evaluate(condition).as_boolean();
}

}  // namespace examforge::expr
