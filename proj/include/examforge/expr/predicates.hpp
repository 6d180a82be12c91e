#pragma once

#include <map>
#include <optional>
#include <string>

#include "examforge/expr/equivalence.hpp"
#include "examforge/expr/evaluator.hpp"
#include "examforge/expr/numeric.hpp"

namespace examforge::expr {

/// Call extension implementing the feedback-condition predicates:
///
///   dependsOn(f, name)            usesFunction(f, fname)
///   argumentOf(f, fname, n)       evalAt(f, name, value, ...)
///   equivalent(f, g, name, lo, hi, ...)
///   inCorridor(input, correct)
///
/// Formula arguments are taken as trees. Identifiers naming a formula in
/// scope (e.g. `sub`) are spliced in, as are nested argumentOf calls, so
/// `equivalent(sub - 1/2, atan(x)/pi, x, -1, 1)` compares the submission
/// shifted by a constant. `sub` and `sub_<id>` with no formula in scope
/// raise EvalError(Unbound) rather than standing for themselves.
class PredicateScope : public CallExtension {
public:
    using Formulas = std::map<std::string, Expression, std::less<>>;

    PredicateScope() = default;
    PredicateScope(Formulas formulas, Corridor corridor, EquivalenceOptions equivalence = {})
        : formulas_(std::move(formulas)), corridor_(corridor), equivalence_(equivalence) {}

    std::optional<Value> call(const Expression& call, const Evaluator& evaluator) const override;

    /// Splice formulas and argumentOf results into a formula argument.
    Expression resolve_formula(const Expression& arg, const Evaluator& evaluator) const;

    const Formulas& formulas() const { return formulas_; }
    const Corridor& corridor() const { return corridor_; }

private:
    Formulas formulas_;
    Corridor corridor_;
    EquivalenceOptions equivalence_;
};

/// Evaluate a boolean condition; non-boolean results throw EvalError(Type).
bool evaluate_condition(const Expression& condition, const Bindings& bindings,
                        const PredicateScope& scope);

}  // namespace examforge::expr
