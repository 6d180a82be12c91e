#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "examforge/expr/expression.hpp"
#include "examforge/expr/random.hpp"
#include "examforge/expr/value.hpp"

namespace examforge::expr {

class Evaluator;

/// Handles calls the core evaluator does not implement itself (predicates,
/// workspace builtins). Return nullopt to fall through to the default error.
class CallExtension {
public:
    virtual ~CallExtension() = default;
    virtual std::optional<Value> call(const Expression& call, const Evaluator& evaluator) const = 0;
};

/// Evaluates expressions against a binding environment. Holds references
/// only; the bindings, stream and extension must outlive it.
class Evaluator {
public:
    explicit Evaluator(const Bindings& bindings, RandomStream* rng = nullptr,
                       const CallExtension* extension = nullptr)
        : bindings_(&bindings), rng_(rng), extension_(extension) {}

    Value evaluate(const Expression& expr) const;

    double evaluate_number(const Expression& expr) const;

    /// Evaluator seeing `overrides` in front of the current bindings.
    Value evaluate_with(const Expression& expr,
                        const std::vector<std::pair<std::string, Value>>& overrides) const;

    const Value* lookup(std::string_view name) const;

    const Bindings& bindings() const { return *bindings_; }
    RandomStream* rng() const { return rng_; }
    const CallExtension* extension() const { return extension_; }

private:
    Value eval_call(const Expression& call) const;

    const Bindings* bindings_;
    RandomStream* rng_;
    const CallExtension* extension_;
    const std::vector<std::pair<std::string, Value>>* overlay_ = nullptr;
    const Evaluator* parent_ = nullptr;
};

/// Convenience wrapper: evaluate with bindings and an optional stream.
Value evaluate(const Expression& expr, const Bindings& bindings, RandomStream* rng = nullptr);

}  // namespace examforge::expr
