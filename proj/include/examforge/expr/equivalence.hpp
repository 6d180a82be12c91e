#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "examforge/expr/evaluator.hpp"
#include "examforge/expr/expression.hpp"
#include "examforge/expr/value.hpp"

namespace examforge::expr {

struct SampleVar {
    std::string name;
    double lo = 0.0;
    double hi = 1.0;
};

struct EquivalenceOptions {
    std::size_t trials = 50;
    double rel_tol = 1e-9;
    std::uint64_t seed = 0x6571'7569'7661'6c00ULL;
};

/// Randomized numeric equivalence: draws `trials` joint points from the
/// intervals, redrawing points where either side is not finite (at most
/// 10 * trials redraws, then EvalError(Domain)). Equivalent iff
/// |a - b| <= rel_tol * max(1, |a|, |b|) at every retained point.
/// Sampled names shadow entries in `constants`.
bool equivalent(const Expression& a, const Expression& b, std::span<const SampleVar> vars,
                const Bindings& constants = {}, const EquivalenceOptions& options = {});

/// Same, evaluating through an existing evaluator (for its bindings and
/// call extension).
bool equivalent(const Expression& a, const Expression& b, std::span<const SampleVar> vars,
                const Evaluator& base, const EquivalenceOptions& options = {});

}  // namespace examforge::expr
