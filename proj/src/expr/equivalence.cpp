#include "examforge/expr/equivalence.hpp"

#include <algorithm>
#include <cmath>

#include "examforge/expr/errors.hpp"

namespace examforge::expr {

namespace {

// Numeric value at a point, or NaN when the point is outside the domain.
double sample(const Evaluator& ev, const Expression& e,
              const std::vector<std::pair<std::string, Value>>& point) {
    try {
        double v = ev.evaluate_with(e, point).as_double();
        return std::isfinite(v) ? v : std::nan("");
    } catch (const EvalError& err) {
        if (err.kind() == EvalErrorKind::Domain) return std::nan("");
        throw;
    }
}

}  // namespace

bool equivalent(const Expression& a, const Expression& b, std::span<const SampleVar> vars,
                const Evaluator& base, const EquivalenceOptions& options) {
    if (options.trials == 0) throw EvalError(EvalErrorKind::Domain, "equivalence needs at least one trial");
    RandomStream rng(options.seed);
    const std::size_t max_discards = 10 * options.trials;
    std::size_t kept = 0, discarded = 0;
    std::vector<std::pair<std::string, Value>> point;
    point.reserve(vars.size());
    while (kept < options.trials) {
        point.clear();
        for (const auto& v : vars) point.emplace_back(v.name, Value(rng.uniform(v.lo, v.hi)));
        const double x = sample(base, a, point);
        const double y = sample(base, b, point);
        if (std::isnan(x) || std::isnan(y)) {
            if (++discarded > max_discards) {
                throw EvalError(EvalErrorKind::Domain, "too many sample points outside the domain");
            }
            continue;
        }
        ++kept;
        const double scale = std::max({1.0, std::abs(x), std::abs(y)});
        if (std::abs(x - y) > options.rel_tol * scale) return false;
    }
    return true;
}

bool equivalent(const Expression& a, const Expression& b, std::span<const SampleVar> vars,
                const Bindings& constants, const EquivalenceOptions& options) {
    return equivalent(a, b, vars, Evaluator(constants), options);
}

}  // namespace examforge::expr
