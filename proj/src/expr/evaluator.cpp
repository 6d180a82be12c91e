#include "examforge/expr/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "examforge/expr/errors.hpp"
#include "examforge/expr/functions.hpp"
#include "examforge/expr/numeric.hpp"

namespace examforge::expr {

namespace {

[[noreturn]] void domain(const std::string& message) { throw EvalError(EvalErrorKind::Domain, message); }

double finite(double v, const char* what) {
    if (!std::isfinite(v)) domain(std::string("non-finite result in ") + what);
    return v;
}

Value numeric_result(double v, const char* what) { return Value(finite(v, what)); }

// Scalars behave as length-one vectors in the aggregate builtins.
Vector as_sample(const Value& v) {
    if (v.is_vector()) return v.as_vector();
    return Vector{v.as_double()};
}

template <typename F>
Value elementwise(const Value& a, const Value& b, F f, const char* what) {
    if (a.is_vector() || b.is_vector()) {
        Vector x = as_sample(a), y = as_sample(b);
        if (x.size() != y.size() && x.size() != 1 && y.size() != 1) {
            domain(std::string("vector length mismatch in ") + what);
        }
        const std::size_t n = std::max(x.size(), y.size());
        Vector out(n);
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = finite(f(x[x.size() == 1 ? 0 : i], y[y.size() == 1 ? 0 : i]), what);
        }
        return Value(std::move(out));
    }
    return numeric_result(f(a.as_double(), b.as_double()), what);
}

Value arithmetic(Op op, const Value& a, const Value& b) {
    if (a.is_integer() && b.is_integer() && op != Op::Div && op != Op::Pow) {
        std::int64_t x = a.as_integer(), y = b.as_integer(), r = 0;
        bool overflow = false;
        switch (op) {
            case Op::Add: overflow = __builtin_add_overflow(x, y, &r); break;
            case Op::Sub: overflow = __builtin_sub_overflow(x, y, &r); break;
            case Op::Mul: overflow = __builtin_mul_overflow(x, y, &r); break;
            default: break;
        }
        if (!overflow) return Value(r);
    }
    switch (op) {
        case Op::Add: return elementwise(a, b, std::plus<>(), "addition");
        case Op::Sub: return elementwise(a, b, std::minus<>(), "subtraction");
        case Op::Mul: return elementwise(a, b, std::multiplies<>(), "multiplication");
        case Op::Div:
            return elementwise(a, b, [](double x, double y) {
                if (y == 0.0) domain("division by zero");
                return x / y;
            }, "division");
        case Op::Pow:
            return elementwise(a, b, [](double x, double y) { return std::pow(x, y); }, "power");
        default: break;
    }
    throw EvalError(EvalErrorKind::Type, "bad arithmetic operator");
}

bool compare(Op op, const Value& a, const Value& b) {
    if (a.is_numeric() && b.is_numeric()) {
        if (a.is_integer() && b.is_integer()) {
            auto x = a.as_integer(), y = b.as_integer();
            switch (op) {
                case Op::Less: return x < y;
                case Op::LessEqual: return x <= y;
                case Op::Greater: return x > y;
                case Op::GreaterEqual: return x >= y;
                case Op::Equal: return x == y;
                case Op::NotEqual: return x != y;
                default: break;
            }
        }
        double x = a.as_double(), y = b.as_double();
        switch (op) {
            case Op::Less: return x < y;
            case Op::LessEqual: return x <= y;
            case Op::Greater: return x > y;
            case Op::GreaterEqual: return x >= y;
            case Op::Equal: return x == y;
            case Op::NotEqual: return x != y;
            default: break;
        }
    }
    if (op == Op::Equal || op == Op::NotEqual) {
        if (a.type() == b.type() && (a.is_boolean() || a.is_string())) {
            return (a == b) == (op == Op::Equal);
        }
    }
    throw EvalError(EvalErrorKind::Type, "cannot compare " + std::string(to_string(a.type())) +
                                             " with " + std::string(to_string(b.type())));
}

Value unary_math(const std::string& name, const Value& arg) {
    auto apply = [&](double x) -> double {
        if (name == "sin") return std::sin(x);
        if (name == "cos") return std::cos(x);
        if (name == "tan") return std::tan(x);
        if (name == "atan") return std::atan(x);
        if (name == "asin") {
            if (x < -1.0 || x > 1.0) domain("asin argument outside [-1, 1]");
            return std::asin(x);
        }
        if (name == "acos") {
            if (x < -1.0 || x > 1.0) domain("acos argument outside [-1, 1]");
            return std::acos(x);
        }
        if (name == "exp") return std::exp(x);
        if (name == "ln") {
            if (x <= 0.0) domain("logarithm of non-positive number");
            return std::log(x);
        }
        if (name == "log10") {
            if (x <= 0.0) domain("logarithm of non-positive number");
            return std::log10(x);
        }
        if (name == "sqrt") {
            if (x < 0.0) domain("square root of negative number");
            return std::sqrt(x);
        }
        if (name == "abs") return std::abs(x);
        domain("unknown function " + name);
    };
    if (arg.is_vector()) {
        Vector out;
        out.reserve(arg.as_vector().size());
        for (double x : arg.as_vector()) out.push_back(finite(apply(x), name.c_str()));
        return Value(std::move(out));
    }
    if (name == "abs" && arg.is_integer() && arg.as_integer() != std::numeric_limits<std::int64_t>::min()) {
        return Value(static_cast<std::int64_t>(std::llabs(arg.as_integer())));
    }
    return numeric_result(apply(arg.as_double()), name.c_str());
}

Value integral_result(double v) {
    finite(v, "rounding");
    if (std::abs(v) < 0x1.0p62) return Value(static_cast<std::int64_t>(v));
    return Value(v);
}

double quantile(const std::string& name, double p, double df) {
    if (!(p > 0.0 && p < 1.0)) domain(name + " probability outside (0, 1)");
    try {
        if (name == "qnorm") return boost::math::quantile(boost::math::normal_distribution<double>(), p);
        if (!(df > 0.0)) domain("qt degrees of freedom must be positive");
        return boost::math::quantile(boost::math::students_t_distribution<double>(df), p);
    } catch (const EvalError&) {
        throw;
    } catch (const std::exception& ex) {
        domain(name + ": " + ex.what());
    }
}

RandomStream& need_rng(RandomStream* rng, const std::string& name) {
    if (!rng) throw EvalError(EvalErrorKind::Domain, name + " needs a random stream");
    return *rng;
}

}  // namespace

const Value* Evaluator::lookup(std::string_view name) const {
    if (overlay_) {
        for (const auto& [k, v] : *overlay_) {
            if (k == name) return &v;
        }
    }
    if (parent_) return parent_->lookup(name);
    return bindings_->find(name);
}

Value Evaluator::evaluate_with(const Expression& expr,
                               const std::vector<std::pair<std::string, Value>>& overrides) const {
    Evaluator child(*bindings_, rng_, extension_);
    child.overlay_ = &overrides;
    child.parent_ = this;
    return child.evaluate(expr);
}

double Evaluator::evaluate_number(const Expression& expr) const { return evaluate(expr).as_double(); }

Value Evaluator::evaluate(const Expression& expr) const {
    const Node& n = expr.node();
    switch (n.kind) {
        case NodeKind::Number:
            return n.integral ? Value(n.integer) : Value(n.real);
        case NodeKind::Identifier: {
            if (const Value* v = lookup(n.name)) return *v;
            if (n.name == "pi") return Value(std::numbers::pi);
            if (n.name == "e") return Value(std::numbers::e);
            if (n.name == "true") return Value(true);
            if (n.name == "false") return Value(false);
            throw EvalError(EvalErrorKind::Unbound, "unbound identifier '" + n.name + "'");
        }
        case NodeKind::Unary: {
            Value v = evaluate(n.children.at(0));
            if (v.is_integer() && v.as_integer() != std::numeric_limits<std::int64_t>::min()) {
                return Value(-v.as_integer());
            }
            if (v.is_vector()) {
                Vector out = v.as_vector();
                for (double& x : out) x = -x;
                return Value(std::move(out));
            }
            return Value(-v.as_double());
        }
        case NodeKind::Binary:
            return arithmetic(n.op, evaluate(n.children.at(0)), evaluate(n.children.at(1)));
        case NodeKind::Comparison:
            return Value(compare(n.op, evaluate(n.children.at(0)), evaluate(n.children.at(1))));
        case NodeKind::Logical: {
            bool lhs = evaluate(n.children.at(0)).as_boolean();
            if (n.op == Op::Not) return Value(!lhs);
            if (n.op == Op::And && !lhs) return Value(false);
            if (n.op == Op::Or && lhs) return Value(true);
            return Value(evaluate(n.children.at(1)).as_boolean());
        }
        case NodeKind::Call: return eval_call(expr);
    }
    throw EvalError(EvalErrorKind::Type, "malformed expression");
}

Value Evaluator::eval_call(const Expression& call) const {
    const Node& n = call.node();
    const FunctionInfo* info = find_function(n.name);
    if (!info) throw EvalError(EvalErrorKind::Domain, "unknown function '" + n.name + "'");
    const auto& args = n.children;
    if (!info->accepts_count(args.size())) {
        throw EvalError(EvalErrorKind::Arity, "wrong number of arguments to '" + n.name + "'");
    }

    if (info->category == FunctionCategory::Predicate || info->category == FunctionCategory::Backend) {
        if (extension_) {
            if (auto v = extension_->call(call, *this)) return *std::move(v);
        }
        throw EvalError(EvalErrorKind::Domain, "'" + n.name + "' is not available here");
    }

    const std::string& name = info->name;
    if (name == "ifelse") {
        return evaluate(args[evaluate(args[0]).as_boolean() ? 1 : 2]);
    }

    std::vector<Value> v;
    v.reserve(args.size());
    for (const auto& a : args) v.push_back(evaluate(a));

    if (name == "sin" || name == "cos" || name == "tan" || name == "atan" || name == "asin" ||
        name == "acos" || name == "exp" || name == "ln" || name == "log10" || name == "sqrt" ||
        name == "abs") {
        return unary_math(name, v[0]);
    }
    if (name == "min" || name == "max") {
        Vector all;
        for (const auto& x : v) {
            Vector part = as_sample(x);
            all.insert(all.end(), part.begin(), part.end());
        }
        if (all.empty()) domain(name + " of empty vector");
        bool ints = std::all_of(v.begin(), v.end(), [](const Value& x) { return x.is_integer(); });
        auto it = name == "min" ? std::min_element(all.begin(), all.end())
                                : std::max_element(all.begin(), all.end());
        if (ints) {
            std::int64_t best = v[0].as_integer();
            for (const auto& x : v) {
                best = name == "min" ? std::min(best, x.as_integer()) : std::max(best, x.as_integer());
            }
            return Value(best);
        }
        return Value(*it);
    }
    if (name == "floor") return integral_result(std::floor(v[0].as_double()));
    if (name == "ceil") return integral_result(std::ceil(v[0].as_double()));
    if (name == "round") {
        const int digits = args.size() == 2 ? static_cast<int>(v[1].as_integer()) : 0;
        if (digits < 0 || digits > 15) domain("round digits must be in [0, 15]");
        if (v[0].is_integer()) return v[0];
        if (v[0].is_vector()) {
            Vector out = v[0].as_vector();
            for (double& x : out) x = round_half_away(x, digits);
            return Value(std::move(out));
        }
        return numeric_result(round_half_away(v[0].as_double(), digits), "round");
    }
    if (name == "mean" || name == "sum" || name == "sd" || name == "len") {
        Vector s = as_sample(v[0]);
        if (name == "len") return Value(static_cast<std::int64_t>(s.size()));
        if (s.empty()) domain(name + " of empty vector");
        const double total = std::accumulate(s.begin(), s.end(), 0.0);
        if (name == "sum") return numeric_result(total, "sum");
        const double mean = total / static_cast<double>(s.size());
        if (name == "mean") return numeric_result(mean, "mean");
        if (s.size() < 2) domain("sd needs at least two values");
        double ss = 0.0;
        for (double x : s) ss += (x - mean) * (x - mean);
        return numeric_result(std::sqrt(ss / static_cast<double>(s.size() - 1)), "sd");
    }
    if (name == "qnorm") return numeric_result(quantile(name, v[0].as_double(), 0.0), "qnorm");
    if (name == "qt") return numeric_result(quantile(name, v[0].as_double(), v[1].as_double()), "qt");
    if (name == "c") {
        Vector out;
        for (const auto& x : v) {
            Vector part = as_sample(x);
            out.insert(out.end(), part.begin(), part.end());
        }
        return Value(std::move(out));
    }
    if (name == "randint") {
        const std::int64_t lo = v[0].as_integer(), hi = v[1].as_integer();
        if (lo > hi) domain("randint bounds out of order");
        return Value(need_rng(rng_, name).integer(lo, hi));
    }
    if (name == "runif") {
        const double lo = v[0].as_double(), hi = v[1].as_double();
        if (lo > hi) domain("runif bounds out of order");
        return numeric_result(need_rng(rng_, name).uniform(lo, hi), "runif");
    }
    if (name == "rnorm" || name == "rnormv") {
        const std::size_t off = name == "rnormv" ? 1 : 0;
        const double mu = v[off].as_double(), sigma = v[off + 1].as_double();
        if (sigma < 0.0) domain(name + " standard deviation must be non-negative");
        RandomStream& rng = need_rng(rng_, name);
        if (name == "rnorm") return numeric_result(rng.normal(mu, sigma), "rnorm");
        const std::int64_t count = v[0].as_integer();
        if (count < 1 || count > 1'000'000) domain("rnormv length must be in [1, 1000000]");
        Vector out(static_cast<std::size_t>(count));
        for (double& x : out) x = finite(rng.normal(mu, sigma), "rnormv");
        return Value(std::move(out));
    }
    throw EvalError(EvalErrorKind::Domain, "'" + name + "' is not available here");
}

Value evaluate(const Expression& expr, const Bindings& bindings, RandomStream* rng) {
    return Evaluator(bindings, rng).evaluate(expr);
}

}  // namespace examforge::expr
