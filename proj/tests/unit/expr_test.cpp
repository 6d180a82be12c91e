#include <cmath>
#include <cstring>
#include <set>
#include <numbers>
#include <numeric>

#include "doctest.h"
#include "examforge/expr/analysis.hpp"
#include "examforge/expr/equivalence.hpp"
#include "examforge/expr/errors.hpp"
#include "examforge/expr/evaluator.hpp"
#include "examforge/expr/numeric.hpp"
#include "examforge/expr/parser.hpp"
#include "examforge/expr/predicates.hpp"
#include "../support/generators.hpp"

using namespace examforge::expr;

namespace {

constexpr const char* kCauchyCdf = "(1/pi)*atan((x-m)/k)+1/2";

double eval_num(const std::string& text, const Bindings& b = {}) {
    return evaluate(parse(text), b).as_double();
}

Bindings bind(std::initializer_list<std::pair<const char*, Value>> items) {
    Bindings b;
    for (const auto& [k, v] : items) b.set(k, v);
    return b;
}

// Independent one-sample t statistic: two-pass mean and variance.
double oracle_t_statistic(const std::vector<double>& data, double mu0) {
    const double n = static_cast<double>(data.size());
    double mean = 0.0;
    for (double x : data) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : data) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    return (mean - mu0) / (sd / std::sqrt(n));
}

}  // namespace

TEST_SUITE("parse") {
    TEST_CASE("power is right associative") {
        CHECK(eval_num("2^3^2") == 512.0);
        CHECK(eval_num("(2^3)^2") == 64.0);
    }

    TEST_CASE("unary minus binds looser than power, tighter than product") {
        CHECK(eval_num("-2^2") == -4.0);
        CHECK(eval_num("2^-1") == 0.5);
        CHECK(eval_num("-2*3") == -6.0);
        CHECK(eval_num("2*-3") == -6.0);
    }

    TEST_CASE("logical precedence") {
        CHECK(evaluate(parse("!1 < 2"), {}).as_boolean() == false);
        CHECK(evaluate(parse("true || false && false"), {}).as_boolean() == true);
        CHECK(evaluate(parse("!(1 > 2) && 3 >= 3"), {}).as_boolean() == true);
    }

    TEST_CASE("cauchy cdf parses into calls over x, m, k") {
        Expression f = parse(kCauchyCdf);
        CHECK(identifiers(f) == std::set<std::string>{"k", "m", "pi", "x"});
        CHECK(uses_function(f, "atan"));
        CHECK(serialize(f) == "1 / pi * atan((x - m) / k) + 1 / 2");
    }

    TEST_CASE("arctan and atan are aliases; function names are case-insensitive") {
        CHECK(parse("arctan(x)") == parse("atan(x)"));
        CHECK(parse("ATAN(x)") == parse("atan(x)"));
        CHECK(parse("log(x)") == parse("ln(x)"));
    }

    TEST_CASE("syntax errors carry the offset") {
        try {
            parse("x +");
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.position() == 3);
        }
        CHECK_THROWS_AS(parse(""), ParseError);
        CHECK_THROWS_AS(parse("   "), ParseError);
        CHECK_THROWS_AS(parse("foo(1)"), ParseError);
        CHECK_THROWS_AS(parse("atan(1, 2)"), ParseError);
        CHECK_THROWS_AS(parse("1 < 2 < 3"), ParseError);
        CHECK_THROWS_AS(parse("x = 1"), ParseError);
        CHECK_THROWS_AS(parse("(x"), ParseError);
        CHECK_THROWS_AS(parse("usesFunction(x, nosuch)"), ParseError);
        CHECK_THROWS_AS(parse("dependsOn(x, 2)"), ParseError);
    }

    TEST_CASE("student formula input rejects sampling and predicates") {
        CHECK_THROWS_AS(parse("rnorm(0, 1)", ParseOptions::formula_input()), ParseError);
        CHECK_THROWS_AS(parse("dependsOn(x, x)", ParseOptions::formula_input()), ParseError);
        CHECK_NOTHROW(parse("sqrt(x)", ParseOptions::formula_input()));
    }

    TEST_CASE("nesting depth is bounded") {
        std::string deep(500, '(');
        deep += "1";
        deep += std::string(500, ')');
        CHECK_THROWS_AS(parse(deep), ParseError);
    }

    TEST_CASE("round trip over generated trees") {
        examforge::testing::ExpressionGenerator gen(7);
        for (int i = 0; i < 2000; ++i) {
            Expression e = (i % 3 == 0) ? gen.boolean(4) : gen.numeric(5);
            const std::string text = serialize(e);
            Expression back = parse(text);
            REQUIRE_MESSAGE(back == e, text);
            CHECK(serialize(back) == text);
        }
    }

    TEST_CASE("real literals keep their kind through serialization") {
        CHECK(serialize(parse("2.0")) == "2.0");
        CHECK(serialize(parse("1e20")) == "1e+20");
        CHECK(parse(serialize(parse("0.1"))) == parse("0.1"));
        CHECK(parse("99999999999999999999").node().integral == false);
    }
}

TEST_SUITE("evaluate") {
    TEST_CASE("cauchy cdf values") {
        CHECK(eval_num("atan(0)") == 0.0);
        CHECK(eval_num(kCauchyCdf, bind({{"x", 5}, {"m", 5}, {"k", 3}})) == 0.5);
    }

    TEST_CASE("t statistic matches an independent routine") {
        const std::vector<double> data{1, 2, 3, 4};
        const double oracle = oracle_t_statistic(data, 3.0);
        CHECK(round_half_away(oracle, 4) == doctest::Approx(-0.7746).epsilon(1e-12));

        Bindings b = bind({{"sample", Vector(data)}, {"mu", 3}});
        b.set("xbar", evaluate(parse("mean(sample)"), b));
        b.set("s", evaluate(parse("sd(sample)"), b));
        b.set("n", evaluate(parse("len(sample)"), b));
        const double t = eval_num("(xbar-mu)/(s/sqrt(n))", b);
        CHECK(t == doctest::Approx(oracle).epsilon(1e-14));
        CHECK(format_fixed(t, 4) == "-0.7746");
    }

    TEST_CASE("errors") {
        CHECK_THROWS_AS(eval_num("y + 1"), EvalError);
        auto kind_of = [](const std::string& text) {
            try {
                eval_num(text);
            } catch (const EvalError& e) {
                return e.kind();
            }
            return EvalErrorKind::Structure;
        };
        CHECK(kind_of("y") == EvalErrorKind::Unbound);
        CHECK(kind_of("sqrt(-1)") == EvalErrorKind::Domain);
        CHECK(kind_of("ln(0)") == EvalErrorKind::Domain);
        CHECK(kind_of("1/0") == EvalErrorKind::Domain);
        CHECK(kind_of("exp(1000)") == EvalErrorKind::Domain);
        CHECK(kind_of("1 + (2 < 3)") == EvalErrorKind::Type);
        CHECK(kind_of("randint(1, 2)") == EvalErrorKind::Domain);  // no stream
    }

    TEST_CASE("integers stay integral through + - * and overflow to reals") {
        CHECK(evaluate(parse("2 * 3 - 1"), {}).is_integer());
        CHECK(evaluate(parse("1 / 2"), {}).as_double() == 0.5);
        CHECK(evaluate(parse("9223372036854775807 + 1"), {}).is_number());
    }

    TEST_CASE("statistics builtins") {
        Bindings b = bind({{"v", Vector{2, 4, 4, 4, 5, 5, 7, 9}}});
        CHECK(eval_num("mean(v)", b) == 5.0);
        CHECK(eval_num("sum(v)", b) == 40.0);
        CHECK(eval_num("len(v)", b) == 8.0);
        CHECK(eval_num("sd(v)", b) == doctest::Approx(std::sqrt(32.0 / 7.0)));
        CHECK(eval_num("round(2.5)") == 3.0);
        CHECK(eval_num("round(-2.5)") == -3.0);
        CHECK(eval_num("round(0.77455, 4)") == 0.7746);
        CHECK(eval_num("max(1, 7, 3)") == 7.0);
        CHECK(eval_num("min(v)", b) == 2.0);
        CHECK(eval_num("ifelse(1 < 2, 10, sqrt(-1))") == 10.0);
        CHECK(evaluate(parse("c(1, c(2, 3))"), {}).as_vector() == Vector{1, 2, 3});
    }

    TEST_CASE("quantiles against table values") {
        CHECK(eval_num("qnorm(0.975)") == doctest::Approx(1.959963985).epsilon(1e-9));
        CHECK(eval_num("qt(0.975, 10)") == doctest::Approx(2.228138852).epsilon(1e-9));
        CHECK(eval_num("qt(0.05, 9)") == doctest::Approx(-1.833112933).epsilon(1e-9));
        CHECK_THROWS_AS(eval_num("qnorm(1)"), EvalError);
    }

    TEST_CASE("sampling builtins are deterministic under a seed") {
        const Expression e = parse("c(randint(1, 6), runif(0, 1), rnorm(0, 1), rnormv(5, 10, 2))");
        RandomStream a(42), b(42), c(43);
        const Value va = evaluate(e, {}, &a);
        const Value vb = evaluate(e, {}, &b);
        const Value vc = evaluate(e, {}, &c);
        CHECK(va == vb);
        CHECK_FALSE(va == vc);
        CHECK(va.as_vector().size() == 8);
    }

    TEST_CASE("rnormv returns exactly n values") {
        RandomStream rng(1);
        for (int n : {1, 2, 30, 1000}) {
            Bindings b = bind({{"n", n}});
            CHECK(evaluate(parse("rnormv(n, 0, 1)"), b, &rng).as_vector().size() == static_cast<std::size_t>(n));
        }
        CHECK_THROWS_AS(evaluate(parse("rnormv(0, 0, 1)"), {}, &rng), EvalError);
    }

    TEST_CASE("randint covers its inclusive range") {
        RandomStream rng(5);
        std::set<std::int64_t> seen;
        for (int i = 0; i < 2000; ++i) seen.insert(rng.integer(-2, 3));
        CHECK(seen == std::set<std::int64_t>{-2, -1, 0, 1, 2, 3});
    }
}

TEST_SUITE("properties") {
    TEST_CASE("cauchy cdf at m and m+k for every integer parameterization") {
        const Expression f = parse(kCauchyCdf);
        for (int k = 1; k <= 9; ++k) {
            for (int m = -9; m <= 9; ++m) {
                CHECK(std::abs(eval_num(kCauchyCdf, bind({{"x", m}, {"m", m}, {"k", k}})) - 0.5) <= 1e-12);
                Bindings b = bind({{"x", m + k}, {"m", m}, {"k", k}});
                CHECK(std::abs(evaluate(f, b).as_double() - 0.75) <= 1e-12);
            }
        }
    }

    TEST_CASE("subtraction is left associative, power right associative") {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> d(0.5, 3.0);
        for (int i = 0; i < 500; ++i) {
            Bindings b = bind({{"a", d(rng)}, {"b", d(rng)}, {"c", d(rng)}});
            CHECK(eval_num("a-b-c", b) == eval_num("(a-b)-c", b));
            CHECK(eval_num("a^b^c", b) == eval_num("a^(b^c)", b));
        }
    }

    TEST_CASE("evaluation is bit-identical for equal seeds") {
        examforge::testing::ExpressionGenerator gen(3);
        Bindings b = bind({{"x", 0.3}, {"y", 1.7}, {"z", 2.0}});
        for (int i = 0; i < 300; ++i) {
            Expression e = Expression::binary(Op::Add, gen.numeric(4), parse("runif(0, 1)"));
            RandomStream r1(99), r2(99);
            Value v1, v2;
            bool t1 = true, t2 = true;
            try { v1 = evaluate(e, b, &r1); } catch (const EvalError&) { t1 = false; }
            try { v2 = evaluate(e, b, &r2); } catch (const EvalError&) { t2 = false; }
            CHECK(t1 == t2);
            if (t1) CHECK(std::memcmp(&std::get<double>(v1.storage()), &std::get<double>(v2.storage()), sizeof(double)) == 0);
        }
    }
}

TEST_SUITE("structure") {
    TEST_CASE("dependsOn is syntactic") {
        CHECK_FALSE(depends_on(parse("k^2+1"), "x"));
        CHECK(depends_on(parse(kCauchyCdf), "x"));
        CHECK(depends_on(parse("x - x"), "x"));
    }

    TEST_CASE("usesFunction honours aliases") {
        CHECK(uses_function(parse("atan(x)+1/2"), "arctan"));
        CHECK_FALSE(uses_function(parse("tan(x)"), "atan"));
        CHECK(uses_function(parse("(1/(pi*k))*atan((x-m)/k)+1/2"), "atan"));
        CHECK_THROWS_AS(uses_function(parse("x"), "nosuch"), EvalError);
    }

    TEST_CASE("argumentOf walks depth first, left to right") {
        CHECK(argument_of(parse("atan((x-m)/k)"), "atan", 1) == parse("(x-m)/k"));
        CHECK(argument_of(parse("atan(x)+atan(2*x)"), "atan", 2) == parse("2*x"));
        CHECK(argument_of(parse("atan(atan(y))"), "atan", 2) == parse("y"));
        CHECK_THROWS_AS(argument_of(parse("x+1"), "atan", 1), EvalError);
    }
}

TEST_SUITE("equivalence") {
    TEST_CASE("cauchy cdf forms") {
        const std::vector<SampleVar> xmk{{"x", -10, 10}, {"m", -5, 5}, {"k", 1, 5}};
        CHECK(equivalent(parse("atan((x-m)/k)/pi + 0.5"), parse(kCauchyCdf), xmk));
        CHECK(equivalent(parse("x"), parse("x"), std::vector<SampleVar>{{"x", 0, 1}}));
        const std::vector<SampleVar> xk{{"x", -10, 10}, {"m", -5, 5}, {"k", 2, 5}};
        CHECK_FALSE(equivalent(parse("(1/(pi*k))*atan((x-m)/k)+1/2"), parse(kCauchyCdf), xk));
    }

    TEST_CASE("singular points are redrawn, impossible domains fail") {
        const std::vector<SampleVar> x{{"x", -1, 1}};
        CHECK(equivalent(parse("sqrt(x)^2"), parse("x"), x));  // x<0 half redrawn
        CHECK_THROWS_AS(equivalent(parse("sqrt(-1-x^2)"), parse("x"), x), EvalError);
        CHECK_THROWS_AS(equivalent(parse("x + y"), parse("x"), x), EvalError);
    }

    TEST_CASE("bound constants are used, sampled names shadow them") {
        Bindings b = bind({{"k", 3}});
        CHECK(equivalent(parse("x*k"), parse("3*x"), std::vector<SampleVar>{{"x", 0, 1}}, b));
        CHECK_FALSE(equivalent(parse("x*k"), parse("3*x"), std::vector<SampleVar>{{"x", 0, 1}, {"k", 1, 2}}, b));
    }

    TEST_CASE("reflexive and symmetric on generated pairs") {
        examforge::testing::ExpressionGenerator gen(21);
        const std::vector<SampleVar> vars{{"x", 0.1, 2}, {"y", 0.1, 2}, {"z", 0.1, 2}};
        for (int i = 0; i < 200; ++i) {
            Expression a = gen.numeric(3), b = gen.numeric(3);
            auto run = [&](const Expression& p, const Expression& q) -> int {
                try {
                    return equivalent(p, q, vars) ? 1 : 0;
                } catch (const EvalError&) {
                    return -1;
                }
            };
            const int self = run(a, a);
            CHECK((self == 1 || self == -1));
            CHECK(run(a, b) == run(b, a));
        }
    }
}

TEST_SUITE("predicates") {
    TEST_CASE("conditions splice the submission into formula arguments") {
        PredicateScope scope({{"sub", parse("atan((x-3)/2)/pi + 1/2")}}, Corridor{4, 0.001});
        Bindings b = bind({{"k", 2}, {"m", 3}});
        auto holds = [&](const std::string& c) { return evaluate_condition(parse(c), b, scope); };
        CHECK(holds("dependsOn(sub, x)"));
        CHECK(holds("usesFunction(sub, arctan)"));
        CHECK(holds("equivalent(sub, (1/pi)*atan((x-m)/k)+1/2, x, -10, 10)"));
        CHECK(holds("equivalent(argumentOf(sub, atan), (x-m)/k, x, -10, 10)"));
        CHECK(holds("abs(evalAt(sub, x, m) - 1/2) < 1e-12"));
        CHECK(holds("equivalent(sub - atan(argumentOf(sub, atan, 1))/pi, 1/2, x, -10, 10)"));
        CHECK(holds("inCorridor(-1.2662, -1.2672)"));
        CHECK_FALSE(holds("inCorridor(-1.2690, -1.2672)"));
        CHECK_THROWS_AS(holds("argumentOf(sub, sin, 1) > 0"), EvalError);
        CHECK_THROWS_AS(holds("1 + 1"), EvalError);
    }
}

TEST_SUITE("numeric") {
    TEST_CASE("rounding is half away from zero") {
        CHECK(format_fixed(-0.77459, 4) == "-0.7746");
        CHECK(format_fixed(0.00005, 4) == "0.0001");
        CHECK(format_fixed(-0.00005, 4) == "-0.0001");
        CHECK(format_fixed(2.5, 0) == "3");
        CHECK(format_fixed(-0.00001, 4) == "0.0000");
    }

    TEST_CASE("corridor boundaries are inclusive and exact") {
        const Corridor c{4, 0.001};
        CHECK(within_corridor(-1.2662, -1.2672, c));
        CHECK(within_corridor(-1.2682, -1.2672, c));
        CHECK(within_corridor(-1.2665, -1.2672, c));
        CHECK_FALSE(within_corridor(-1.2661, -1.2672, c));
        CHECK_FALSE(within_corridor(-1.2683, -1.2672, c));
        CHECK_FALSE(within_corridor(-1.2690, -1.2672, c));
        CHECK(within_corridor(-1.26724, -1.2672, c));
        CHECK(within_corridor(1.0, 1.00004, Corridor{4, 0}));
        CHECK_FALSE(within_corridor(1.0, 1.00005, Corridor{4, 0}));
    }
}
