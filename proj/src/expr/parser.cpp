#include "examforge/expr/parser.hpp"

#include <cctype>
#include <charconv>
#include <string>
#include <vector>

#include "examforge/expr/errors.hpp"
#include "examforge/expr/functions.hpp"

namespace examforge::expr {

namespace {

enum class Tok {
    Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma,
    Less, LessEqual, Greater, GreaterEqual, EqualEqual, NotEqual, Bang, AndAnd, OrOr,
    End,
};

struct Token {
    Tok type = Tok::End;
    std::size_t pos = 0;
    std::string_view text;
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool digit(char c) { return c >= '0' && c <= '9'; }

std::vector<Token> tokenize(std::string_view s) {
    std::vector<Token> out;
    std::size_t i = 0;
    auto push = [&](Tok t, std::size_t len) {
        out.push_back({t, i, s.substr(i, len)});
        i += len;
    };
    while (i < s.size()) {
        char c = s[i];
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            ++i;
            continue;
        }
        if (digit(c) || (c == '.' && i + 1 < s.size() && digit(s[i + 1]))) {
            std::size_t j = i;
            while (j < s.size() && digit(s[j])) ++j;
            if (j < s.size() && s[j] == '.') {
                ++j;
                while (j < s.size() && digit(s[j])) ++j;
            }
            if (j < s.size() && (s[j] == 'e' || s[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < s.size() && (s[k] == '+' || s[k] == '-')) ++k;
                if (k < s.size() && digit(s[k])) {
                    while (k < s.size() && digit(s[k])) ++k;
                    j = k;
                }
            }
            push(Tok::Number, j - i);
            continue;
        }
        if (ident_start(c)) {
            std::size_t j = i;
            while (j < s.size() && ident_char(s[j])) ++j;
            push(Tok::Ident, j - i);
            continue;
        }
        auto next = i + 1 < s.size() ? s[i + 1] : '\0';
        switch (c) {
            case '+': push(Tok::Plus, 1); continue;
            case '-': push(Tok::Minus, 1); continue;
            case '*': push(Tok::Star, 1); continue;
            case '/': push(Tok::Slash, 1); continue;
            case '^': push(Tok::Caret, 1); continue;
            case '(': push(Tok::LParen, 1); continue;
            case ')': push(Tok::RParen, 1); continue;
            case ',': push(Tok::Comma, 1); continue;
            case '<': next == '=' ? push(Tok::LessEqual, 2) : push(Tok::Less, 1); continue;
            case '>': next == '=' ? push(Tok::GreaterEqual, 2) : push(Tok::Greater, 1); continue;
            case '!': next == '=' ? push(Tok::NotEqual, 2) : push(Tok::Bang, 1); continue;
            case '=':
                if (next == '=') {
                    push(Tok::EqualEqual, 2);
                    continue;
                }
                throw ParseError(i, "unexpected '=' (use '==' to compare)");
            case '&':
                if (next == '&') {
                    push(Tok::AndAnd, 2);
                    continue;
                }
                break;
            case '|':
                if (next == '|') {
                    push(Tok::OrOr, 2);
                    continue;
                }
                break;
            default: break;
        }
        throw ParseError(i, "unexpected character '" + std::string(1, c) + "'");
    }
    out.push_back({Tok::End, s.size(), {}});
    return out;
}

class Parser {
public:
    Parser(std::string_view text, const ParseOptions& options)
        : tokens_(tokenize(text)), options_(options) {}

    Expression run() {
        if (peek().type == Tok::End) throw ParseError(0, "empty expression");
        Expression e = parse_or();
        if (peek().type != Tok::End) fail("unexpected '" + std::string(peek().text) + "'");
        return e;
    }

private:
    const Token& peek() const { return tokens_[pos_]; }
    const Token& advance() { return tokens_[pos_++]; }
    bool accept(Tok t) {
        if (peek().type != t) return false;
        ++pos_;
        return true;
    }

    [[noreturn]] void fail(const std::string& message) const {
        const Token& t = peek();
        if (t.type == Tok::End) throw ParseError(t.pos, message.empty() ? "unexpected end of input" : message);
        throw ParseError(t.pos, message);
    }

    struct DepthGuard {
        explicit DepthGuard(Parser& p) : p(p) {
            if (++p.depth_ > p.options_.max_depth) p.fail("expression nested too deeply");
        }
        ~DepthGuard() { --p.depth_; }
        Parser& p;
    };

    Expression parse_or() {
        DepthGuard guard(*this);
        Expression lhs = parse_and();
        while (accept(Tok::OrOr)) lhs = Expression::logical(Op::Or, lhs, parse_and());
        return lhs;
    }

    Expression parse_and() {
        Expression lhs = parse_not();
        while (accept(Tok::AndAnd)) lhs = Expression::logical(Op::And, lhs, parse_not());
        return lhs;
    }

    Expression parse_not() {
        if (accept(Tok::Bang)) {
            DepthGuard guard(*this);
            return Expression::logical_not(parse_not());
        }
        return parse_comparison();
    }

    static Op comparison_op(Tok t) {
        switch (t) {
            case Tok::Less: return Op::Less;
            case Tok::LessEqual: return Op::LessEqual;
            case Tok::Greater: return Op::Greater;
            case Tok::GreaterEqual: return Op::GreaterEqual;
            case Tok::EqualEqual: return Op::Equal;
            case Tok::NotEqual: return Op::NotEqual;
            default: return Op::None;
        }
    }

    Expression parse_comparison() {
        Expression lhs = parse_additive();
        Op op = comparison_op(peek().type);
        if (op == Op::None) return lhs;
        advance();
        Expression rhs = parse_additive();
        if (comparison_op(peek().type) != Op::None) fail("comparisons do not chain");
        return Expression::comparison(op, lhs, rhs);
    }

    Expression parse_additive() {
        Expression lhs = parse_multiplicative();
        for (;;) {
            if (accept(Tok::Plus)) {
                lhs = Expression::binary(Op::Add, lhs, parse_multiplicative());
            } else if (accept(Tok::Minus)) {
                lhs = Expression::binary(Op::Sub, lhs, parse_multiplicative());
            } else {
                return lhs;
            }
        }
    }

    Expression parse_multiplicative() {
        Expression lhs = parse_unary();
        for (;;) {
            if (accept(Tok::Star)) {
                lhs = Expression::binary(Op::Mul, lhs, parse_unary());
            } else if (accept(Tok::Slash)) {
                lhs = Expression::binary(Op::Div, lhs, parse_unary());
            } else {
                return lhs;
            }
        }
    }

    Expression parse_unary() {
        if (accept(Tok::Minus)) {
            DepthGuard guard(*this);
            return Expression::unary(Op::Neg, parse_unary());
        }
        if (accept(Tok::Plus)) {
            DepthGuard guard(*this);
            return parse_unary();
        }
        return parse_power();
    }

    Expression parse_power() {
        Expression base = parse_primary();
        if (accept(Tok::Caret)) {
            DepthGuard guard(*this);
            return Expression::binary(Op::Pow, base, parse_unary());
        }
        return base;
    }

    Expression parse_number(const Token& t) {
        const char* first = t.text.data();
        const char* last = first + t.text.size();
        bool integral = t.text.find_first_of(".eE") == std::string_view::npos;
        if (integral) {
            std::int64_t v = 0;
            auto [p, ec] = std::from_chars(first, last, v);
            if (ec == std::errc() && p == last) return Expression::integer(v);
        }
        double d = 0.0;
        auto [p, ec] = std::from_chars(first, last, d);
        if (ec != std::errc() || p != last) throw ParseError(t.pos, "number out of range");
        return Expression::real(d);
    }

    Expression parse_primary() {
        const Token& t = peek();
        switch (t.type) {
            case Tok::Number: advance(); return parse_number(t);
            case Tok::Ident: {
                advance();
                if (peek().type == Tok::LParen) return parse_call(t);
                return Expression::identifier(std::string(t.text));
            }
            case Tok::LParen: {
                advance();
                Expression inner = parse_or();
                if (!accept(Tok::RParen)) fail("expected ')'");
                return inner;
            }
            case Tok::End: fail("unexpected end of input");
            default: fail("unexpected '" + std::string(t.text) + "'");
        }
    }

    bool category_allowed(FunctionCategory c) const {
        switch (c) {
            case FunctionCategory::Math: return true;
            case FunctionCategory::Sampling: return options_.allow_sampling;
            case FunctionCategory::Predicate: return options_.allow_predicates;
            case FunctionCategory::Backend: return options_.allow_backend;
        }
        return false;
    }

    Expression parse_call(const Token& name) {
        const FunctionInfo* info = find_function(name.text);
        if (!info || !category_allowed(info->category)) {
            throw ParseError(name.pos, "unknown function '" + std::string(name.text) + "'");
        }
        advance();  // '('
        std::vector<Expression> args;
        std::vector<std::size_t> positions;
        if (!accept(Tok::RParen)) {
            for (;;) {
                positions.push_back(peek().pos);
                args.push_back(parse_or());
                if (accept(Tok::RParen)) break;
                if (!accept(Tok::Comma)) fail("expected ',' or ')'");
            }
        }
        if (!info->accepts_count(args.size())) {
            throw ParseError(name.pos, "wrong number of arguments to '" + info->name + "' (" +
                                           std::to_string(args.size()) + ")");
        }
        for (std::size_t i = 0; i < args.size(); ++i) {
            ArgRole role = info->role_of(i);
            if (role != ArgRole::Name && role != ArgRole::Function) continue;
            if (args[i].kind() != NodeKind::Identifier) {
                throw ParseError(positions[i], "argument " + std::to_string(i + 1) + " of '" +
                                                   info->name + "' must be a name");
            }
            if (role == ArgRole::Function && !find_function(args[i].name())) {
                throw ParseError(positions[i], "unknown function '" + args[i].name() + "'");
            }
        }
        return Expression::call(info->name, std::move(args));
    }

    std::vector<Token> tokens_;
    ParseOptions options_;
    std::size_t pos_ = 0;
    std::size_t depth_ = 0;
};

}  // namespace

Expression parse(std::string_view text, const ParseOptions& options) {
    return Parser(text, options).run();
}

}  // namespace examforge::expr
