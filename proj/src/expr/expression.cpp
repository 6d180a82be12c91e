#include "examforge/expr/expression.hpp"

#include <string>

#include "examforge/expr/value.hpp"

namespace examforge::expr {

const char* op_symbol(Op op) {
    switch (op) {
        case Op::Add: return "+";
        case Op::Sub: return "-";
        case Op::Mul: return "*";
        case Op::Div: return "/";
        case Op::Pow: return "^";
        case Op::Neg: return "-";
        case Op::Not: return "!";
        case Op::And: return "&&";
        case Op::Or: return "||";
        case Op::Less: return "<";
        case Op::LessEqual: return "<=";
        case Op::Greater: return ">";
        case Op::GreaterEqual: return ">=";
        case Op::Equal: return "==";
        case Op::NotEqual: return "!=";
        case Op::None: break;
    }
    return "";
}

namespace {

Expression make(Node node) { return Expression(std::make_shared<const Node>(std::move(node))); }

// Binding strength used by the printer; mirrors the parser's grammar.
enum Level : int {
    kOr = 1,
    kAnd = 2,
    kNot = 3,
    kCompare = 4,
    kAdditive = 5,
    kMultiplicative = 6,
    kNegate = 7,
    kPower = 8,
    kAtom = 9,
};

int level_of(const Expression& e) {
    switch (e.kind()) {
        case NodeKind::Number:
        case NodeKind::Identifier:
        case NodeKind::Call: return kAtom;
        case NodeKind::Unary: return kNegate;
        case NodeKind::Comparison: return kCompare;
        case NodeKind::Logical:
            return e.op() == Op::Not ? kNot : e.op() == Op::And ? kAnd : kOr;
        case NodeKind::Binary:
            switch (e.op()) {
                case Op::Add:
                case Op::Sub: return kAdditive;
                case Op::Mul:
                case Op::Div: return kMultiplicative;
                default: return kPower;
            }
    }
    return kAtom;
}

void write(const Expression& e, int min_level, std::string& out);

void write_child(const Expression& e, int min_level, std::string& out) {
    if (level_of(e) < min_level) {
        out += '(';
        write(e, 0, out);
        out += ')';
    } else {
        write(e, min_level, out);
    }
}

void write_number(const Node& n, std::string& out) {
    if (n.integral) {
        out += std::to_string(n.integer);
        return;
    }
    std::string text = format_double(n.real);
    if (text.find_first_of(".e") == std::string::npos) text += ".0";
    out += text;
}

void write(const Expression& e, int, std::string& out) {
    const Node& n = e.node();
    switch (n.kind) {
        case NodeKind::Number: write_number(n, out); return;
        case NodeKind::Identifier: out += n.name; return;
        case NodeKind::Call:
            out += n.name;
            out += '(';
            for (std::size_t i = 0; i < n.children.size(); ++i) {
                if (i) out += ", ";
                write(n.children[i], 0, out);
            }
            out += ')';
            return;
        case NodeKind::Unary:
            out += '-';
            write_child(n.children[0], kNegate, out);
            return;
        case NodeKind::Logical:
            if (n.op == Op::Not) {
                out += '!';
                write_child(n.children[0], kNot, out);
                return;
            }
            [[fallthrough]];
        case NodeKind::Comparison:
        case NodeKind::Binary: {
            const int level = level_of(e);
            if (n.op == Op::Pow) {
                // Right-assoc; the exponent may itself be a negation.
                write_child(n.children[0], kAtom, out);
                out += '^';
                write_child(n.children[1], kNegate, out);
                return;
            }
            // Comparisons do not chain, so both sides must bind tighter.
            const int left_min = n.kind == NodeKind::Comparison ? level + 1 : level;
            write_child(n.children[0], left_min, out);
            out += ' ';
            out += op_symbol(n.op);
            out += ' ';
            write_child(n.children[1], level + 1, out);
            return;
        }
    }
}

}  // namespace

Expression Expression::integer(std::int64_t v) {
    Node n;
    n.kind = NodeKind::Number;
    n.integral = true;
    n.integer = v;
    return make(std::move(n));
}

Expression Expression::real(double v) {
    Node n;
    n.kind = NodeKind::Number;
    n.real = v;
    return make(std::move(n));
}

Expression Expression::identifier(std::string name) {
    Node n;
    n.kind = NodeKind::Identifier;
    n.name = std::move(name);
    return make(std::move(n));
}

Expression Expression::unary(Op op, Expression operand) {
    Node n;
    n.kind = NodeKind::Unary;
    n.op = op;
    n.children.push_back(std::move(operand));
    return make(std::move(n));
}

Expression Expression::binary(Op op, Expression lhs, Expression rhs) {
    Node n;
    n.kind = NodeKind::Binary;
    n.op = op;
    n.children = {std::move(lhs), std::move(rhs)};
    return make(std::move(n));
}

Expression Expression::call(std::string name, std::vector<Expression> args) {
    Node n;
    n.kind = NodeKind::Call;
    n.name = std::move(name);
    n.children = std::move(args);
    return make(std::move(n));
}

Expression Expression::logical_not(Expression operand) {
    Node n;
    n.kind = NodeKind::Logical;
    n.op = Op::Not;
    n.children.push_back(std::move(operand));
    return make(std::move(n));
}

Expression Expression::logical(Op op, Expression lhs, Expression rhs) {
    Node n;
    n.kind = NodeKind::Logical;
    n.op = op;
    n.children = {std::move(lhs), std::move(rhs)};
    return make(std::move(n));
}

Expression Expression::comparison(Op op, Expression lhs, Expression rhs) {
    Node n;
    n.kind = NodeKind::Comparison;
    n.op = op;
    n.children = {std::move(lhs), std::move(rhs)};
    return make(std::move(n));
}

bool operator==(const Expression& a, const Expression& b) {
    if (a.node_ == b.node_) return true;
    if (!a.node_ || !b.node_) return false;
    const Node& x = *a.node_;
    const Node& y = *b.node_;
    if (x.kind != y.kind || x.op != y.op || x.name != y.name) return false;
    if (x.kind == NodeKind::Number) {
        if (x.integral != y.integral) return false;
        if (x.integral ? x.integer != y.integer : x.real != y.real) return false;
    }
    if (x.children.size() != y.children.size()) return false;
    for (std::size_t i = 0; i < x.children.size(); ++i) {
        if (!(x.children[i] == y.children[i])) return false;
    }
    return true;
}

std::string serialize(const Expression& expr) {
    std::string out;
    write(expr, 0, out);
    return out;
}

}  // namespace examforge::expr
