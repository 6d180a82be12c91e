#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace examforge::expr {

enum class NodeKind {
    Number,      // integer or real literal
    Identifier,
    Unary,       // arithmetic negation
    Binary,      // + - * / ^
    Call,
    Logical,     // ! && ||
    Comparison,  // < <= > >= == !=
};

enum class Op {
    None,
    Add, Sub, Mul, Div, Pow,
    Neg,
    Not, And, Or,
    Less, LessEqual, Greater, GreaterEqual, Equal, NotEqual,
};

const char* op_symbol(Op op);

class Expression;

struct Node {
    NodeKind kind = NodeKind::Number;
    Op op = Op::None;
    bool integral = false;      // Number: literal had no fraction/exponent
    std::int64_t integer = 0;   // Number && integral
    double real = 0.0;          // Number && !integral
    std::string name;           // Identifier or Call (canonical function name)
    std::vector<Expression> children;
};

/// Immutable expression tree. Copies share structure; nothing ever mutates
/// a node after construction, so subtrees can be handed out freely.
class Expression {
public:
    Expression() = default;
    explicit Expression(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

    static Expression integer(std::int64_t v);
    static Expression real(double v);
    static Expression identifier(std::string name);
    static Expression unary(Op op, Expression operand);
    static Expression binary(Op op, Expression lhs, Expression rhs);
    static Expression call(std::string name, std::vector<Expression> args);
    static Expression logical_not(Expression operand);
    static Expression logical(Op op, Expression lhs, Expression rhs);
    static Expression comparison(Op op, Expression lhs, Expression rhs);

    bool valid() const noexcept { return node_ != nullptr; }
    const Node& node() const { return *node_; }
    NodeKind kind() const { return node_->kind; }
    Op op() const { return node_->op; }
    const std::string& name() const { return node_->name; }
    const std::vector<Expression>& children() const { return node_->children; }
    const Expression& child(std::size_t i) const { return node_->children.at(i); }

    /// Structural equality (same shape, ops, names and literal values).
    friend bool operator==(const Expression& a, const Expression& b);

private:
    std::shared_ptr<const Node> node_;
};

/// Canonical infix text: minimal parentheses, lowercase function names,
/// '.' decimal separator. parse(serialize(e)) is structurally equal to e.
std::string serialize(const Expression& expr);

}  // namespace examforge::expr
