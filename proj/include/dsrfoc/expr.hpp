#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dsrfoc::expr {

enum class Op : std::uint8_t { Add, Sub, Mul, Div, Sin, Cos, Var, Const };

/// One prefix-sequence token: a binary/unary operator, a variable x1..x4,
/// or a finite real literal.
struct Token {
    Op op = Op::Const;
    std::uint8_t var = 0;  // variable index 0..3, meaningful when op == Var
    double value = 0.0;    // literal value, meaningful when op == Const

    int arity() const {
        switch (op) {
            case Op::Add:
            case Op::Sub:
            case Op::Mul:
            case Op::Div: return 2;
            case Op::Sin:
            case Op::Cos: return 1;
            default: return 0;
        }
    }

    bool operator==(const Token& other) const {
        if (op != other.op) return false;
        if (op == Op::Var) return var == other.var;
        if (op == Op::Const) return value == other.value;
        return true;
    }

    static Token variable(int index) { return Token{Op::Var, static_cast<std::uint8_t>(index), 0.0}; }
    static Token constant(double v) { return Token{Op::Const, 0, v}; }
    static Token operation(Op o) { return Token{o, 0, 0.0}; }
};

/// Per-variable standardization applied before evaluation:
/// x_scaled = (x - offset) / scale.
struct FeatureScaling {
    std::array<double, 4> offset{0.0, 0.0, 0.0, 0.0};
    std::array<double, 4> scale{1.0, 1.0, 1.0, 1.0};
};

inline constexpr std::size_t kMaxLength = 64;

/// Prefix (pre-order) token sequence. Valid expressions satisfy the arity
/// scan: starting from c = 1, each token maps c -> c - 1 + arity with c > 0
/// before every token and c = 0 exactly at the end.
struct Expression {
    std::vector<Token> tokens;
    std::optional<FeatureScaling> meta;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, std::size_t position)
        : std::runtime_error(msg + " at position " + std::to_string(position)),
          position(position) {}
    std::size_t position;
};

class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

bool arity_valid(std::span<const Token> tokens);

/// Parses infix text (numbers, x1..x4, + - * /, unary minus, sin/cos,
/// parentheses) into a prefix Expression. Throws ParseError with the byte
/// offset of the offending character.
Expression parse(std::string_view text);

/// Fully parenthesized infix text; parse(to_text(e)) is token-identical to e.
std::string to_text(const Expression& e);

/// Evaluates with protected division (divisor magnitude floored at 1e-9,
/// sign(0) = +1). Throws EvalError on a non-finite intermediate value.
double eval(const Expression& e, const std::array<double, 4>& x);

/// Non-throwing evaluation; returns false instead of raising on non-finite
/// intermediates. Used in sampling/training hot paths.
bool try_eval(const Expression& e, const std::array<double, 4>& x, double& out) noexcept;

/// Token count.
std::size_t complexity(const Expression& e);

/// Shortest decimal text that parses back to exactly v.
std::string format_literal(double v);

}  // namespace dsrfoc::expr
