#include "dsrfoc/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace dsrfoc::expr {

namespace {

constexpr double kDivFloor = 1e-9;

double protected_div(double a, double b) {
    const double sign = (b < 0.0) ? -1.0 : 1.0;  // sign(0) = +1
    const double mag = std::abs(b);
    return a * sign / (mag > kDivFloor ? mag : kDivFloor);
}

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Expression run() {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError("empty input", pos_);
        Expression e;
        e.tokens = parse_expr();
        skip_ws();
        if (pos_ < text_.size())
            throw ParseError(std::string("unexpected '") + text_[pos_] + "'", pos_);
        if (e.tokens.size() > kMaxLength)
            throw ParseError("expression exceeds maximum length", 0);
        return e;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    std::vector<Token> parse_expr() {
        auto lhs = parse_term();
        while (true) {
            const char c = peek();
            if (c != '+' && c != '-') break;
            ++pos_;
            auto rhs = parse_term();
            lhs = combine(c == '+' ? Op::Add : Op::Sub, std::move(lhs), rhs);
        }
        return lhs;
    }

    std::vector<Token> parse_term() {
        auto lhs = parse_unary();
        while (true) {
            const char c = peek();
            if (c != '*' && c != '/') break;
            ++pos_;
            auto rhs = parse_unary();
            lhs = combine(c == '*' ? Op::Mul : Op::Div, std::move(lhs), rhs);
        }
        return lhs;
    }

    // Unary minus folds into literals; otherwise it desugars to (0 - operand)
    // since the token vocabulary has no negation operator.
    std::vector<Token> parse_unary() {
        if (peek() == '-') {
            ++pos_;
            auto operand = parse_unary();
            if (operand.size() == 1 && operand[0].op == Op::Const)
                return {Token::constant(-operand[0].value)};
            std::vector<Token> out;
            out.reserve(operand.size() + 2);
            out.push_back(Token::operation(Op::Sub));
            out.push_back(Token::constant(0.0));
            out.insert(out.end(), operand.begin(), operand.end());
            return out;
        }
        return parse_primary();
    }

    std::vector<Token> parse_primary() {
        const char c = peek();
        if (c == '\0') throw ParseError("unexpected end of input", pos_);

        if (c == '(') {
            ++pos_;
            auto inner = parse_expr();
            if (peek() != ')') throw ParseError("expected ')'", pos_);
            ++pos_;
            return inner;
        }

        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();

        if (std::isalpha(static_cast<unsigned char>(c))) return parse_identifier();

        throw ParseError(std::string("unexpected '") + c + "'", pos_);
    }

    std::vector<Token> parse_number() {
        double value = 0.0;
        const char* begin = text_.data() + pos_;
        const char* end = text_.data() + text_.size();
        auto [ptr, ec] = std::from_chars(begin, end, value);
        if (ec != std::errc() || !std::isfinite(value))
            throw ParseError("invalid number", pos_);
        pos_ = static_cast<std::size_t>(ptr - text_.data());
        return {Token::constant(value)};
    }

    std::vector<Token> parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        const std::string_view name = text_.substr(start, pos_ - start);

        if (name.size() == 2 && name[0] == 'x' && name[1] >= '1' && name[1] <= '4')
            return {Token::variable(name[1] - '1')};

        if (name == "sin" || name == "cos") {
            if (peek() != '(') throw ParseError("expected '(' after function name", pos_);
            ++pos_;
            auto arg = parse_expr();
            if (peek() != ')') throw ParseError("expected ')'", pos_);
            ++pos_;
            std::vector<Token> out;
            out.reserve(arg.size() + 1);
            out.push_back(Token::operation(name == "sin" ? Op::Sin : Op::Cos));
            out.insert(out.end(), arg.begin(), arg.end());
            return out;
        }

        throw ParseError("unknown identifier '" + std::string(name) + "'", start);
    }

    static std::vector<Token> combine(Op op, std::vector<Token>&& lhs,
                                      const std::vector<Token>& rhs) {
        std::vector<Token> out;
        out.reserve(lhs.size() + rhs.size() + 1);
        out.push_back(Token::operation(op));
        out.insert(out.end(), lhs.begin(), lhs.end());
        out.insert(out.end(), rhs.begin(), rhs.end());
        return out;
    }
};

const char* op_symbol(Op op) {
    switch (op) {
        case Op::Add: return "+";
        case Op::Sub: return "-";
        case Op::Mul: return "*";
        case Op::Div: return "/";
        default: return "?";
    }
}

std::string print_node(std::span<const Token> tokens, std::size_t& cursor) {
    const Token& t = tokens[cursor++];
    switch (t.op) {
        case Op::Var: return "x" + std::to_string(t.var + 1);
        case Op::Const: return format_literal(t.value);
        case Op::Sin:
        case Op::Cos: {
            const std::string arg = print_node(tokens, cursor);
            return std::string(t.op == Op::Sin ? "sin(" : "cos(") + arg + ")";
        }
        default: {
            const std::string lhs = print_node(tokens, cursor);
            const std::string rhs = print_node(tokens, cursor);
            return "(" + lhs + " " + op_symbol(t.op) + " " + rhs + ")";
        }
    }
}

// Evaluation over the prefix sequence; `ok` sticks to false on the first
// non-finite intermediate.
double eval_node(std::span<const Token> tokens, std::size_t& cursor,
                 const std::array<double, 4>& x, bool& ok) noexcept {
    const Token& t = tokens[cursor++];
    double v = 0.0;
    switch (t.op) {
        case Op::Var: v = x[t.var]; break;
        case Op::Const: v = t.value; break;
        case Op::Sin: v = std::sin(eval_node(tokens, cursor, x, ok)); break;
        case Op::Cos: v = std::cos(eval_node(tokens, cursor, x, ok)); break;
        case Op::Add: {
            const double a = eval_node(tokens, cursor, x, ok);
            const double b = eval_node(tokens, cursor, x, ok);
            v = a + b;
            break;
        }
        case Op::Sub: {
            const double a = eval_node(tokens, cursor, x, ok);
            const double b = eval_node(tokens, cursor, x, ok);
            v = a - b;
            break;
        }
        case Op::Mul: {
            const double a = eval_node(tokens, cursor, x, ok);
            const double b = eval_node(tokens, cursor, x, ok);
            v = a * b;
            break;
        }
        case Op::Div: {
            const double a = eval_node(tokens, cursor, x, ok);
            const double b = eval_node(tokens, cursor, x, ok);
            v = protected_div(a, b);
            break;
        }
    }
    if (!std::isfinite(v)) ok = false;
    return v;
}

}  // namespace

bool arity_valid(std::span<const Token> tokens) {
    if (tokens.empty() || tokens.size() > kMaxLength) return false;
    long c = 1;
    for (const Token& t : tokens) {
        if (c <= 0) return false;
        c += t.arity() - 1;
    }
    return c == 0;
}

Expression parse(std::string_view text) {
    return Parser(text).run();
}

std::string to_text(const Expression& e) {
    std::size_t cursor = 0;
    return print_node(e.tokens, cursor);
}

double eval(const Expression& e, const std::array<double, 4>& x) {
    double out = 0.0;
    if (!try_eval(e, x, out)) throw EvalError("non-finite intermediate value");
    return out;
}

bool try_eval(const Expression& e, const std::array<double, 4>& x, double& out) noexcept {
    std::array<double, 4> bound = x;
    if (e.meta) {
        for (int i = 0; i < 4; ++i)
            bound[i] = (x[i] - e.meta->offset[i]) / e.meta->scale[i];
    }
    bool ok = true;
    std::size_t cursor = 0;
    out = eval_node(e.tokens, cursor, bound, ok);
    return ok;
}

std::size_t complexity(const Expression& e) {
    return e.tokens.size();
}

std::string format_literal(double v) {
    char buf[40];
    for (int precision = 1; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

}  // namespace dsrfoc::expr
