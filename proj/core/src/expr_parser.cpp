#include <cctype>
#include <charconv>
#include <numbers>

#include "stla/error.hpp"
#include "stla/expr.hpp"

namespace stla::expr {

namespace {

// Recursive descent over:
//   sum     := product (('+' | '-') product)*
//   product := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' integer)?
//   primary := number | identifier | function '(' sum ')' | '(' sum ')'
class Parser {
public:
    Parser(std::string_view text, std::span<const std::string> vars, const Parameters& params)
        : text_(text), vars_(vars), params_(params) {}

    Expr run() {
        skip_ws();
        if (at_end()) throw SyntaxError(pos_, "empty expression");
        Expr e = sum();
        skip_ws();
        if (!at_end()) throw SyntaxError(pos_, std::string("unexpected character '") + text_[pos_] + "'");
        return e;
    }

private:
    bool at_end() const { return pos_ >= text_.size(); }
    char peek() const { return at_end() ? '\0' : text_[pos_]; }

    void skip_ws() {
        while (!at_end() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (peek() == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) throw SyntaxError(pos_, std::string("expected '") + c + "'");
    }

    Expr sum() {
        Expr e = product();
        for (;;) {
            if (accept('+'))
                e = Expr::binary(NodeKind::Add, e, product());
            else if (accept('-'))
                e = Expr::binary(NodeKind::Sub, e, product());
            else
                return e;
        }
    }

    Expr product() {
        Expr e = unary();
        for (;;) {
            if (accept('*'))
                e = Expr::binary(NodeKind::Mul, e, unary());
            else if (accept('/'))
                e = Expr::binary(NodeKind::Div, e, unary());
            else
                return e;
        }
    }

    Expr unary() {
        if (accept('-')) {
            Expr operand = unary();
            if (operand.kind() == NodeKind::Constant) return Expr::constant(-operand.constant_value());
            return Expr::unary(NodeKind::Neg, operand);
        }
        if (accept('+')) return unary();
        return power();
    }

    Expr power() {
        Expr base = primary();
        if (!accept('^')) return base;
        const int n = integer_exponent();
        skip_ws();
        if (peek() == '^') throw SyntaxError(pos_, "chained exponent; use parentheses");
        return Expr::power(base, n);
    }

    int integer_exponent() {
        skip_ws();
        const bool paren = accept('(');
        skip_ws();
        bool negative = false;
        if (peek() == '-' || peek() == '+') {
            negative = peek() == '-';
            ++pos_;
            skip_ws();
        }
        const std::size_t start = pos_;
        while (!at_end() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        if (start == pos_) throw SyntaxError(pos_, "exponent must be an integer literal");
        if (peek() == '.' || peek() == 'e' || peek() == 'E')
            throw SyntaxError(pos_, "non-integer exponent");
        int value = 0;
        const auto res = std::from_chars(text_.data() + start, text_.data() + pos_, value);
        if (res.ec != std::errc{}) throw SyntaxError(start, "exponent out of range");
        if (paren) expect(')');
        return negative ? -value : value;
    }

    Expr primary() {
        skip_ws();
        const char c = peek();
        if (c == '(') {
            ++pos_;
            Expr e = sum();
            expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        if (at_end()) throw SyntaxError(pos_, "unexpected end of expression");
        throw SyntaxError(pos_, std::string("unexpected character '") + c + "'");
    }

    Expr number() {
        const std::size_t start = pos_;
        double value = 0.0;
        const auto res = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), value);
        if (res.ec != std::errc{}) throw SyntaxError(start, "malformed number");
        pos_ = static_cast<std::size_t>(res.ptr - text_.data());
        return Expr::constant(value);
    }

    Expr identifier() {
        const std::size_t start = pos_;
        while (!at_end() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
        const std::string_view name = text_.substr(start, pos_ - start);

        skip_ws();
        if (peek() == '(') {
            NodeKind kind{};
            if (name == "sin")
                kind = NodeKind::Sin;
            else if (name == "cos")
                kind = NodeKind::Cos;
            else if (name == "exp")
                kind = NodeKind::Exp;
            else if (name == "ln" || name == "log")
                kind = NodeKind::Ln;
            else if (name == "sqrt")
                kind = NodeKind::Sqrt;
            else
                throw SyntaxError(start, "unknown function '" + std::string(name) + "'");
            ++pos_;
            Expr arg = sum();
            expect(')');
            return Expr::unary(kind, arg);
        }

        for (std::size_t i = 0; i < vars_.size(); ++i)
            if (vars_[i] == name) return Expr::variable(i, vars_[i]);
        if (const auto it = params_.find(name); it != params_.end()) return Expr::constant(it->second);
        if (name == "pi") return Expr::constant(std::numbers::pi);
        raise(ErrorKind::UnknownVariable, "unknown variable '" + std::string(name) + "'");
    }

    std::string_view text_;
    std::span<const std::string> vars_;
    const Parameters& params_;
    std::size_t pos_ = 0;
};

}  // namespace

Expr parse(std::string_view text, std::span<const std::string> vars, const Parameters& params) {
    return Parser(text, vars, params).run();
}

}  // namespace stla::expr
