#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stla::expr {

enum class NodeKind {
    Variable,
    Constant,
    Neg,
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
};

bool is_unary(NodeKind kind) noexcept;
bool is_binary(NodeKind kind) noexcept;

namespace detail {
struct Node;
}

/// Immutable scalar expression tree over indexed variables.
///
/// Copies share structure. Variables are referenced by their position in the
/// declared variable list of the enclosing system; the name is kept for printing.
class Expr {
public:
    /// The constant 0.
    Expr();

    static Expr variable(std::size_t index, std::string name);
    static Expr constant(double value);

    static Expr unary(NodeKind kind, Expr operand);
    static Expr binary(NodeKind kind, Expr lhs, Expr rhs);
    static Expr power(Expr base, int exponent);

    NodeKind kind() const noexcept;

    /// Constant value; only meaningful for NodeKind::Constant.
    double constant_value() const noexcept;
    /// True for constants holding an exact integer (the rational fast path).
    bool is_integer_constant() const noexcept;
    bool is_constant(double v) const noexcept;

    std::size_t variable_index() const noexcept;
    const std::string& variable_name() const noexcept;

    int exponent() const noexcept;

    /// Operand of unary nodes and the base of Pow.
    const Expr& operand() const noexcept;
    const Expr& lhs() const noexcept;
    const Expr& rhs() const noexcept;

    /// Largest variable index referenced plus one (0 for closed expressions).
    std::size_t arity() const noexcept;

private:
    explicit Expr(std::shared_ptr<const detail::Node> node) : node_(std::move(node)) {}
    const detail::Node& node() const noexcept;

    // Null means the constant 0.
    std::shared_ptr<const detail::Node> node_;
};

// Builders with constant folding and identity elimination (0 + e, 1 * e, e ^ 1, ...).
Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr pow(const Expr& base, int exponent);
Expr sin(const Expr& a);
Expr cos(const Expr& a);
Expr exp(const Expr& a);
Expr ln(const Expr& a);
Expr sqrt(const Expr& a);

/// Named scalar constants substituted at parse time (e.g. r, eps).
using Parameters = std::map<std::string, double, std::less<>>;

/// Parse infix text over the declared variables.
///
/// Grammar: + - * / with the usual precedence, unary minus, sin/cos/exp/ln/sqrt
/// call syntax, and ^ with an integer exponent binding tighter than unary minus.
/// Identifiers resolve first to variables, then to parameters, then to `pi`.
/// Throws SyntaxError (with byte offset) or Error(UnknownVariable).
Expr parse(std::string_view text, std::span<const std::string> vars, const Parameters& params = {});

/// Evaluate at a point with one coordinate per declared variable.
/// Throws Error(Domain) for ln of a non-positive value, sqrt of a negative value,
/// division by zero and negative powers of zero.
double eval_point(const Expr& e, std::span<const double> x);

/// Rule-based derivative with respect to variable `var`.
Expr symbolic_partial(const Expr& e, std::size_t var);

/// Canonical text; parse(print(e)) reproduces e structurally.
std::string print(const Expr& e);

bool structurally_equal(const Expr& a, const Expr& b) noexcept;

/// True when e syntactically references variable `var`.
bool depends_on(const Expr& e, std::size_t var) noexcept;

/// Flattened postfix form of an expression for repeated numeric evaluation.
///
/// Semantics match eval_point exactly, including domain errors.
class Program {
public:
    Program() = default;
    explicit Program(const Expr& e);

    double operator()(std::span<const double> x) const;

    std::size_t size() const noexcept { return code_.size(); }

private:
    struct Instr {
        NodeKind op;
        double value;
        std::size_t index;
        int exponent;
    };
    void emit(const Expr& e, std::size_t& depth);

    std::vector<Instr> code_;
    std::size_t max_depth_ = 0;
};

}  // namespace stla::expr
