#include "stla/expr.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>

#include "stla/error.hpp"

namespace stla::expr {

namespace detail {

struct Node {
    NodeKind kind = NodeKind::Constant;
    double value = 0.0;
    bool integer = true;
    std::size_t index = 0;
    std::string name;
    int exponent = 0;
    Expr a;
    Expr b;
    std::size_t arity = 0;
};

}  // namespace detail

namespace {

bool integral(double v) {
    return std::isfinite(v) && std::trunc(v) == v && std::fabs(v) < 9007199254740992.0;
}

// Exponentiation by squaring; shared by every numeric evaluation path.
double int_pow(double base, int n) {
    if (n < 0) {
        if (base == 0.0) raise(ErrorKind::Domain, "negative power of zero");
        return 1.0 / int_pow(base, -n);
    }
    double result = 1.0;
    double b = base;
    unsigned k = static_cast<unsigned>(n);
    while (k != 0) {
        if (k & 1u) result *= b;
        k >>= 1u;
        if (k != 0) b *= b;
    }
    return result;
}

double apply_unary(NodeKind kind, double a) {
    switch (kind) {
        case NodeKind::Neg: return -a;
        case NodeKind::Sin: return std::sin(a);
        case NodeKind::Cos: return std::cos(a);
        case NodeKind::Exp: return std::exp(a);
        case NodeKind::Ln:
            if (!(a > 0.0)) raise(ErrorKind::Domain, "ln of non-positive value");
            return std::log(a);
        case NodeKind::Sqrt:
            if (a < 0.0) raise(ErrorKind::Domain, "sqrt of negative value");
            return std::sqrt(a);
        default: break;
    }
    raise(ErrorKind::Domain, "not a unary node");
}

double apply_binary(NodeKind kind, double a, double b) {
    switch (kind) {
        case NodeKind::Add: return a + b;
        case NodeKind::Sub: return a - b;
        case NodeKind::Mul: return a * b;
        case NodeKind::Div:
            if (b == 0.0) raise(ErrorKind::Domain, "division by zero");
            return a / b;
        default: break;
    }
    raise(ErrorKind::Domain, "not a binary node");
}

std::string_view function_name(NodeKind kind) {
    switch (kind) {
        case NodeKind::Sin: return "sin";
        case NodeKind::Cos: return "cos";
        case NodeKind::Exp: return "exp";
        case NodeKind::Ln: return "ln";
        case NodeKind::Sqrt: return "sqrt";
        default: return "";
    }
}

char operator_symbol(NodeKind kind) {
    switch (kind) {
        case NodeKind::Add: return '+';
        case NodeKind::Sub: return '-';
        case NodeKind::Mul: return '*';
        case NodeKind::Div: return '/';
        default: return '?';
    }
}

}  // namespace

bool is_unary(NodeKind kind) noexcept {
    switch (kind) {
        case NodeKind::Neg:
        case NodeKind::Sin:
        case NodeKind::Cos:
        case NodeKind::Exp:
        case NodeKind::Ln:
        case NodeKind::Sqrt: return true;
        default: return false;
    }
}

bool is_binary(NodeKind kind) noexcept {
    switch (kind) {
        case NodeKind::Add:
        case NodeKind::Sub:
        case NodeKind::Mul:
        case NodeKind::Div: return true;
        default: return false;
    }
}

namespace {
const detail::Node kZeroNode{};
}

Expr::Expr() = default;

const detail::Node& Expr::node() const noexcept { return node_ ? *node_ : kZeroNode; }

Expr Expr::variable(std::size_t index, std::string name) {
    auto n = std::make_shared<detail::Node>();
    n->kind = NodeKind::Variable;
    n->index = index;
    n->name = std::move(name);
    n->arity = index + 1;
    return Expr(std::move(n));
}

Expr Expr::constant(double value) {
    auto n = std::make_shared<detail::Node>();
    n->kind = NodeKind::Constant;
    n->value = value;
    n->integer = integral(value);
    return Expr(std::move(n));
}

Expr Expr::unary(NodeKind kind, Expr operand) {
    if (!is_unary(kind)) throw std::invalid_argument("Expr::unary: not a unary kind");
    auto n = std::make_shared<detail::Node>();
    n->kind = kind;
    n->arity = operand.arity();
    n->a = std::move(operand);
    return Expr(std::move(n));
}

Expr Expr::binary(NodeKind kind, Expr lhs, Expr rhs) {
    if (!is_binary(kind)) throw std::invalid_argument("Expr::binary: not a binary kind");
    auto n = std::make_shared<detail::Node>();
    n->kind = kind;
    n->arity = std::max(lhs.arity(), rhs.arity());
    n->a = std::move(lhs);
    n->b = std::move(rhs);
    return Expr(std::move(n));
}

Expr Expr::power(Expr base, int exponent) {
    auto n = std::make_shared<detail::Node>();
    n->kind = NodeKind::Pow;
    n->arity = base.arity();
    n->exponent = exponent;
    n->a = std::move(base);
    return Expr(std::move(n));
}

NodeKind Expr::kind() const noexcept { return node().kind; }
double Expr::constant_value() const noexcept { return node().value; }
bool Expr::is_integer_constant() const noexcept { return node().kind == NodeKind::Constant && node().integer; }
bool Expr::is_constant(double v) const noexcept { return node().kind == NodeKind::Constant && node().value == v; }
std::size_t Expr::variable_index() const noexcept { return node().index; }
const std::string& Expr::variable_name() const noexcept { return node().name; }
int Expr::exponent() const noexcept { return node().exponent; }
const Expr& Expr::operand() const noexcept { return node().a; }
const Expr& Expr::lhs() const noexcept { return node().a; }
const Expr& Expr::rhs() const noexcept { return node().b; }
std::size_t Expr::arity() const noexcept { return node().arity; }

// ---- folding builders -------------------------------------------------------

Expr operator+(const Expr& a, const Expr& b) {
    if (a.kind() == NodeKind::Constant && b.kind() == NodeKind::Constant)
        return Expr::constant(a.constant_value() + b.constant_value());
    if (a.is_constant(0.0)) return b;
    if (b.is_constant(0.0)) return a;
    return Expr::binary(NodeKind::Add, a, b);
}

Expr operator-(const Expr& a, const Expr& b) {
    if (a.kind() == NodeKind::Constant && b.kind() == NodeKind::Constant)
        return Expr::constant(a.constant_value() - b.constant_value());
    if (b.is_constant(0.0)) return a;
    if (a.is_constant(0.0)) return -b;
    return Expr::binary(NodeKind::Sub, a, b);
}

Expr operator*(const Expr& a, const Expr& b) {
    if (a.kind() == NodeKind::Constant && b.kind() == NodeKind::Constant)
        return Expr::constant(a.constant_value() * b.constant_value());
    if (a.is_constant(0.0) || b.is_constant(0.0)) return Expr::constant(0.0);
    if (a.is_constant(1.0)) return b;
    if (b.is_constant(1.0)) return a;
    if (a.is_constant(-1.0)) return -b;
    if (b.is_constant(-1.0)) return -a;
    return Expr::binary(NodeKind::Mul, a, b);
}

Expr operator/(const Expr& a, const Expr& b) {
    if (b.is_constant(1.0)) return a;
    if (a.kind() == NodeKind::Constant && b.kind() == NodeKind::Constant && b.constant_value() != 0.0)
        return Expr::constant(a.constant_value() / b.constant_value());
    if (a.is_constant(0.0) && b.kind() == NodeKind::Constant && b.constant_value() != 0.0)
        return Expr::constant(0.0);
    return Expr::binary(NodeKind::Div, a, b);
}

Expr operator-(const Expr& a) {
    if (a.kind() == NodeKind::Constant) return Expr::constant(-a.constant_value());
    if (a.kind() == NodeKind::Neg) return a.operand();
    return Expr::unary(NodeKind::Neg, a);
}

Expr pow(const Expr& base, int exponent) {
    if (exponent == 0) return Expr::constant(1.0);
    if (exponent == 1) return base;
    if (base.kind() == NodeKind::Constant && !(base.constant_value() == 0.0 && exponent < 0))
        return Expr::constant(int_pow(base.constant_value(), exponent));
    return Expr::power(base, exponent);
}

namespace {

Expr fold_unary(NodeKind kind, const Expr& a) {
    if (a.kind() == NodeKind::Constant) {
        const double v = a.constant_value();
        const bool ok = (kind != NodeKind::Ln || v > 0.0) && (kind != NodeKind::Sqrt || v >= 0.0);
        if (ok) return Expr::constant(apply_unary(kind, v));
    }
    return Expr::unary(kind, a);
}

}  // namespace

Expr sin(const Expr& a) { return fold_unary(NodeKind::Sin, a); }
Expr cos(const Expr& a) { return fold_unary(NodeKind::Cos, a); }
Expr exp(const Expr& a) { return fold_unary(NodeKind::Exp, a); }
Expr ln(const Expr& a) { return fold_unary(NodeKind::Ln, a); }
Expr sqrt(const Expr& a) { return fold_unary(NodeKind::Sqrt, a); }

// ---- evaluation ---------------------------------------------------------------

double eval_point(const Expr& e, std::span<const double> x) {
    switch (e.kind()) {
        case NodeKind::Variable:
            if (e.variable_index() >= x.size())
                raise(ErrorKind::DimensionMismatch, "point has fewer coordinates than variable '" +
                                                        e.variable_name() + "' requires");
            return x[e.variable_index()];
        case NodeKind::Constant: return e.constant_value();
        case NodeKind::Pow: return int_pow(eval_point(e.operand(), x), e.exponent());
        default: break;
    }
    if (is_unary(e.kind())) return apply_unary(e.kind(), eval_point(e.operand(), x));
    const double a = eval_point(e.lhs(), x);
    const double b = eval_point(e.rhs(), x);
    return apply_binary(e.kind(), a, b);
}

// ---- differentiation ------------------------------------------------------------

Expr symbolic_partial(const Expr& e, std::size_t var) {
    switch (e.kind()) {
        case NodeKind::Variable: return Expr::constant(e.variable_index() == var ? 1.0 : 0.0);
        case NodeKind::Constant: return Expr::constant(0.0);
        case NodeKind::Neg: return -symbolic_partial(e.operand(), var);
        case NodeKind::Sin: return cos(e.operand()) * symbolic_partial(e.operand(), var);
        case NodeKind::Cos: return -(sin(e.operand()) * symbolic_partial(e.operand(), var));
        case NodeKind::Exp: return e * symbolic_partial(e.operand(), var);
        case NodeKind::Ln: return symbolic_partial(e.operand(), var) / e.operand();
        case NodeKind::Sqrt: return symbolic_partial(e.operand(), var) / (Expr::constant(2.0) * e);
        case NodeKind::Add: return symbolic_partial(e.lhs(), var) + symbolic_partial(e.rhs(), var);
        case NodeKind::Sub: return symbolic_partial(e.lhs(), var) - symbolic_partial(e.rhs(), var);
        case NodeKind::Mul:
            return symbolic_partial(e.lhs(), var) * e.rhs() + e.lhs() * symbolic_partial(e.rhs(), var);
        case NodeKind::Div: {
            const Expr num = symbolic_partial(e.lhs(), var) * e.rhs() - e.lhs() * symbolic_partial(e.rhs(), var);
            return num / pow(e.rhs(), 2);
        }
        case NodeKind::Pow: {
            const Expr inner = symbolic_partial(e.operand(), var);
            if (inner.is_constant(0.0)) return Expr::constant(0.0);
            const int n = e.exponent();
            return Expr::constant(static_cast<double>(n)) * pow(e.operand(), n - 1) * inner;
        }
    }
    return Expr::constant(0.0);
}

// ---- printing / comparison --------------------------------------------------------

namespace {

std::string format_number(double v) {
    std::array<char, 40> buf{};
    if (integral(v) && std::fabs(v) < 1e15)
        std::snprintf(buf.data(), buf.size(), "%.0f", std::fabs(v));
    else
        std::snprintf(buf.data(), buf.size(), "%.17g", std::fabs(v));
    std::string s(buf.data());
    return std::signbit(v) && v != 0.0 ? "(-" + s + ")" : s;
}

void print_into(const Expr& e, std::string& out) {
    switch (e.kind()) {
        case NodeKind::Variable: out += e.variable_name(); return;
        case NodeKind::Constant: out += format_number(e.constant_value()); return;
        case NodeKind::Neg:
            out += "(-";
            print_into(e.operand(), out);
            out += ')';
            return;
        case NodeKind::Pow:
            print_into(e.operand(), out);
            out += '^';
            if (e.exponent() < 0)
                out += "(" + std::to_string(e.exponent()) + ")";
            else
                out += std::to_string(e.exponent());
            return;
        default: break;
    }
    if (is_unary(e.kind())) {
        out += function_name(e.kind());
        out += '(';
        print_into(e.operand(), out);
        out += ')';
        return;
    }
    out += '(';
    print_into(e.lhs(), out);
    out += ' ';
    out += operator_symbol(e.kind());
    out += ' ';
    print_into(e.rhs(), out);
    out += ')';
}

}  // namespace

std::string print(const Expr& e) {
    std::string out;
    print_into(e, out);
    return out;
}

bool structurally_equal(const Expr& a, const Expr& b) noexcept {
    if (a.kind() != b.kind()) return false;
    switch (a.kind()) {
        case NodeKind::Variable: return a.variable_index() == b.variable_index();
        case NodeKind::Constant:
            return std::bit_cast<std::uint64_t>(a.constant_value()) == std::bit_cast<std::uint64_t>(b.constant_value());
        case NodeKind::Pow: return a.exponent() == b.exponent() && structurally_equal(a.operand(), b.operand());
        default: break;
    }
    if (is_unary(a.kind())) return structurally_equal(a.operand(), b.operand());
    return structurally_equal(a.lhs(), b.lhs()) && structurally_equal(a.rhs(), b.rhs());
}

bool depends_on(const Expr& e, std::size_t var) noexcept {
    switch (e.kind()) {
        case NodeKind::Variable: return e.variable_index() == var;
        case NodeKind::Constant: return false;
        default: break;
    }
    if (is_unary(e.kind()) || e.kind() == NodeKind::Pow) return depends_on(e.operand(), var);
    return depends_on(e.lhs(), var) || depends_on(e.rhs(), var);
}

// ---- compiled evaluation ------------------------------------------------------------

void Program::emit(const Expr& e, std::size_t& depth) {
    const auto push = [&] { max_depth_ = std::max(max_depth_, ++depth); };
    switch (e.kind()) {
        case NodeKind::Variable:
            code_.push_back({e.kind(), 0.0, e.variable_index(), 0});
            push();
            return;
        case NodeKind::Constant:
            code_.push_back({e.kind(), e.constant_value(), 0, 0});
            push();
            return;
        case NodeKind::Pow:
            emit(e.operand(), depth);
            code_.push_back({e.kind(), 0.0, 0, e.exponent()});
            return;
        default: break;
    }
    if (is_unary(e.kind())) {
        emit(e.operand(), depth);
        code_.push_back({e.kind(), 0.0, 0, 0});
        return;
    }
    emit(e.lhs(), depth);
    emit(e.rhs(), depth);
    code_.push_back({e.kind(), 0.0, 0, 0});
    --depth;
}

Program::Program(const Expr& e) {
    std::size_t depth = 0;
    emit(e, depth);
}

double Program::operator()(std::span<const double> x) const {
    if (code_.empty()) return 0.0;
    constexpr std::size_t kInline = 64;
    std::array<double, kInline> inline_stack;
    std::vector<double> heap_stack;
    double* stack = inline_stack.data();
    if (max_depth_ > kInline) {
        heap_stack.resize(max_depth_);
        stack = heap_stack.data();
    }
    std::size_t top = 0;
    for (const Instr& in : code_) {
        switch (in.op) {
            case NodeKind::Variable:
                if (in.index >= x.size()) raise(ErrorKind::DimensionMismatch, "point has too few coordinates");
                stack[top++] = x[in.index];
                break;
            case NodeKind::Constant: stack[top++] = in.value; break;
            case NodeKind::Pow: stack[top - 1] = int_pow(stack[top - 1], in.exponent); break;
            case NodeKind::Add:
            case NodeKind::Sub:
            case NodeKind::Mul:
            case NodeKind::Div:
                stack[top - 2] = apply_binary(in.op, stack[top - 2], stack[top - 1]);
                --top;
                break;
            default: stack[top - 1] = apply_unary(in.op, stack[top - 1]); break;
        }
    }
    return stack[0];
}

}  // namespace stla::expr
