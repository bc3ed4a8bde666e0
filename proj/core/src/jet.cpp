#include "stla/jet.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "stla/error.hpp"

namespace stla::jet {

MultiIndex MultiIndex::unit(std::size_t i) {
    MultiIndex m;
    m.e_[i] = 1;
    return m;
}

int MultiIndex::total() const noexcept {
    int t = 0;
    for (auto v : e_) t += v;
    return t;
}

double MultiIndex::factorial() const noexcept {
    double f = 1.0;
    for (auto v : e_)
        for (int k = 2; k <= v; ++k) f *= k;
    return f;
}

MultiIndex MultiIndex::operator+(const MultiIndex& o) const noexcept {
    MultiIndex r;
    for (std::size_t i = 0; i < kMaxVars; ++i) r.e_[i] = static_cast<std::uint8_t>(e_[i] + o.e_[i]);
    return r;
}

// ---- TruncatedPoly ---------------------------------------------------------------

TruncatedPoly::TruncatedPoly(std::size_t n_vars, int degree_cap) : n_vars_(n_vars), cap_(degree_cap) {
    if (n_vars > kMaxVars)
        raise(ErrorKind::DimensionMismatch, "germs support at most " + std::to_string(kMaxVars) + " variables");
    if (degree_cap < 0) raise(ErrorKind::InsufficientOrder, "negative degree cap");
}

TruncatedPoly TruncatedPoly::constant(std::size_t n_vars, int degree_cap, double c) {
    TruncatedPoly p(n_vars, degree_cap);
    p.set_coefficient(MultiIndex{}, c);
    return p;
}

TruncatedPoly TruncatedPoly::coordinate(std::size_t n_vars, int degree_cap, std::size_t i, double c) {
    TruncatedPoly p = constant(n_vars, degree_cap, c);
    if (degree_cap >= 1) p.set_coefficient(MultiIndex::unit(i), 1.0);
    return p;
}

double TruncatedPoly::coefficient(const MultiIndex& alpha) const {
    const auto it = terms_.find(alpha);
    return it == terms_.end() ? 0.0 : it->second;
}

void TruncatedPoly::set_coefficient(const MultiIndex& alpha, double value) {
    if (alpha.total() > cap_) return;
    if (value == 0.0)
        terms_.erase(alpha);
    else
        terms_[alpha] = value;
}

void TruncatedPoly::add_to_coefficient(const MultiIndex& alpha, double value) {
    if (alpha.total() > cap_ || value == 0.0) return;
    auto [it, inserted] = terms_.try_emplace(alpha, value);
    if (!inserted) {
        it->second += value;
        if (it->second == 0.0) terms_.erase(it);
    }
}

double TruncatedPoly::value() const { return coefficient(MultiIndex{}); }

double TruncatedPoly::max_abs_coefficient() const noexcept {
    double m = 0.0;
    for (const auto& [alpha, c] : terms_) m = std::max(m, std::fabs(c));
    return m;
}

TruncatedPoly TruncatedPoly::partial(std::size_t i) const {
    if (cap_ < 1) raise(ErrorKind::InsufficientOrder, "partial derivative of a degree-0 germ");
    if (i >= n_vars_) raise(ErrorKind::DimensionMismatch, "partial: variable index out of range");
    TruncatedPoly r(n_vars_, cap_ - 1);
    for (const auto& [alpha, c] : terms_) {
        if (alpha[i] == 0) continue;
        MultiIndex beta = alpha;
        beta[i] = static_cast<std::uint8_t>(beta[i] - 1);
        r.add_to_coefficient(beta, c * alpha[i]);
    }
    return r;
}

TruncatedPoly TruncatedPoly::truncated(int degree_cap) const {
    TruncatedPoly r(n_vars_, std::min(degree_cap, cap_));
    for (const auto& [alpha, c] : terms_)
        if (alpha.total() <= r.cap_) r.terms_.emplace(alpha, c);
    return r;
}

TruncatedPoly TruncatedPoly::compose(std::span<const double> series) const {
    // Horner in the zero-mean part: sum_j c_j d^j with d = p - p(0).
    TruncatedPoly d = *this;
    d.terms_.erase(MultiIndex{});
    TruncatedPoly r = constant(n_vars_, cap_, series.empty() ? 0.0 : series.back());
    for (std::size_t j = series.size(); j-- > 1;) {
        r = r * d;
        r.add_to_coefficient(MultiIndex{}, series[j - 1]);
    }
    return r;
}

bool TruncatedPoly::involves(std::size_t i, double tol) const {
    for (const auto& [alpha, c] : terms_)
        if (alpha[i] > 0 && std::fabs(c) > tol) return true;
    return false;
}

void TruncatedPoly::check_compatible(const TruncatedPoly& o) const {
    if (n_vars_ != o.n_vars_) raise(ErrorKind::DimensionMismatch, "germs over different numbers of variables");
}

TruncatedPoly& TruncatedPoly::operator+=(const TruncatedPoly& o) {
    check_compatible(o);
    if (o.cap_ < cap_) *this = truncated(o.cap_);
    for (const auto& [alpha, c] : o.terms_) add_to_coefficient(alpha, c);
    return *this;
}

TruncatedPoly& TruncatedPoly::operator-=(const TruncatedPoly& o) {
    check_compatible(o);
    if (o.cap_ < cap_) *this = truncated(o.cap_);
    for (const auto& [alpha, c] : o.terms_) add_to_coefficient(alpha, -c);
    return *this;
}

TruncatedPoly& TruncatedPoly::operator*=(double s) {
    if (s == 0.0) {
        terms_.clear();
        return *this;
    }
    for (auto& [alpha, c] : terms_) c *= s;
    return *this;
}

TruncatedPoly operator+(TruncatedPoly a, const TruncatedPoly& b) { return a += b; }
TruncatedPoly operator-(TruncatedPoly a, const TruncatedPoly& b) { return a -= b; }
TruncatedPoly operator-(TruncatedPoly a) { return a *= -1.0; }
TruncatedPoly operator*(TruncatedPoly a, double s) { return a *= s; }
TruncatedPoly operator*(double s, TruncatedPoly a) { return a *= s; }

TruncatedPoly operator*(const TruncatedPoly& a, const TruncatedPoly& b) {
    a.check_compatible(b);
    TruncatedPoly r(a.n_vars_, std::min(a.cap_, b.cap_));
    for (const auto& [alpha, ca] : a.terms_) {
        const int da = alpha.total();
        if (da > r.cap_) continue;
        for (const auto& [beta, cb] : b.terms_) {
            if (da + beta.total() > r.cap_) continue;
            r.add_to_coefficient(alpha + beta, ca * cb);
        }
    }
    return r;
}

// ---- elementary functions via univariate Maclaurin composition ---------------------

namespace {

std::vector<double> series_exp(double t0, int d) {
    std::vector<double> c(d + 1);
    double f = std::exp(t0);
    for (int j = 0; j <= d; ++j) {
        c[j] = f;
        f /= (j + 1);
    }
    return c;
}

std::vector<double> series_sin_cos(double t0, int d, bool cosine) {
    // k-th derivative of sin is sin(t + k pi/2); cos(t) = sin(t + pi/2).
    const double s = std::sin(t0);
    const double co = std::cos(t0);
    const std::array<double, 4> cycle{s, co, -s, -co};
    std::vector<double> c(d + 1);
    double fact = 1.0;
    for (int j = 0; j <= d; ++j) {
        if (j > 0) fact *= j;
        c[j] = cycle[(j + (cosine ? 1 : 0)) % 4] / fact;
    }
    return c;
}

std::vector<double> series_ln(double t0, int d) {
    if (!(t0 > 0.0)) raise(ErrorKind::Domain, "ln of non-positive value");
    std::vector<double> c(d + 1);
    c[0] = std::log(t0);
    double p = 1.0;
    for (int j = 1; j <= d; ++j) {
        p *= t0;
        c[j] = ((j % 2 == 1) ? 1.0 : -1.0) / (j * p);
    }
    return c;
}

std::vector<double> series_sqrt(double t0, int d) {
    if (t0 < 0.0) raise(ErrorKind::Domain, "sqrt of negative value");
    if (t0 == 0.0 && d > 0) raise(ErrorKind::Domain, "sqrt is not smooth at 0");
    std::vector<double> c(d + 1);
    const double root = std::sqrt(t0);
    double binom = 1.0;
    double p = 1.0;
    for (int j = 0; j <= d; ++j) {
        if (j > 0) {
            binom *= (0.5 - (j - 1)) / j;
            p *= t0;
        }
        c[j] = root * binom / p;
    }
    return c;
}

std::vector<double> series_reciprocal(double t0, int d) {
    if (t0 == 0.0) raise(ErrorKind::Domain, "division by zero");
    std::vector<double> c(d + 1);
    double p = 1.0 / t0;
    for (int j = 0; j <= d; ++j) {
        c[j] = (j % 2 == 0 ? p : -p);
        p /= t0;
    }
    return c;
}

}  // namespace

TruncatedPoly pow(const TruncatedPoly& a, int n) {
    if (n < 0) return pow(reciprocal(a), -n);
    TruncatedPoly result = TruncatedPoly::constant(a.n_vars(), a.degree_cap(), 1.0);
    TruncatedPoly base = a;
    unsigned k = static_cast<unsigned>(n);
    while (k != 0) {
        if (k & 1u) result = result * base;
        k >>= 1u;
        if (k != 0) base = base * base;
    }
    return result;
}

TruncatedPoly reciprocal(const TruncatedPoly& a) { return a.compose(series_reciprocal(a.value(), a.degree_cap())); }
TruncatedPoly sin(const TruncatedPoly& a) { return a.compose(series_sin_cos(a.value(), a.degree_cap(), false)); }
TruncatedPoly cos(const TruncatedPoly& a) { return a.compose(series_sin_cos(a.value(), a.degree_cap(), true)); }
TruncatedPoly exp(const TruncatedPoly& a) { return a.compose(series_exp(a.value(), a.degree_cap())); }
TruncatedPoly ln(const TruncatedPoly& a) { return a.compose(series_ln(a.value(), a.degree_cap())); }
TruncatedPoly sqrt(const TruncatedPoly& a) { return a.compose(series_sqrt(a.value(), a.degree_cap())); }

std::string to_string(const TruncatedPoly& p) {
    std::vector<std::pair<MultiIndex, double>> sorted(p.terms().begin(), p.terms().end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto& l, const auto& r) { return l.first.total() < r.first.total(); });
    std::ostringstream os;
    os.precision(17);
    bool first = true;
    for (const auto& [alpha, c] : sorted) {
        if (!first) os << " + ";
        first = false;
        os << c;
        for (std::size_t i = 0; i < p.n_vars(); ++i) {
            if (alpha[i] == 0) continue;
            os << "*xi" << (i + 1);
            if (alpha[i] > 1) os << '^' << static_cast<int>(alpha[i]);
        }
    }
    if (first) os << '0';
    os << "  [cap " << p.degree_cap() << ']';
    return os.str();
}

// ---- germs ----------------------------------------------------------------------------

int VectorGerm::degree_cap() const {
    int cap = components.empty() ? 0 : components.front().degree_cap();
    for (const auto& c : components) cap = std::min(cap, c.degree_cap());
    return cap;
}

std::vector<double> VectorGerm::value() const {
    std::vector<double> v;
    v.reserve(components.size());
    for (const auto& c : components) v.push_back(c.value());
    return v;
}

VectorGerm VectorGerm::operator-() const {
    VectorGerm r = *this;
    for (auto& c : r.components) c *= -1.0;
    return r;
}

namespace {

void check_same(const VectorGerm& a, const VectorGerm& b) {
    if (a.dim() != b.dim()) raise(ErrorKind::DimensionMismatch, "vector germs of different dimension");
    if (a.base != b.base) raise(ErrorKind::DimensionMismatch, "vector germs at different base points");
}

}  // namespace

VectorGerm operator+(const VectorGerm& a, const VectorGerm& b) {
    check_same(a, b);
    VectorGerm r = a;
    for (std::size_t i = 0; i < r.dim(); ++i) r.components[i] += b.components[i];
    return r;
}

VectorGerm operator-(const VectorGerm& a, const VectorGerm& b) {
    check_same(a, b);
    VectorGerm r = a;
    for (std::size_t i = 0; i < r.dim(); ++i) r.components[i] -= b.components[i];
    return r;
}

VectorGerm operator*(double s, const VectorGerm& a) {
    VectorGerm r = a;
    for (auto& c : r.components) c *= s;
    return r;
}

namespace {

TruncatedPoly lift_poly(const expr::Expr& e, std::span<const double> x0, int degree) {
    using expr::NodeKind;
    const std::size_t n = x0.size();
    switch (e.kind()) {
        case NodeKind::Variable:
            if (e.variable_index() >= n)
                raise(ErrorKind::DimensionMismatch, "variable '" + e.variable_name() + "' outside the base point");
            return TruncatedPoly::coordinate(n, degree, e.variable_index(), x0[e.variable_index()]);
        case NodeKind::Constant: return TruncatedPoly::constant(n, degree, e.constant_value());
        case NodeKind::Neg: return -lift_poly(e.operand(), x0, degree);
        case NodeKind::Sin: return sin(lift_poly(e.operand(), x0, degree));
        case NodeKind::Cos: return cos(lift_poly(e.operand(), x0, degree));
        case NodeKind::Exp: return exp(lift_poly(e.operand(), x0, degree));
        case NodeKind::Ln: return ln(lift_poly(e.operand(), x0, degree));
        case NodeKind::Sqrt: return sqrt(lift_poly(e.operand(), x0, degree));
        case NodeKind::Pow: {
            TruncatedPoly base = lift_poly(e.operand(), x0, degree);
            if (e.exponent() < 0 && base.value() == 0.0) raise(ErrorKind::Domain, "negative power of zero");
            return pow(base, e.exponent());
        }
        case NodeKind::Add: return lift_poly(e.lhs(), x0, degree) + lift_poly(e.rhs(), x0, degree);
        case NodeKind::Sub: return lift_poly(e.lhs(), x0, degree) - lift_poly(e.rhs(), x0, degree);
        case NodeKind::Mul: return lift_poly(e.lhs(), x0, degree) * lift_poly(e.rhs(), x0, degree);
        case NodeKind::Div: {
            TruncatedPoly num = lift_poly(e.lhs(), x0, degree);
            return num * reciprocal(lift_poly(e.rhs(), x0, degree));
        }
    }
    raise(ErrorKind::Domain, "unsupported expression node");
}

}  // namespace

ScalarGerm lift(const expr::Expr& e, std::span<const double> x0, int degree) {
    return ScalarGerm{std::vector<double>(x0.begin(), x0.end()), lift_poly(e, x0, degree)};
}

VectorGerm lift(std::span<const expr::Expr> components, std::span<const double> x0, int degree) {
    VectorGerm g{std::vector<double>(x0.begin(), x0.end()), {}};
    g.components.reserve(components.size());
    for (const auto& c : components) g.components.push_back(lift_poly(c, x0, degree));
    return g;
}

VectorGerm identity_germ(std::span<const double> x0, int degree) {
    VectorGerm g{std::vector<double>(x0.begin(), x0.end()), {}};
    for (std::size_t i = 0; i < x0.size(); ++i)
        g.components.push_back(TruncatedPoly::coordinate(x0.size(), degree, i, x0[i]));
    return g;
}

}  // namespace stla::jet
