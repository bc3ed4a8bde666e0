#include "stla/hamiltonian.hpp"

#include <algorithm>
#include <cmath>

#include "stla/error.hpp"

namespace stla::ham {

namespace {

double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

double factorial(int n) {
    double r = 1.0;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
}

void require_cap(const TruncatedPoly& u, int k, const char* what) {
    if (u.degree_cap() < k)
        raise(ErrorKind::InsufficientOrder, std::string(what) + ": germ of degree " + std::to_string(u.degree_cap()) +
                                                " cannot carry " + std::to_string(k) + " derivatives");
}

void require_field_cap(std::span<const VectorGerm> fields, int k) {
    if (k <= 0) return;
    for (const auto& f : fields)
        if (f.degree_cap() < k - 1)
            raise(ErrorKind::InsufficientOrder, "vector field germ of degree " + std::to_string(f.degree_cap()) +
                                                    " is too short for order " + std::to_string(k));
}

TruncatedPoly apply_n(const VectorGerm& f, TruncatedPoly u, int n) {
    for (int i = 0; i < n; ++i) u = apply(f, u);
    return u;
}

// sum over alpha with |alpha| = k of k!/alpha! H_f1^a1 o ... o H_fm^am u, built
// innermost-first: the last field is applied to u before the others.
TruncatedPoly multinomial(std::span<const VectorGerm> fields, const TruncatedPoly& u, int k) {
    const std::size_t m = fields.size();
    TruncatedPoly total(u.n_vars(), u.degree_cap() - k);
    // Depth-first over the exponent of field j (from last to first); `coef`
    // accumulates k!/(a_m! ... a_j!) / (remaining)! lazily as a product of binomials.
    auto rec = [&](auto&& self, std::size_t j, const TruncatedPoly& inner, int remaining, double coef) -> void {
        if (j == 0) {
            total += coef * apply_n(fields[0], inner, remaining);
            return;
        }
        TruncatedPoly cur = inner;
        for (int a = 0; a <= remaining; ++a) {
            if (a > 0) cur = apply(fields[j], cur);
            self(self, j - 1, cur, remaining - a, coef * binomial(remaining, a));
        }
    };
    rec(rec, m - 1, u, k, 1.0);
    return total;
}

// ((H_f1 [+] ... [+] H_fm-1) [+] H_fm)^k u = sum_i C(k,i) (...)^{k-i} o H_fm^(i) u.
TruncatedPoly recursive(std::span<const VectorGerm> fields, const TruncatedPoly& u, int k) {
    if (fields.size() == 1) return apply_n(fields[0], u, k);
    const auto head = fields.first(fields.size() - 1);
    TruncatedPoly total(u.n_vars(), u.degree_cap() - k);
    TruncatedPoly inner = u;
    for (int i = 0; i <= k; ++i) {
        if (i > 0) inner = apply(fields.back(), inner);
        total += binomial(k, i) * recursive(head, inner, k - i);
    }
    return total;
}

}  // namespace

double vanishing_tolerance(double scale) noexcept { return kVanishRelTol * std::max(1.0, scale); }

double field_scale(std::span<const VectorGerm> fields, std::span<const ScalarGerm> u) {
    double s = 0.0;
    for (const auto& f : fields)
        for (const auto& c : f.components) s = std::max(s, c.max_abs_coefficient());
    for (const auto& g : u) s = std::max(s, g.poly.max_abs_coefficient());
    return s;
}

TruncatedPoly apply(const VectorGerm& f, const TruncatedPoly& u) {
    require_cap(u, 1, "Lie derivative");
    if (f.dim() != u.n_vars()) raise(ErrorKind::DimensionMismatch, "field dimension differs from germ variables");
    TruncatedPoly r(u.n_vars(), u.degree_cap() - 1);
    for (std::size_t i = 0; i < f.dim(); ++i) {
        if (f.components[i].degree_cap() < u.degree_cap() - 1)
            raise(ErrorKind::InsufficientOrder, "vector field germ is shorter than the target germ allows");
        r += f.components[i] * u.partial(i);
    }
    return r;
}

ScalarGerm lie_derivative(const VectorGerm& f, const ScalarGerm& u) { return ScalarGerm{u.base, apply(f, u.poly)}; }

double ham_power(const VectorGerm& f, const ScalarGerm& u, int k) {
    require_cap(u.poly, k, "ham_power");
    return apply_n(f, u.poly, k).value();
}

TruncatedPoly boxplus_germ(std::span<const VectorGerm> fields, const TruncatedPoly& u, int k, Method method) {
    if (fields.empty()) raise(ErrorKind::DegenerateInput, "boxplus power of an empty field list");
    if (k < 0) raise(ErrorKind::InsufficientOrder, "negative order");
    require_cap(u, k, "boxplus power");
    require_field_cap(fields, k);
    return method == Method::Multinomial ? multinomial(fields, u, k) : recursive(fields, u, k);
}

double boxplus_power(std::span<const VectorGerm> fields, const ScalarGerm& u, int k, Method method) {
    return boxplus_germ(fields, u.poly, k, method).value();
}

std::vector<TruncatedPoly> boxplus_series(std::span<const VectorGerm> fields, const TruncatedPoly& u, int K) {
    if (fields.empty()) raise(ErrorKind::DegenerateInput, "boxplus series of an empty field list");
    require_cap(u, K, "boxplus series");
    require_field_cap(fields, K);

    std::vector<TruncatedPoly> coef;
    coef.reserve(static_cast<std::size_t>(K) + 1);
    coef.push_back(u);
    for (int r = 1; r <= K; ++r) coef.emplace_back(u.n_vars(), u.degree_cap() - r);

    for (std::size_t j = fields.size(); j-- > 0;) {
        std::vector<TruncatedPoly> next;
        next.reserve(coef.size());
        for (int r = 0; r <= K; ++r) next.emplace_back(u.n_vars(), u.degree_cap() - r);
        for (int b = 0; b <= K; ++b) {
            TruncatedPoly cur = coef[static_cast<std::size_t>(b)];
            for (int a = 0; a + b <= K; ++a) {
                if (a > 0) cur = apply(fields[j], cur);
                next[static_cast<std::size_t>(a + b)] += binomial(a + b, a) * cur;
            }
        }
        coef = std::move(next);
    }
    return coef;
}

HamCoeffs HamCoeffs::normalized(Normalization target) const {
    if (target == normalization) return *this;
    HamCoeffs r = *this;
    r.normalization = target;
    for (int i = 1; i <= max_order(); ++i) {
        const double f = target == Normalization::Factorial ? 1.0 / factorial(i) : factorial(i);
        for (auto& v : r.orders[static_cast<std::size_t>(i - 1)]) v *= f;
    }
    return r;
}

HamCoeffs boxplus_sequence(std::span<const VectorGerm> fields, std::span<const ScalarGerm> u, int K) {
    HamCoeffs out;
    out.scale = field_scale(fields, u);
    out.orders.assign(static_cast<std::size_t>(K), std::vector<double>(u.size(), 0.0));
    for (std::size_t c = 0; c < u.size(); ++c) {
        const auto series = boxplus_series(fields, u[c].poly, K);
        for (int r = 1; r <= K; ++r) out.orders[static_cast<std::size_t>(r - 1)][c] = series[static_cast<std::size_t>(r)].value();
    }
    return out;
}

HamCoeffs boxplus_sequence(std::span<const VectorGerm> fields, const ScalarGerm& u, int K) {
    return boxplus_sequence(fields, std::span<const ScalarGerm>(&u, 1), K);
}

std::vector<double> boxplus_vector(std::span<const VectorGerm> fields, std::span<const ScalarGerm> u, int k) {
    std::vector<double> v;
    v.reserve(u.size());
    for (const auto& g : u) v.push_back(boxplus_power(fields, g, k));
    return v;
}

HamCoeffs trajectory_coeffs(std::span<const VectorGerm> fields, int K) {
    if (fields.empty()) raise(ErrorKind::DegenerateInput, "trajectory of an empty field list");
    const auto id = jet::identity_germ(fields.front().base, K);
    std::vector<ScalarGerm> comps;
    for (const auto& c : id.components) comps.push_back(ScalarGerm{id.base, c});
    return boxplus_sequence(fields, comps, K);
}

VectorGerm directional(const VectorGerm& f, const VectorGerm& v) {
    VectorGerm r{f.base, {}};
    r.components.reserve(f.dim());
    for (const auto& fi : f.components) r.components.push_back(apply(v, fi));
    return r;
}

VectorGerm lie_bracket(const VectorGerm& f, const VectorGerm& g) {
    if (f.dim() != g.dim()) raise(ErrorKind::DimensionMismatch, "Lie bracket of fields of different dimension");
    const int cap = std::min(f.degree_cap(), g.degree_cap());
    if (cap < 1) raise(ErrorKind::InsufficientOrder, "Lie bracket needs germs of degree >= 1");
    VectorGerm r{f.base, {}};
    r.components.reserve(f.dim());
    for (std::size_t i = 0; i < f.dim(); ++i) {
        TruncatedPoly gi = g.components[i].truncated(cap);
        TruncatedPoly fi = f.components[i].truncated(cap);
        r.components.push_back(apply(f, gi) - apply(g, fi));
    }
    return r;
}

VectorGerm ad_power(const VectorGerm& g, const VectorGerm& f, int k) {
    if (k < 0) raise(ErrorKind::InsufficientOrder, "negative ad power");
    VectorGerm r = f;
    for (int i = 0; i < k; ++i) r = lie_bracket(g, r);
    return r;
}

}  // namespace stla::ham
