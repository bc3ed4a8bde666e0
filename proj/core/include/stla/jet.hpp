#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "stla/expr.hpp"

namespace stla::jet {

inline constexpr std::size_t kMaxVars = 8;

/// Exponent multi-index alpha = (alpha_1, ..., alpha_n), n <= kMaxVars.
class MultiIndex {
public:
    MultiIndex() = default;
    static MultiIndex unit(std::size_t i);

    std::uint8_t operator[](std::size_t i) const noexcept { return e_[i]; }
    std::uint8_t& operator[](std::size_t i) noexcept { return e_[i]; }

    int total() const noexcept;
    /// alpha! = prod alpha_i!
    double factorial() const noexcept;

    MultiIndex operator+(const MultiIndex& o) const noexcept;

    auto operator<=>(const MultiIndex&) const = default;

private:
    std::array<std::uint8_t, kMaxVars> e_{};
};

/// Multivariate polynomial in the displacement xi = x - x0, truncated at total
/// degree `degree_cap`.
///
/// The cap is the number of derivative orders that remain valid: products and
/// sums take the smaller cap, `partial` lowers it by one. Terms above the cap
/// are never stored; absent terms are zero.
class TruncatedPoly {
public:
    using Terms = std::map<MultiIndex, double>;

    TruncatedPoly(std::size_t n_vars, int degree_cap);

    static TruncatedPoly constant(std::size_t n_vars, int degree_cap, double c);
    /// c + xi_i
    static TruncatedPoly coordinate(std::size_t n_vars, int degree_cap, std::size_t i, double c);

    std::size_t n_vars() const noexcept { return n_vars_; }
    int degree_cap() const noexcept { return cap_; }
    const Terms& terms() const noexcept { return terms_; }

    double coefficient(const MultiIndex& alpha) const;
    void set_coefficient(const MultiIndex& alpha, double value);
    void add_to_coefficient(const MultiIndex& alpha, double value);

    /// Coefficient of alpha = 0.
    double value() const;
    double max_abs_coefficient() const noexcept;

    /// Formal derivative in xi_i; the result's cap is one lower.
    /// Throws Error(InsufficientOrder) when the cap is already 0.
    TruncatedPoly partial(std::size_t i) const;

    /// Same polynomial with a lower cap (terms above it dropped).
    TruncatedPoly truncated(int degree_cap) const;

    /// Substitute this germ into the univariate series sum_j c_j (t - t0)^j where
    /// t0 = value(); `series` holds c_0..c_D.
    TruncatedPoly compose(std::span<const double> series) const;

    /// True if some stored coefficient whose exponent involves xi_i exceeds tol.
    bool involves(std::size_t i, double tol = 0.0) const;

    TruncatedPoly& operator+=(const TruncatedPoly& o);
    TruncatedPoly& operator-=(const TruncatedPoly& o);
    TruncatedPoly& operator*=(double s);

    friend bool operator==(const TruncatedPoly&, const TruncatedPoly&) = default;

private:
    void check_compatible(const TruncatedPoly& o) const;

    std::size_t n_vars_;
    int cap_;
    Terms terms_;

    friend TruncatedPoly operator*(const TruncatedPoly& a, const TruncatedPoly& b);
};

TruncatedPoly operator+(TruncatedPoly a, const TruncatedPoly& b);
TruncatedPoly operator-(TruncatedPoly a, const TruncatedPoly& b);
TruncatedPoly operator-(TruncatedPoly a);
TruncatedPoly operator*(TruncatedPoly a, double s);
TruncatedPoly operator*(double s, TruncatedPoly a);
/// Truncated product; cap is min of the operand caps. Throws DimensionMismatch.
TruncatedPoly operator*(const TruncatedPoly& a, const TruncatedPoly& b);

TruncatedPoly pow(const TruncatedPoly& a, int n);
TruncatedPoly reciprocal(const TruncatedPoly& a);
TruncatedPoly sin(const TruncatedPoly& a);
TruncatedPoly cos(const TruncatedPoly& a);
TruncatedPoly exp(const TruncatedPoly& a);
TruncatedPoly ln(const TruncatedPoly& a);
TruncatedPoly sqrt(const TruncatedPoly& a);

/// Multi-line graded-order rendering, for diagnostics.
std::string to_string(const TruncatedPoly& p);

/// Germ of a scalar function at a base point.
struct ScalarGerm {
    std::vector<double> base;
    TruncatedPoly poly;

    double value() const { return poly.value(); }
    int degree_cap() const noexcept { return poly.degree_cap(); }
};

/// Germ of a vector field at a base point, one polynomial per component.
struct VectorGerm {
    std::vector<double> base;
    std::vector<TruncatedPoly> components;

    std::size_t dim() const noexcept { return components.size(); }
    int degree_cap() const;
    std::vector<double> value() const;
    VectorGerm operator-() const;
};

VectorGerm operator+(const VectorGerm& a, const VectorGerm& b);
VectorGerm operator-(const VectorGerm& a, const VectorGerm& b);
VectorGerm operator*(double s, const VectorGerm& a);

/// Taylor germ of an expression at x0 with total degree D.
/// Throws Error(Domain) if some sub-expression is not smooth at x0.
ScalarGerm lift(const expr::Expr& e, std::span<const double> x0, int degree);
VectorGerm lift(std::span<const expr::Expr> components, std::span<const double> x0, int degree);

/// Germ of the identity map I(x) = x.
VectorGerm identity_germ(std::span<const double> x0, int degree);

}  // namespace stla::jet
