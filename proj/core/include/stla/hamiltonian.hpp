#pragma once

#include <span>
#include <vector>

#include "stla/jet.hpp"

namespace stla::ham {

using jet::ScalarGerm;
using jet::TruncatedPoly;
using jet::VectorGerm;

/// Relative threshold below which a coefficient counts as zero.
inline constexpr double kVanishRelTol = 1e-9;

/// 1e-9 * max(1, scale).
double vanishing_tolerance(double scale) noexcept;

/// Largest absolute jet coefficient among the fields and target germs; the
/// `scale` fed to vanishing_tolerance.
double field_scale(std::span<const VectorGerm> fields, std::span<const ScalarGerm> u = {});

/// H_f u = f . grad u on polynomials. The result cap is min(cap(u) - 1, cap(f)).
TruncatedPoly apply(const VectorGerm& f, const TruncatedPoly& u);

ScalarGerm lie_derivative(const VectorGerm& f, const ScalarGerm& u);

/// H_f^(k) u(x0). Needs cap(u) >= k and cap(f) >= k - 1.
double ham_power(const VectorGerm& f, const ScalarGerm& u, int k);

enum class Method { Multinomial, Recursive };

/// (H_f1 [+] ... [+] H_fm)^k u as a germ, raw (no 1/k!).
///
/// Fields are listed in the order the switched trajectory uses them; the first
/// one is the outermost operator, so for two fields the sum is
/// sum_i C(k,i) H_f^(k-i) o H_g^(i) u.
TruncatedPoly boxplus_germ(std::span<const VectorGerm> fields, const TruncatedPoly& u, int k,
                           Method method = Method::Multinomial);

double boxplus_power(std::span<const VectorGerm> fields, const ScalarGerm& u, int k,
                     Method method = Method::Multinomial);

/// Germs of (H_f1 [+] ... [+] H_fm)^r u for r = 0..K in one pass.
///
/// Uses u(x_mt) = e^{t H_f1} ... e^{t H_fm} u(x0): the series is pushed through
/// the fields from last to first, coefficient r of each stage being
/// sum_{a+b=r} C(r,a) H_f^(a)(previous_b). Entry r has cap cap(u) - r.
std::vector<TruncatedPoly> boxplus_series(std::span<const VectorGerm> fields, const TruncatedPoly& u, int K);

enum class Normalization { Raw, Factorial };

/// Values of the boxplus powers at the base point for orders 1..K.
struct HamCoeffs {
    /// orders[i - 1] holds order i, one entry per target component.
    std::vector<std::vector<double>> orders;
    Normalization normalization = Normalization::Raw;
    /// Jet scale used for vanishing tests.
    double scale = 1.0;

    int max_order() const noexcept { return static_cast<int>(orders.size()); }
    const std::vector<double>& order(int i) const { return orders.at(static_cast<std::size_t>(i - 1)); }

    /// Convert between conventions; the factorial entry of order i is raw / i!.
    HamCoeffs normalized(Normalization target) const;
};

HamCoeffs boxplus_sequence(std::span<const VectorGerm> fields, std::span<const ScalarGerm> u, int K);
HamCoeffs boxplus_sequence(std::span<const VectorGerm> fields, const ScalarGerm& u, int K);

std::vector<double> boxplus_vector(std::span<const VectorGerm> fields, std::span<const ScalarGerm> u, int k);

/// Coefficients of the balanced trajectory itself (u = identity).
/// Fields must be lifted to degree >= K - 1.
HamCoeffs trajectory_coeffs(std::span<const VectorGerm> fields, int K);

/// [f, g] = Dg f - Df g.
VectorGerm lie_bracket(const VectorGerm& f, const VectorGerm& g);

/// ad_g^k f with ad_g f = [g, f].
VectorGerm ad_power(const VectorGerm& g, const VectorGerm& f, int k);

/// Df v as a vector germ (the directional derivative of f along v).
VectorGerm directional(const VectorGerm& f, const VectorGerm& v);

}  // namespace stla::ham
