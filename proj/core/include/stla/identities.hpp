#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stla/hamiltonian.hpp"
#include "stla/system.hpp"

namespace stla::ham {

/// Two independently computed sides of an identity, evaluated at the base point.
struct Comparison {
    std::vector<double> lhs;
    std::vector<double> rhs;

    /// max |lhs - rhs| / max(1, max |lhs|, max |rhs|)
    double relative_error() const;
};

// Each function below evaluates one identity of the boxplus calculus at the
// common base point of its germs. Germs must carry enough degree; the
// functions throw InsufficientOrder otherwise.

Comparison method_agreement(std::span<const VectorGerm> fields, const ScalarGerm& u, int k);
/// (H_f [+] H_g)^2 u = H_{f+g}^(2) u + [f,g].grad u
Comparison second_order_pair(const VectorGerm& f, const VectorGerm& g, const ScalarGerm& u);
/// (H_f1 [+] ... [+] H_fm)^2 u = H_{sum f}^(2) u + sum_{i<j} [fi,fj].grad u
Comparison second_order_multi(std::span<const VectorGerm> fields, const ScalarGerm& u);
/// Same with u = I: D(sum f)(sum f) + sum_{i<j} [fi,fj].
Comparison second_order_multi_identity(std::span<const VectorGerm> fields);
Comparison homogeneity(const VectorGerm& f, const VectorGerm& g, const ScalarGerm& u, double lambda, int k);
/// (H_-f [+] H_-g)^k u = (-1)^k (H_f [+] H_g)^k u
Comparison sign_rule(const VectorGerm& f, const VectorGerm& g, const ScalarGerm& u, int k);
/// (H_f [+] H_f)^k u = 2^k H_f^(k) u
Comparison doubling_rule(const VectorGerm& f, const ScalarGerm& u, int k);
/// (f, g, -f, -g): order 1 vanishes and order 2 is 2 [f,g].grad u. lhs = (order1, order2).
Comparison bracket_quadruple(const VectorGerm& f, const VectorGerm& g, const ScalarGerm& u);
/// (f,g,-f,-g,h,g,f,-g,-f,-h) on I: orders 1 and 2 vanish, order 3 is 6 [[f,g],h].
Comparison bracket_ten(const VectorGerm& f, const VectorGerm& g, const VectorGerm& h);
/// (H_f [+] H_g)^{k+1} u = (-1)^k H_{ad_g^k f} u. Holds for k = 1 when
/// f + g vanishes at the base point and for k <= 3 when it vanishes to second order.
Comparison balanced_pair(const VectorGerm& f, const VectorGerm& g, const ScalarGerm& u, int k);
/// (H_f [+] H_g)^k I = F_k with F_2 = D(f+g)(f+g) + [f,g], F_{j+1} = DF_j (f+g) + [F_j, g].
Comparison linear_recursion(const VectorGerm& f, const VectorGerm& g, int k);
/// (H_f [+] H_g)^3 I / 6 against H_{f+g}^(3) I / 6 + the symmetrized bracket term + (ad_f^2 g + ad_g^2 f) / 12.
Comparison bch_third(const VectorGerm& f, const VectorGerm& g);
/// Order 3 of (f, g, g, f) with f = fo + eps f1, g = fo - eps f1 and fo(x0) = 0:
/// 12 eps ad_fo^2 f1 + 4 eps^2 ad_f1^2 fo.
Comparison affine_quadruple(const VectorGerm& fo, const VectorGerm& f1, double eps);

struct IdentityCheck {
    std::string name;
    int instances = 0;
    double max_error = 0.0;
    bool passed = true;
    /// Instance with the largest error, for reports.
    std::string worst;
};

struct IdentitySuiteOptions {
    int k_max = 4;
    double tol_rel = 1e-9;
    /// Cap on the number of ordered palette pairs visited.
    std::size_t max_pairs = 64;
};

/// Run every identity that applies to the palette of `sys` at x0, with the
/// given scalar functions (the coordinate functions when empty).
std::vector<IdentityCheck> run_identity_suite(const ControlSystem& sys, const std::vector<expr::Expr>& functions,
                                              const Eigen::VectorXd& x0, const IdentitySuiteOptions& opts = {});

}  // namespace stla::ham
