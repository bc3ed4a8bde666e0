#pragma once

#include <optional>
#include <string>

#include <Eigen/Dense>

namespace stla::pspan {

/// Result of a positive-basis or boundary check.
struct SpanCertificate {
    bool verdict = false;
    int rank = 0;
    /// Nonnegative null combination with sum 1; strictly positive when verdict holds.
    Eigen::VectorXd lambda;
    /// Optimal t of  max t  s.t.  A lambda = 0, lambda_i >= t, sum lambda = 1.
    double margin = 0.0;
    /// ||A lambda||.
    double residual = 0.0;
    /// Boundary witness: mu >= 0, A mu = 0, s.mu = 1.
    std::optional<Eigen::VectorXd> mu;
    /// Rank of the matrix stacked with the extra row (boundary checks only).
    int stacked_rank = 0;
    std::string reason;
};

/// Numerical rank by column-pivoted QR, threshold 1e-9 * ||A||_F.
int rank(const Eigen::MatrixXd& A);

/// Columns of A (h x m) positively span R^h.
///
/// Verdict: rank(A) = h and the margin LP has optimum > 1e-9. Throws
/// Error(DegenerateInput) for an empty matrix or a zero column.
SpanCertificate is_positive_basis(const Eigen::MatrixXd& A);

/// Boundary-variant spanning condition for A with extra row s.
///
/// Holds iff rank([A; s]) = h + 1, A is a positive basis, and some mu >= 0 has
/// A mu = 0 and s.mu = 1. Together these are equivalent to: for all p and r >= 0
/// there is lambda >= 0 with A lambda = p and s.lambda >= r (see
/// docs/boundary_condition.md).
SpanCertificate check_boundary(const Eigen::MatrixXd& A, const Eigen::VectorXd& s);

/// min lambda_i / max lambda_i for a strictly positive witness.
double eccentricity(const Eigen::VectorXd& lambda);

}  // namespace stla::pspan
