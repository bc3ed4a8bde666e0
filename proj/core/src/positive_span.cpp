#include "stla/positive_span.hpp"

#include <cmath>
#include <limits>

#include "stla/error.hpp"
#include "stla/simplex.hpp"

namespace stla::pspan {

namespace {

constexpr double kMarginTol = 1e-9;

void check_columns(const Eigen::MatrixXd& A) {
    if (A.rows() == 0 || A.cols() == 0) raise(ErrorKind::DegenerateInput, "empty condition matrix");
    const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
    for (Eigen::Index j = 0; j < A.cols(); ++j)
        if (A.col(j).norm() <= 1e-12 * scale)
            raise(ErrorKind::DegenerateInput, "column " + std::to_string(j + 1) + " of the condition matrix is zero");
}

}  // namespace

int rank(const Eigen::MatrixXd& A) {
    if (A.size() == 0) return 0;
    const double norm = A.norm();
    if (norm == 0.0) return 0;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    const auto diag = qr.matrixQR().diagonal();
    int r = 0;
    for (Eigen::Index i = 0; i < diag.size(); ++i)
        if (std::fabs(diag(i)) > 1e-9 * norm) ++r;
    return r;
}

SpanCertificate is_positive_basis(const Eigen::MatrixXd& A) {
    check_columns(A);
    const Eigen::Index h = A.rows();
    const Eigen::Index m = A.cols();

    SpanCertificate cert;
    cert.rank = rank(A);

    // lambda = t*1 + mu with mu, t >= 0.
    lp::Problem p;
    p.A_eq = Eigen::MatrixXd::Zero(h + 1, m + 1);
    p.A_eq.topLeftCorner(h, m) = A;
    p.A_eq.topRightCorner(h, 1) = A.rowwise().sum();
    p.A_eq.bottomLeftCorner(1, m).setOnes();
    p.A_eq(h, m) = static_cast<double>(m);
    p.b_eq = Eigen::VectorXd::Zero(h + 1);
    p.b_eq(h) = 1.0;
    p.c = Eigen::VectorXd::Zero(m + 1);
    p.c(m) = 1.0;

    const lp::Result r = lp::solve(p);
    if (r.status != lp::Status::Optimal) {
        cert.margin = -std::numeric_limits<double>::infinity();
        cert.reason = "no nonnegative null combination of the columns";
        return cert;
    }
    const double t = r.x(m);
    cert.lambda = r.x.head(m).array() + t;
    cert.margin = t;
    cert.residual = (A * cert.lambda).norm();

    if (cert.rank < h) {
        cert.reason = "columns span a subspace of dimension " + std::to_string(cert.rank) + " < " + std::to_string(h);
        return cert;
    }
    if (t <= kMarginTol) {
        cert.reason = "no strictly positive null combination (margin " + std::to_string(t) + ")";
        return cert;
    }
    cert.verdict = true;
    cert.reason = "positive basis";
    return cert;
}

SpanCertificate check_boundary(const Eigen::MatrixXd& A, const Eigen::VectorXd& s) {
    if (s.size() != A.cols()) raise(ErrorKind::DimensionMismatch, "boundary row length differs from column count");
    SpanCertificate cert = is_positive_basis(A);

    Eigen::MatrixXd stacked(A.rows() + 1, A.cols());
    stacked << A, s.transpose();
    cert.stacked_rank = rank(stacked);

    lp::Problem p;
    p.A_eq = stacked;
    p.b_eq = Eigen::VectorXd::Zero(A.rows() + 1);
    p.b_eq(A.rows()) = 1.0;
    if (auto mu = lp::lp_feasible(p)) cert.mu = *mu;

    const bool interior = cert.verdict;
    cert.verdict = false;
    if (!interior) return cert;
    if (cert.stacked_rank != A.rows() + 1) {
        cert.reason = "stacked matrix has rank " + std::to_string(cert.stacked_rank) + " < " + std::to_string(A.rows() + 1);
        return cert;
    }
    if (!cert.mu) {
        cert.reason = "no mu >= 0 with A mu = 0 and s.mu = 1";
        return cert;
    }
    cert.verdict = true;
    cert.reason = "boundary positive basis";
    return cert;
}

double eccentricity(const Eigen::VectorXd& lambda) {
    if (lambda.size() == 0 || lambda.minCoeff() <= 0.0)
        raise(ErrorKind::DegenerateInput, "eccentricity needs a strictly positive witness");
    return lambda.minCoeff() / lambda.maxCoeff();
}

}  // namespace stla::pspan
