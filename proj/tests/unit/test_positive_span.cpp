#include "doctest.h"
#include "oracle.hpp"
#include "stla/error.hpp"
#include "stla/positive_span.hpp"
#include "stla/simplex.hpp"

using namespace stla;
using namespace stla::pspan;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd cols(std::initializer_list<std::initializer_list<double>> columns) {
    const auto m = static_cast<Eigen::Index>(columns.size());
    const auto h = static_cast<Eigen::Index>(columns.begin()->size());
    MatrixXd A(h, m);
    Eigen::Index j = 0;
    for (const auto& c : columns) {
        Eigen::Index i = 0;
        for (double v : c) A(i++, j) = v;
        ++j;
    }
    return A;
}

MatrixXd random_matrix(testing::Rng& rng, Eigen::Index h, Eigen::Index m) {
    MatrixXd A(h, m);
    for (Eigen::Index i = 0; i < h; ++i)
        for (Eigen::Index j = 0; j < m; ++j) A(i, j) = rng.uniform(-1.0, 1.0);
    return A;
}

// Random positive basis: h random columns plus minus their weighted sum.
MatrixXd random_positive_basis(testing::Rng& rng, Eigen::Index h) {
    MatrixXd A(h, h + 1);
    A.leftCols(h) = random_matrix(rng, h, h);
    VectorXd w(h);
    for (Eigen::Index i = 0; i < h; ++i) w(i) = rng.uniform(0.2, 1.0);
    A.col(h) = -A.leftCols(h) * w;
    return A;
}

void check_certificate(const MatrixXd& A, const SpanCertificate& c) {
    REQUIRE(c.lambda.size() == A.cols());
    CHECK(c.lambda.sum() == doctest::Approx(1.0));
    CHECK((A * c.lambda).norm() <= 1e-8 * std::max(1.0, A.norm()) * c.lambda.norm());
    CHECK(c.lambda.minCoeff() > 0.0);
}

}  // namespace

TEST_CASE("small positive bases") {
    const auto tri = cols({{1, 0}, {0, 1}, {-1, -1}});
    const auto c = is_positive_basis(tri);
    CHECK(c.verdict);
    CHECK(c.rank == 2);
    check_certificate(tri, c);
    CHECK(c.lambda(0) == doctest::Approx(1.0 / 3));

    CHECK_FALSE(is_positive_basis(cols({{1, 0}, {0, 1}})).verdict);
    CHECK_FALSE(is_positive_basis(cols({{1, 0}, {-1, 0}})).verdict);  // rank 1 in R^2
    CHECK(is_positive_basis(cols({{1}, {-2}})).verdict);
}

TEST_CASE("Coron matrix is a positive basis") {
    const auto A = cols({{0, 1}, {0, -1}, {12, 0}, {-12, 0}});
    const auto c = is_positive_basis(A);
    CHECK(c.verdict);
    check_certificate(A, c);
    CHECK(c.margin > 1e-6);
}

TEST_CASE("curve example matrix is a positive basis") {
    const auto A = cols({{0, 1}, {0, -1}, {2, 0}, {-2, 0}});
    const auto c = is_positive_basis(A);
    CHECK(c.verdict);
    check_certificate(A, c);
    // With the 1/2! normalization the same verdict holds.
    CHECK(is_positive_basis(cols({{0, 1}, {0, -1}, {1, 0}, {-1, 0}})).verdict);
}

TEST_CASE("degenerate input") {
    CHECK_THROWS_AS((void)is_positive_basis(MatrixXd(2, 0)), Error);
    CHECK_THROWS_AS((void)is_positive_basis(cols({{1, 0}, {0, 0}, {-1, 0}})), Error);
    CHECK_THROWS_AS((void)eccentricity(VectorXd::Zero(3)), Error);
}

TEST_CASE("eccentricity") {
    CHECK(eccentricity(VectorXd::Ones(3)) == 1.0);
    VectorXd l(3);
    l << 1, 2, 4;
    CHECK(eccentricity(l) == doctest::Approx(0.25));
}

TEST_CASE("eccentricity is stable under small perturbations") {
    testing::Rng rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const auto h = rng.integer(1, 3);
        const auto A = random_positive_basis(rng, h);
        const auto c = is_positive_basis(A);
        REQUIRE(c.verdict);
        if (c.margin < 0.05) continue;
        const MatrixXd B = A + 1e-3 * random_matrix(rng, A.rows(), A.cols());
        const auto d = is_positive_basis(B);
        REQUIRE(d.verdict);
        CHECK(std::abs(eccentricity(c.lambda) - eccentricity(d.lambda)) <= 0.05);
    }
}

TEST_CASE("agreement with the direction-sampling oracle") {
    testing::Rng rng(2024);
    int disagreements = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto h = rng.integer(1, 4);
        const auto m = rng.integer(1, 8);
        const auto A = random_matrix(rng, h, m);
        const auto c = is_positive_basis(A);
        const bool oracle = testing::sampled_positive_span(A, rng, 10000);
        if (c.verdict != oracle) {
            ++disagreements;
            CHECK(c.margin < 1e-6);
        }
    }
    CHECK(disagreements <= 10);
}

TEST_CASE("scaling a column keeps the verdict") {
    testing::Rng rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        auto A = random_matrix(rng, rng.integer(1, 3), rng.integer(2, 6));
        const bool v = is_positive_basis(A).verdict;
        A.col(rng.integer(0, static_cast<int>(A.cols()) - 1)) *= rng.uniform(0.01, 100.0);
        CHECK(is_positive_basis(A).verdict == v);
    }
}

TEST_CASE("adding a column never breaks a positive basis") {
    testing::Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const auto h = rng.integer(1, 4);
        const auto A = random_positive_basis(rng, h);
        MatrixXd B(h, A.cols() + 1);
        B << A, random_matrix(rng, h, 1);
        CHECK(is_positive_basis(A).verdict);
        CHECK(is_positive_basis(B).verdict);
    }
}

TEST_CASE("rank") {
    CHECK(rank(cols({{1, 0}, {2, 0}})) == 1);
    CHECK(rank(cols({{1, 0, 0}, {0, 1, 0}, {1, 1, 0}})) == 2);
    CHECK(rank(MatrixXd::Identity(4, 4)) == 4);
}

TEST_CASE("boundary condition: simple cases") {
    const auto A = cols({{0, 1}, {0, -1}, {2, 0}, {-2, 0}});
    VectorXd s = VectorXd::Zero(4);
    CHECK_FALSE(check_boundary(A, s).verdict);

    s << 0, 0, 1, 1;
    const auto c = check_boundary(A, s);
    CHECK(c.verdict);
    REQUIRE(c.mu.has_value());
    CHECK((A * *c.mu).norm() <= 1e-9);
    CHECK(s.dot(*c.mu) == doctest::Approx(1.0));
    CHECK(c.mu->minCoeff() >= 0.0);

    // s vanishing on every null combination: s = row of A.
    VectorXd r = A.row(0).transpose();
    CHECK_FALSE(check_boundary(A, r).verdict);
}

TEST_CASE("boundary condition agrees with the (p, r) sampler") {
    testing::Rng rng(99);
    int positives = 0, negatives = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const auto h = rng.integer(1, 3);
        MatrixXd A = random_positive_basis(rng, h);
        if (trial % 2 == 0) {
            MatrixXd B(h, A.cols() + 1);
            B << A, random_matrix(rng, h, 1);
            A = B;
        }
        VectorXd s(A.cols());
        for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = rng.uniform(-1.0, 1.0);
        if (trial % 5 == 0) s = (A.transpose() * random_matrix(rng, h, 1)).col(0);
        const bool verdict = check_boundary(A, s).verdict;
        CHECK(verdict == testing::sampled_boundary(A, s, rng, 1000));
        (verdict ? positives : negatives)++;
    }
    CHECK(positives > 0);
    CHECK(negatives > 0);
}

TEST_CASE("boundary condition matches positive spanning of the stacked matrix when it holds") {
    testing::Rng rng(12);
    for (int trial = 0; trial < 30; ++trial) {
        const auto h = rng.integer(1, 3);
        const MatrixXd big = random_positive_basis(rng, h + 1);
        const MatrixXd A = big.topRows(h);
        const VectorXd s = big.row(h).transpose();
        if (!is_positive_basis(A).verdict) continue;
        CHECK(check_boundary(A, s).verdict);
    }
}

TEST_CASE("simplex solver") {
    lp::Problem p;
    p.A_eq = cols({{1}, {-1}});
    p.b_eq = VectorXd::Zero(1);
    p.lower = VectorXd::Ones(2);
    const auto w = lp::lp_feasible(p);
    REQUIRE(w.has_value());
    CHECK((*w)(0) == doctest::Approx(1.0));
    CHECK((*w)(1) == doctest::Approx(1.0));

    lp::Problem q;
    q.A_eq = cols({{1}, {1}});
    q.b_eq = VectorXd::Constant(1, -1.0);
    q.lower = VectorXd::Zero(2);
    CHECK_FALSE(lp::lp_feasible(q).has_value());

    // maximize x + y s.t. x + 2y <= 4, 3x + y <= 6.
    lp::Problem r;
    r.A_le = cols({{1, 3}, {2, 1}});
    r.b_le = VectorXd(2);
    r.b_le << 4, 6;
    r.lower = VectorXd::Zero(2);
    r.c = VectorXd::Ones(2);
    const auto res = lp::solve(r);
    CHECK(res.status == lp::Status::Optimal);
    CHECK(res.objective == doctest::Approx(2.8));

    r.A_le = cols({{1}, {-1}});
    r.b_le = VectorXd::Constant(1, 1.0);
    CHECK(lp::solve(r).status == lp::Status::Unbounded);
}

TEST_CASE("simplex feasibility against rejection sampling") {
    testing::Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        // A lambda <= b with lambda >= 0 in 2 or 3 variables.
        const auto m = rng.integer(2, 3);
        const auto rows = rng.integer(1, 3);
        lp::Problem p;
        p.A_le = random_matrix(rng, rows, m);
        p.b_le = VectorXd(rows);
        for (Eigen::Index i = 0; i < rows; ++i) p.b_le(i) = rng.uniform(-0.5, 0.5);
        p.lower = VectorXd::Zero(m);
        const bool lp_says = lp::lp_feasible(p).has_value();
        bool found = false;
        VectorXd x(m);
        for (int k = 0; k < 100000 && !found; ++k) {
            for (Eigen::Index i = 0; i < m; ++i) x(i) = rng.uniform(0.0, 3.0);
            found = ((p.A_le * x - p.b_le).array() <= 0.0).all();
        }
        // Sampling can miss thin or far-out feasible sets, never the reverse.
        if (found) CHECK(lp_says);
        if (!lp_says) CHECK_FALSE(found);
    }
}
