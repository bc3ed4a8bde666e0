#include "stla/petrov.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "stla/error.hpp"
#include "stla/positive_span.hpp"

namespace stla::petrov {

const char* to_string(Branch b) noexcept {
    switch (b) {
        case Branch::Trivial: return "trivial";
        case Branch::FixedPoint: return "fixed-point";
        case Branch::DampedFixedPoint: return "damped-fixed-point";
        case Branch::CompassSearch: return "compass-search";
    }
    return "unknown";
}

namespace {

// Enumerate h-subsets of 0..m-1 in lexicographic order while their count stays small.
constexpr long kExhaustiveBlocks = 2000;

long binomial(long m, long h) {
    long c = 1;
    for (long i = 1; i <= h; ++i) {
        c = c * (m - h + i) / i;
        if (c > kExhaustiveBlocks) return c;
    }
    return c;
}

}  // namespace

Block select_invertible_block(const Eigen::MatrixXd& A) {
    const Eigen::Index h = A.rows();
    const Eigen::Index m = A.cols();
    if (m < h) raise(ErrorKind::RankDeficient, "fewer columns than rows");
    if (pspan::rank(A) < h) raise(ErrorKind::RankDeficient, "matrix does not have full row rank");
    Block b;
    if (binomial(m, h) <= kExhaustiveBlocks) {
        // Largest |det|; near-ties go to the lexicographically first subset.
        std::vector<Eigen::Index> subset(static_cast<std::size_t>(h));
        for (Eigen::Index i = 0; i < h; ++i) subset[static_cast<std::size_t>(i)] = i;
        std::vector<Eigen::Index> best;
        double best_det = -1.0;
        Eigen::MatrixXd B(h, h);
        while (true) {
            for (Eigen::Index i = 0; i < h; ++i) B.col(i) = A.col(subset[static_cast<std::size_t>(i)]);
            const double d = std::fabs(B.determinant());
            if (d > best_det * (1.0 + 1e-9)) {
                best_det = d;
                best = subset;
            }
            Eigen::Index i = h - 1;
            while (i >= 0 && subset[static_cast<std::size_t>(i)] == m - h + i) --i;
            if (i < 0) break;
            ++subset[static_cast<std::size_t>(i)];
            for (Eigen::Index j = i + 1; j < h; ++j)
                subset[static_cast<std::size_t>(j)] = subset[static_cast<std::size_t>(j - 1)] + 1;
        }
        b.perm = best;
        for (Eigen::Index j = 0; j < m; ++j)
            if (std::find(best.begin(), best.end(), j) == best.end()) b.perm.push_back(j);
    } else {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
        const auto& indices = qr.colsPermutation().indices();
        b.perm.assign(indices.data(), indices.data() + indices.size());
    }
    b.A1.resize(h, h);
    for (Eigen::Index i = 0; i < h; ++i) b.A1.col(i) = A.col(b.perm[static_cast<std::size_t>(i)]);
    b.abs_det = std::fabs(b.A1.determinant());
    return b;
}

Eigen::VectorXd null_witness(const Eigen::MatrixXd& A, double floor) {
    const auto cert = pspan::is_positive_basis(A);
    if (!cert.verdict || cert.lambda.minCoeff() <= 0.0)
        raise(ErrorKind::InfeasibleWitness, "no strictly positive null combination: " + cert.reason);
    return cert.lambda * (floor / cert.lambda.minCoeff());
}

namespace {

class Solver {
public:
    explicit Solver(const Problem& p) : p_(p), h_(p.A.rows()), m_(p.A.cols()) {
        if (!p_.rho) raise(ErrorKind::DegenerateInput, "Petrov problem without a right-hand side");
    }

    Solution run() {
        const auto cert = pspan::is_positive_basis(p_.A);
        if (!cert.verdict) raise(ErrorKind::BudgetExceeded, "columns are not a positive basis: " + cert.reason);
        block_ = select_invertible_block(p_.A);

        sample_domain();
        Solution sol;
        sol.M = estimate_M();
        sol.b_o = null_witness(p_.A, sol.M + 1.0);
        b_o_ = sol.b_o;
        sol.K = sol.b_o.norm() + 1.0 + sol.M;
        check_hypotheses(sol);

        Eigen::VectorXd tau = Eigen::VectorXd::Zero(m_);
        double res = residual(tau);
        if (res <= p_.tol) {
            sol.tau = tau;
            sol.residual = res;
            sol.branch = Branch::Trivial;
            return finish(sol);
        }

        Eigen::VectorXd best = tau;
        double best_res = res;
        bool damped = false;
        int stall = 0;
        int it = 0;
        for (; it < p_.max_iters; ++it) {
            Eigen::VectorXd next = clip(phi(tau));
            if (damped) next = clip(0.5 * tau + 0.5 * next);
            tau = next;
            res = residual(tau);
            if (res < best_res) {
                stall = res < 0.999 * best_res ? 0 : stall + 1;
                best_res = res;
                best = tau;
            } else {
                ++stall;
            }
            if (best_res <= p_.tol) break;
            if (stall >= 25) {
                if (damped) break;
                damped = true;
                stall = 0;
                tau = best;
            }
        }
        sol.iterations = it + 1;
        sol.branch = damped ? Branch::DampedFixedPoint : Branch::FixedPoint;
        if (best_res > p_.tol) {
            // Search the ball that carries the a priori bound first, then the whole domain.
            Eigen::VectorXd capped = cap(best, sol.K * rho_sup_);
            double capped_res = residual(capped);
            capped = compass(capped, capped_res, sol.iterations, sol.K * rho_sup_);
            if (capped_res <= p_.tol || capped_res < best_res) {
                best = capped;
                best_res = capped_res;
            }
            if (best_res > p_.tol) best = compass(best, best_res, sol.iterations, p_.delta);
            sol.branch = Branch::CompassSearch;
        }
        sol.tau = best;
        sol.residual = best_res;
        if (best_res > p_.tol)
            raise(ErrorKind::NoConvergence, "Petrov solve stopped at residual " + std::to_string(best_res) + " after " +
                                                std::to_string(sol.iterations) + " iterations");
        return finish(sol);
    }

private:
    Eigen::MatrixXd gamma(const Eigen::VectorXd& tau) const {
        if (!p_.gamma) return Eigen::MatrixXd::Zero(h_, m_);
        Eigen::MatrixXd g = p_.gamma(tau);
        if (g.rows() != h_ || g.cols() != m_) raise(ErrorKind::DimensionMismatch, "gamma has the wrong shape");
        return g;
    }

    Eigen::VectorXd rho(const Eigen::VectorXd& tau) {
        Eigen::VectorXd r = p_.rho(tau);
        if (r.size() != h_) raise(ErrorKind::DimensionMismatch, "rho has the wrong length");
        rho_sup_ = std::max(rho_sup_, r.norm());
        return r;
    }

    Eigen::MatrixXd block_of(const Eigen::MatrixXd& full) const {
        Eigen::MatrixXd a1(h_, h_);
        for (Eigen::Index i = 0; i < h_; ++i) a1.col(i) = full.col(block_.perm[static_cast<std::size_t>(i)]);
        return a1;
    }

    double residual(const Eigen::VectorXd& tau) {
        return ((p_.A + gamma(tau)) * tau - rho(tau)).norm();
    }

    Eigen::VectorXd phi(const Eigen::VectorXd& tau) {
        const Eigen::MatrixXd g = gamma(tau);
        const Eigen::VectorXd r = rho(tau);
        const double nr = r.norm();
        if (nr == 0.0) return Eigen::VectorXd::Zero(m_);
        const Eigen::PartialPivLU<Eigen::MatrixXd> lu(block_of(p_.A + g));
        const Eigen::VectorXd sharp = -lu.solve(g * b_o_);
        const Eigen::VectorXd c = lu.solve(r);
        Eigen::VectorXd out = nr * b_o_;
        for (Eigen::Index i = 0; i < h_; ++i) out(block_.perm[static_cast<std::size_t>(i)]) += nr * sharp(i) + c(i);
        return out;
    }

    Eigen::VectorXd clip(Eigen::VectorXd tau) {
        bool clipped = false;
        for (Eigen::Index i = 0; i < tau.size(); ++i)
            if (tau(i) < 0.0) {
                clipped = clipped || tau(i) < -1e-15;
                tau(i) = 0.0;
            }
        const double n = tau.norm();
        if (n > p_.delta) {
            tau *= p_.delta / n;
            clipped = true;
        }
        if (clipped) ++clip_count_;
        return tau;
    }

    // Points of the domain {tau >= 0, |tau| <= delta}: the cube corners pushed
    // onto the sphere, the origin, and the center of the inscribed cube.
    void sample_domain() {
        samples_.push_back(Eigen::VectorXd::Zero(m_));
        samples_.push_back(Eigen::VectorXd::Constant(m_, p_.delta / (2.0 * std::sqrt(static_cast<double>(m_)))));
        auto add_corner = [&](std::uint64_t bits) {
            Eigen::VectorXd c(m_);
            for (Eigen::Index i = 0; i < m_; ++i) c(i) = (bits >> i) & 1u ? 1.0 : 0.0;
            if (c.norm() > 0.0) samples_.push_back(c * (p_.delta / c.norm()));
        };
        if (m_ <= 12) {
            for (std::uint64_t bits = 1; bits < (std::uint64_t{1} << m_); ++bits) add_corner(bits);
        } else {
            std::mt19937_64 rng(0);
            for (int i = 0; i < 4096; ++i) add_corner(rng());
        }
    }

    double estimate_M() {
        double sup = 0.0;
        for (const auto& tau : samples_) {
            const Eigen::JacobiSVD<Eigen::MatrixXd> svd(block_of(p_.A + gamma(tau)));
            const double smin = svd.singularValues().minCoeff();
            if (smin <= 1e-14 * std::max(1.0, svd.singularValues().maxCoeff())) {
                violation("the invertible block becomes singular inside the domain");
                continue;
            }
            sup = std::max(sup, 1.0 / smin);
        }
        return 1.5 * sup;
    }

    void check_hypotheses(Solution& sol) {
        double drift = 0.0;
        for (const auto& tau : samples_) {
            const Eigen::MatrixXd g = gamma(tau);
            const Eigen::PartialPivLU<Eigen::MatrixXd> lu(block_of(p_.A + g));
            drift = std::max(drift, lu.solve(g * b_o_).lpNorm<Eigen::Infinity>());
            rho(tau);
        }
        if (drift > 1.0) violation("perturbation too large: max |A_1^{-1} gamma b_o| = " + std::to_string(drift) + " > 1");
        if (rho_sup_ * sol.K > p_.delta * (1.0 + 1e-12))
            violation("right-hand side too large: K sup|rho| = " + std::to_string(rho_sup_ * sol.K) +
                      " exceeds delta = " + std::to_string(p_.delta));
        sol.warnings = warnings_;
    }

    void violation(const std::string& what) {
        if (p_.enforce_hypotheses) raise(ErrorKind::BudgetExceeded, what);
        warnings_.push_back(what);
    }

    static Eigen::VectorXd cap(Eigen::VectorXd x, double radius) {
        const double n = x.norm();
        if (n > radius) x *= radius / n;
        return x;
    }

    Eigen::VectorXd compass(Eigen::VectorXd x, double& best_res, int& evals, double radius) {
        double step = std::max(0.1 * radius, x.norm());
        const int budget = evals + p_.compass_budget;
        while (step > 1e-17 * std::max(1.0, p_.delta) && best_res > p_.tol && evals < budget) {
            bool improved = false;
            for (Eigen::Index i = 0; i < m_ && !improved; ++i)
                for (double sign : {1.0, -1.0}) {
                    Eigen::VectorXd y = x;
                    y(i) += sign * step;
                    y = cap(clip(y), radius);
                    const double r = residual(y);
                    ++evals;
                    if (r < best_res) {
                        best_res = r;
                        x = y;
                        improved = true;
                        break;
                    }
                }
            if (!improved) step *= 0.5;
        }
        return x;
    }

    Solution finish(Solution& sol) {
        sol.rho_sup = rho_sup_;
        sol.clip_count = clip_count_;
        sol.bound_ok = sol.tau.norm() <= sol.K * sol.rho_sup * (1.0 + 1e-12) + 1e-300;
        sol.warnings = warnings_;
        return sol;
    }

    const Problem& p_;
    Eigen::Index h_;
    Eigen::Index m_;
    Block block_;
    Eigen::VectorXd b_o_;
    std::vector<Eigen::VectorXd> samples_;
    std::vector<std::string> warnings_;
    double rho_sup_ = 0.0;
    int clip_count_ = 0;
};

}  // namespace

Solution solve(const Problem& problem) { return Solver(problem).run(); }

Solution solve_boundary(const Problem& problem) {
    if (!problem.s) raise(ErrorKind::DegenerateInput, "boundary solve needs the extra row s");
    const Eigen::Index h = problem.A.rows();
    const Eigen::Index m = problem.A.cols();
    if (problem.s->size() != m) raise(ErrorKind::DimensionMismatch, "extra row length differs from column count");

    const auto cert = pspan::check_boundary(problem.A, *problem.s);
    if (!cert.verdict) raise(ErrorKind::BudgetExceeded, "boundary spanning condition fails: " + cert.reason);

    Problem aug;
    aug.A = Eigen::MatrixXd::Zero(h + 1, m + 1);
    aug.A.topLeftCorner(h, m) = problem.A;
    aug.A.bottomLeftCorner(1, m) = problem.s->transpose();
    aug.A(h, m) = -1.0;
    if (problem.gamma) {
        aug.gamma = [&problem, h, m](const Eigen::VectorXd& t) {
            Eigen::MatrixXd g = Eigen::MatrixXd::Zero(h + 1, m + 1);
            g.topLeftCorner(h, m) = problem.gamma(t.head(m));
            return g;
        };
    }
    aug.rho = [&problem, m](const Eigen::VectorXd& t) { return problem.rho(t.head(m)); };
    aug.delta = problem.delta;
    aug.tol = problem.tol;
    aug.max_iters = problem.max_iters;
    aug.compass_budget = problem.compass_budget;
    aug.enforce_hypotheses = problem.enforce_hypotheses;

    Solution sol = solve(aug);
    sol.slack = sol.tau(m);
    sol.tau = sol.tau.head(m).eval();
    return sol;
}

}  // namespace stla::petrov
