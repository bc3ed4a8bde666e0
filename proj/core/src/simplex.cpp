#include "stla/simplex.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "stla/error.hpp"

namespace stla::lp {

Eigen::Index Problem::n_vars() const {
    if (A_eq.rows() > 0) return A_eq.cols();
    if (A_le.rows() > 0) return A_le.cols();
    if (lower.size() > 0) return lower.size();
    return c.size();
}

namespace {

class Tableau {
public:
    Tableau(Eigen::MatrixXd t, std::vector<Eigen::Index> basis, Eigen::Index n_structural, double tol, int max_pivots)
        : t_(std::move(t)), basis_(std::move(basis)), n_struct_(n_structural), tol_(tol), max_pivots_(max_pivots) {}

    Eigen::Index rows() const { return t_.rows() - 1; }
    Eigen::Index rhs() const { return t_.cols() - 1; }
    Eigen::Index obj() const { return t_.rows() - 1; }

    // Objective row holds z_j - c_j; a column may enter while it is < -tol.
    void set_objective(const Eigen::VectorXd& cost) {
        t_.row(obj()).setZero();
        for (Eigen::Index j = 0; j < rhs(); ++j) t_(obj(), j) = -cost(j);
        for (Eigen::Index i = 0; i < rows(); ++i) {
            const double cb = cost(basis_[static_cast<std::size_t>(i)]);
            if (cb != 0.0) t_.row(obj()) += cb * t_.row(i);
        }
    }

    // Returns false when the objective is unbounded.
    bool optimize(Eigen::Index allowed_cols) {
        for (;;) {
            Eigen::Index enter = -1;
            for (Eigen::Index j = 0; j < allowed_cols; ++j)
                if (t_(obj(), j) < -tol_) {
                    enter = j;
                    break;
                }
            if (enter < 0) return true;

            double best = std::numeric_limits<double>::infinity();
            for (Eigen::Index i = 0; i < rows(); ++i)
                if (t_(i, enter) > tol_) best = std::min(best, std::max(0.0, t_(i, rhs())) / t_(i, enter));
            if (!std::isfinite(best)) return false;

            // Bland: among minimum-ratio rows, the smallest basic index leaves.
            Eigen::Index leave = -1;
            for (Eigen::Index i = 0; i < rows(); ++i) {
                if (t_(i, enter) <= tol_) continue;
                const double ratio = std::max(0.0, t_(i, rhs())) / t_(i, enter);
                if (ratio > best + tol_ * std::max(1.0, best)) continue;
                if (leave < 0 || basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)]) leave = i;
            }
            pivot(leave, enter);
        }
    }

    void pivot(Eigen::Index r, Eigen::Index c) {
        if (++pivots_ > max_pivots_) raise(ErrorKind::NumericalBreakdown, "simplex pivot budget exhausted");
        t_.row(r) /= t_(r, c);
        for (Eigen::Index i = 0; i < t_.rows(); ++i) {
            if (i == r) continue;
            const double f = t_(i, c);
            if (f != 0.0) t_.row(i) -= f * t_.row(r);
            t_(i, c) = 0.0;
        }
        basis_[static_cast<std::size_t>(r)] = c;
    }

    // Pivot artificial variables out of the basis where a structural column allows it.
    void expel(Eigen::Index first_artificial) {
        for (Eigen::Index i = 0; i < rows(); ++i) {
            if (basis_[static_cast<std::size_t>(i)] < first_artificial) continue;
            for (Eigen::Index j = 0; j < first_artificial; ++j)
                if (std::fabs(t_(i, j)) > tol_) {
                    pivot(i, j);
                    break;
                }
        }
    }

    double objective_value() const { return t_(obj(), rhs()); }

    Eigen::VectorXd primal() const {
        Eigen::VectorXd y = Eigen::VectorXd::Zero(n_struct_);
        for (Eigen::Index i = 0; i < rows(); ++i) {
            const Eigen::Index b = basis_[static_cast<std::size_t>(i)];
            if (b < n_struct_) y(b) = std::max(0.0, t_(i, rhs()));
        }
        return y;
    }

    int pivots() const { return pivots_; }

private:
    Eigen::MatrixXd t_;
    std::vector<Eigen::Index> basis_;
    Eigen::Index n_struct_;
    double tol_;
    int max_pivots_;
    int pivots_ = 0;
};

}  // namespace

Result solve(const Problem& p, double tol) {
    const Eigen::Index n = p.n_vars();
    const Eigen::Index m_eq = p.A_eq.rows();
    const Eigen::Index m_le = p.A_le.rows();
    if ((m_eq > 0 && (p.A_eq.cols() != n || p.b_eq.size() != m_eq)) ||
        (m_le > 0 && (p.A_le.cols() != n || p.b_le.size() != m_le)) || (p.lower.size() != 0 && p.lower.size() != n) ||
        (p.c.size() != 0 && p.c.size() != n))
        raise(ErrorKind::DimensionMismatch, "inconsistent LP dimensions");

    const Eigen::VectorXd lower = p.lower.size() == n ? p.lower : Eigen::VectorXd::Zero(n);

    // Standard form over y = x - lower >= 0 plus one slack per inequality row.
    const Eigen::Index rows = m_eq + m_le;
    const Eigen::Index n_struct = n + m_le;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, n_struct);
    Eigen::VectorXd b(rows);
    if (m_eq > 0) {
        A.topLeftCorner(m_eq, n) = p.A_eq;
        b.head(m_eq) = p.b_eq - p.A_eq * lower;
    }
    if (m_le > 0) {
        A.bottomLeftCorner(m_le, n) = p.A_le;
        A.bottomRightCorner(m_le, m_le).setIdentity();
        b.tail(m_le) = p.b_le - p.A_le * lower;
    }
    for (Eigen::Index i = 0; i < rows; ++i)
        if (b(i) < 0) {
            A.row(i) *= -1.0;
            b(i) = -b(i);
        }

    Result result;
    if (rows == 0) {
        // Only bounds: the lower corner is a vertex; unbounded if any cost is positive.
        result.x = lower;
        if (p.c.size() == n && (p.c.array() > tol).any()) {
            result.status = Status::Unbounded;
            return result;
        }
        result.status = Status::Optimal;
        result.objective = p.c.size() == n ? p.c.dot(lower) : 0.0;
        return result;
    }

    const Eigen::Index cols = n_struct + rows;
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(rows + 1, cols + 1);
    t.topLeftCorner(rows, n_struct) = A;
    t.block(0, n_struct, rows, rows).setIdentity();
    t.topRightCorner(rows, 1) = b;
    std::vector<Eigen::Index> basis(static_cast<std::size_t>(rows));
    for (Eigen::Index i = 0; i < rows; ++i) basis[static_cast<std::size_t>(i)] = n_struct + i;

    const int max_pivots = 200 * static_cast<int>(rows + cols) + 1000;
    Tableau tab(std::move(t), std::move(basis), n_struct, tol, max_pivots);

    Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(cols);
    phase1.tail(rows).setConstant(-1.0);
    tab.set_objective(phase1);
    tab.optimize(cols);
    const double infeas = -tab.objective_value();
    if (infeas > tol * std::max(1.0, b.cwiseAbs().maxCoeff())) {
        result.status = Status::Infeasible;
        result.pivots = tab.pivots();
        return result;
    }
    tab.expel(n_struct);

    Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(cols);
    if (p.c.size() == n) phase2.head(n) = p.c;
    tab.set_objective(phase2);
    const bool bounded = tab.optimize(n_struct);

    result.pivots = tab.pivots();
    result.x = lower + tab.primal().head(n);
    if (!bounded) {
        result.status = Status::Unbounded;
        return result;
    }
    result.status = Status::Optimal;
    result.objective = p.c.size() == n ? p.c.dot(result.x) : 0.0;
    return result;
}

std::optional<Eigen::VectorXd> lp_feasible(const Problem& p, double tol) {
    Problem q = p;
    q.c.resize(0);
    const Result r = solve(q, tol);
    if (r.status == Status::Infeasible) return std::nullopt;
    return r.x;
}

}  // namespace stla::lp
