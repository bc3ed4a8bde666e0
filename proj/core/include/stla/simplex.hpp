#pragma once

#include <optional>

#include <Eigen/Dense>

namespace stla::lp {

/// maximize c.x  subject to  A_eq x = b_eq,  A_le x <= b_le,  x >= lower.
///
/// Any block may be empty (zero rows). An empty objective means pure feasibility.
struct Problem {
    Eigen::MatrixXd A_eq;
    Eigen::VectorXd b_eq;
    Eigen::MatrixXd A_le;
    Eigen::VectorXd b_le;
    Eigen::VectorXd lower;
    Eigen::VectorXd c;

    Eigen::Index n_vars() const;
};

enum class Status { Optimal, Infeasible, Unbounded };

struct Result {
    Status status = Status::Infeasible;
    Eigen::VectorXd x;
    double objective = 0.0;
    int pivots = 0;
};

inline constexpr double kPivotTol = 1e-9;

/// Dense two-phase tableau simplex with Bland's anti-cycling rule.
/// Returns a vertex of the feasible set. Throws Error(NumericalBreakdown) when
/// the pivot budget is exhausted.
Result solve(const Problem& p, double tol = kPivotTol);

/// Feasibility only; the witness is a vertex of {x : constraints}.
std::optional<Eigen::VectorXd> lp_feasible(const Problem& p, double tol = kPivotTol);

}  // namespace stla::lp
