#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace stla::petrov {

using Gamma = std::function<Eigen::MatrixXd(const Eigen::VectorXd& tau)>;
using Rho = std::function<Eigen::VectorXd(const Eigen::VectorXd& tau)>;

/// Find tau >= 0 with (A + gamma(tau)) tau = rho(tau) for a matrix A whose
/// columns positively span R^h. gamma and rho must be pure.
struct Problem {
    Eigen::MatrixXd A;
    /// Defaults to the zero perturbation.
    Gamma gamma;
    Rho rho;
    /// Extra row for the boundary variant (solve_boundary only).
    std::optional<Eigen::VectorXd> s;
    /// Radius of the search domain {tau >= 0, |tau| <= delta}.
    double delta = 1.0;
    double tol = 1e-10;
    int max_iters = 10000;
    /// Residual evaluations allowed in the compass-search fallback.
    int compass_budget = 200000;
    /// When false, violated smallness hypotheses are recorded instead of thrown.
    bool enforce_hypotheses = true;
};

enum class Branch { Trivial, FixedPoint, DampedFixedPoint, CompassSearch };

const char* to_string(Branch b) noexcept;

struct Block {
    /// Column order: the first h entries index the invertible block A_1.
    std::vector<Eigen::Index> perm;
    Eigen::MatrixXd A1;
    double abs_det = 0.0;
};

struct Solution {
    Eigen::VectorXd tau;
    double residual = 0.0;
    int iterations = 0;
    Branch branch = Branch::Trivial;
    /// Sampled sup of ||A_1(tau)^{-1}|| times the safety factor.
    double M = 0.0;
    Eigen::VectorXd b_o;
    /// |b_o| + 1 + M
    double K = 0.0;
    /// max ||rho|| over the sampled domain and the iterates.
    double rho_sup = 0.0;
    bool bound_ok = false;
    /// Boundary variant: the slack h(x) >= 0 absorbed by the last row.
    double slack = 0.0;
    int clip_count = 0;
    /// Hypotheses found violated when enforce_hypotheses is false.
    std::vector<std::string> warnings;
};

/// h columns with the largest |det| (exhaustive while C(m, h) <= 2000, ties to the
/// lexicographically first subset; column-pivoted QR beyond that).
/// Throws Error(RankDeficient) when rank(A) < h.
Block select_invertible_block(const Eigen::MatrixXd& A);

/// b_o with A b_o = 0 and min_i (b_o)_i = floor, from the positive-basis witness.
/// Throws Error(InfeasibleWitness) when no strictly positive witness exists.
Eigen::VectorXd null_witness(const Eigen::MatrixXd& A, double floor);

/// Fixed-point iteration of tau -> |rho| b(tau) + (A_1(tau)^{-1} rho, 0), where
/// b(tau) = b_o - (A_1^{-1} gamma b_o, 0) lies in the kernel of A + gamma(tau).
/// Stalls switch to 0.5 damping, then to a compass search on the residual.
/// Errors: BudgetExceeded (hypotheses fail), NoConvergence.
Solution solve(const Problem& problem);

/// Boundary variant: (A + gamma) tau = rho with the last row allowed to exceed
/// by a slack h >= 0. Reduced to solve() on [[A_top, 0], [s, -1]] with the
/// slack as an extra unknown; that matrix is a positive basis exactly when the
/// boundary spanning condition holds.
Solution solve_boundary(const Problem& problem);

}  // namespace stla::petrov
