#pragma once

// Independent reference computations for the tests: boxplus powers built from
// nested symbolic derivatives, and seeded generators of random inputs.

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stla/expr.hpp"
#include "stla/system.hpp"

namespace stla::testing {

using expr::Expr;
using SymField = std::vector<Expr>;

/// f . grad u, symbolically.
Expr sym_H(const SymField& f, const Expr& u);
Expr sym_H_power(const SymField& f, const Expr& u, int k);
/// (H_f1 [+] ... [+] H_fm)^k u from the multinomial definition, peeling the first field:
/// sum_a C(k, a) H_f1^a (rest)^{k-a} u.
Expr sym_boxplus(const std::vector<SymField>& fields, const Expr& u, int k);
double oracle_boxplus(const std::vector<SymField>& fields, const Expr& u, int k, const std::vector<double>& x0);
/// [f, g] = Dg f - Df g, symbolically.
SymField sym_bracket(const SymField& f, const SymField& g);
std::vector<double> eval_field(const SymField& f, const std::vector<double>& x0);

std::vector<std::string> var_names(std::size_t n);
Expr coordinate(std::size_t i);
SymField parse_field(const std::vector<std::string>& comps, const std::vector<std::string>& vars);

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(gen_); }
    int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(gen_); }
    double normal() { return std::normal_distribution<double>()(gen_); }
    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

/// Random polynomial of total degree <= degree; each monomial present with
/// probability `density`, coefficients uniform in [-1, 1].
Expr random_poly(Rng& rng, std::size_t n, int degree, double density = 0.6);
SymField random_field(Rng& rng, std::size_t n, int degree, double density = 0.6);
std::vector<double> random_point(Rng& rng, std::size_t n, double scale = 0.5);
Eigen::VectorXd random_unit(Rng& rng, std::size_t n);

/// Direction-sampling test for positive spanning: every sampled unit x has a
/// column with a_i . x < 0. Directions are Gaussian samples, normalized.
bool sampled_positive_span(const Eigen::MatrixXd& A, Rng& rng, int count);

/// Boundary spanning by sampling: for each (p, r) with p in [-1,1]^h and r
/// log-uniform in [1e-3, 1e6], lambda >= 0 with A lambda = p and s.lambda >= r
/// must exist (one LP per sample).
bool sampled_boundary(const Eigen::MatrixXd& A, const Eigen::VectorXd& s, Rng& rng, int samples);

/// Smallest |(A + gamma(tau)) tau - rho(tau)| over the grid {0, h, 2h, ...}^m
/// clipped to [0, box]^m.
double grid_best_residual(const Eigen::MatrixXd& A,
                          const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& gamma,
                          const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& rho, double box,
                          double step);

/// Synthetic Petrov instance: A is a positive basis (h <= h_max rows,
/// h + 1 <= m <= m_max columns), gamma(tau) = cos(|tau|) G with
/// ||G|| = gamma_rel ||A||, and rho(tau) = v (1 + 0.1 sin(tau_1)) with |v| = rho_norm.
struct PetrovInstance {
    Eigen::MatrixXd A;
    Eigen::MatrixXd G;
    Eigen::VectorXd v;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> gamma;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> rho;
};
PetrovInstance petrov_instance(Rng& rng, int h_max, int m_max, double gamma_rel, double rho_norm);

/// A ControlSystem over x1..xn with the given fields named f1, f2, ...
ControlSystem make_system(const std::vector<SymField>& fields, Structure s = Structure::General);

}  // namespace stla::testing
