#include "oracle.hpp"

#include <cmath>
#include <limits>

#include "stla/simplex.hpp"

namespace stla::testing {

Expr sym_H(const SymField& f, const Expr& u) {
    Expr out = Expr::constant(0.0);
    for (std::size_t i = 0; i < f.size(); ++i) out = out + f[i] * expr::symbolic_partial(u, i);
    return out;
}

Expr sym_H_power(const SymField& f, const Expr& u, int k) {
    Expr out = u;
    for (int i = 0; i < k; ++i) out = sym_H(f, out);
    return out;
}

Expr sym_boxplus(const std::vector<SymField>& fields, const Expr& u, int k) {
    if (fields.size() == 1) return sym_H_power(fields[0], u, k);
    const std::vector<SymField> rest(fields.begin() + 1, fields.end());
    Expr out = Expr::constant(0.0);
    double binom = 1.0;
    for (int a = 0; a <= k; ++a) {
        out = out + Expr::constant(binom) * sym_H_power(fields[0], sym_boxplus(rest, u, k - a), a);
        binom = binom * (k - a) / (a + 1);
    }
    return out;
}

double oracle_boxplus(const std::vector<SymField>& fields, const Expr& u, int k, const std::vector<double>& x0) {
    return expr::eval_point(sym_boxplus(fields, u, k), x0);
}

SymField sym_bracket(const SymField& f, const SymField& g) {
    SymField out;
    for (std::size_t i = 0; i < f.size(); ++i) out.push_back(sym_H(f, g[i]) - sym_H(g, f[i]));
    return out;
}

std::vector<double> eval_field(const SymField& f, const std::vector<double>& x0) {
    std::vector<double> out;
    for (const auto& c : f) out.push_back(expr::eval_point(c, x0));
    return out;
}

std::vector<std::string> var_names(std::size_t n) {
    std::vector<std::string> v;
    for (std::size_t i = 0; i < n; ++i) v.push_back("x" + std::to_string(i + 1));
    return v;
}

Expr coordinate(std::size_t i) { return Expr::variable(i, "x" + std::to_string(i + 1)); }

SymField parse_field(const std::vector<std::string>& comps, const std::vector<std::string>& vars) {
    SymField f;
    for (const auto& c : comps) f.push_back(expr::parse(c, vars));
    return f;
}

Expr random_poly(Rng& rng, std::size_t n, int degree, double density) {
    Expr out = Expr::constant(0.0);
    std::vector<int> alpha(n, 0);
    auto rec = [&](auto&& self, std::size_t i, int left) -> void {
        if (i == n) {
            if (rng.uniform(0.0, 1.0) > density) return;
            Expr term = Expr::constant(std::round(rng.uniform(-1.0, 1.0) * 64.0) / 64.0);
            for (std::size_t j = 0; j < n; ++j)
                if (alpha[j] > 0) term = term * expr::pow(coordinate(j), alpha[j]);
            out = out + term;
            return;
        }
        for (int a = 0; a <= left; ++a) {
            alpha[i] = a;
            self(self, i + 1, left - a);
        }
        alpha[i] = 0;
    };
    rec(rec, 0, degree);
    return out;
}

SymField random_field(Rng& rng, std::size_t n, int degree, double density) {
    SymField f;
    for (std::size_t i = 0; i < n; ++i) f.push_back(random_poly(rng, n, degree, density));
    return f;
}

std::vector<double> random_point(Rng& rng, std::size_t n, double scale) {
    std::vector<double> x(n);
    for (auto& v : x) v = rng.uniform(-scale, scale);
    return x;
}

Eigen::VectorXd random_unit(Rng& rng, std::size_t n) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
    return v / v.norm();
}

bool sampled_positive_span(const Eigen::MatrixXd& A, Rng& rng, int count) {
    Eigen::VectorXd x(A.rows());
    for (int j = 0; j < count; ++j) {
        for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
        x.normalize();
        if ((A.transpose() * x).minCoeff() >= 0.0) return false;
    }
    return true;
}

bool sampled_boundary(const Eigen::MatrixXd& A, const Eigen::VectorXd& s, Rng& rng, int samples) {
    const auto h = A.rows(), m = A.cols();
    for (int j = 0; j < samples; ++j) {
        lp::Problem p;
        p.A_eq = A;
        p.b_eq.resize(h);
        for (Eigen::Index i = 0; i < h; ++i) p.b_eq(i) = rng.uniform(-1.0, 1.0);
        p.A_le = -s.transpose();
        p.b_le = Eigen::VectorXd::Constant(1, -std::pow(10.0, rng.uniform(-3.0, 6.0)));
        p.lower = Eigen::VectorXd::Zero(m);
        if (!lp::lp_feasible(p)) return false;
    }
    return true;
}

double grid_best_residual(const Eigen::MatrixXd& A,
                          const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& gamma,
                          const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& rho, double box,
                          double step) {
    const auto m = A.cols();
    const long per_axis = static_cast<long>(std::floor(box / step + 1e-9)) + 1;
    std::vector<long> idx(static_cast<std::size_t>(m), 0);
    Eigen::VectorXd tau(m);
    double best = std::numeric_limits<double>::infinity();
    while (true) {
        for (Eigen::Index i = 0; i < m; ++i) tau(i) = static_cast<double>(idx[static_cast<std::size_t>(i)]) * step;
        Eigen::MatrixXd M = A;
        if (gamma) M += gamma(tau);
        best = std::min(best, (M * tau - rho(tau)).norm());
        std::size_t d = 0;
        while (d < idx.size() && ++idx[d] == per_axis) idx[d++] = 0;
        if (d == idx.size()) break;
    }
    return best;
}

PetrovInstance petrov_instance(Rng& rng, int h_max, int m_max, double gamma_rel, double rho_norm) {
    const int h = rng.integer(1, h_max);
    const int m = rng.integer(h + 1, std::max(h + 1, m_max));
    PetrovInstance inst;
    inst.A.resize(h, m);
    // Redraw until A is well conditioned: random bases with a nearly singular
    // leading block lose positive spanning under a 10% perturbation.
    while (true) {
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < h; ++j) inst.A(i, j) = rng.uniform(-1.0, 1.0);
        // Column h closes the cone; any further columns are free.
        Eigen::VectorXd w(h);
        for (int i = 0; i < h; ++i) w(i) = rng.uniform(0.5, 1.0);
        inst.A.col(h) = -inst.A.leftCols(h) * w;
        for (int j = h + 1; j < m; ++j)
            for (int i = 0; i < h; ++i) inst.A(i, j) = rng.uniform(-1.0, 1.0);
        const Eigen::JacobiSVD<Eigen::MatrixXd> lead(inst.A.leftCols(h));
        const auto sv = lead.singularValues();
        if (sv(h - 1) >= 0.4 * sv(0)) break;
    }

    Eigen::MatrixXd G0(h, m);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < m; ++j) G0(i, j) = rng.uniform(-1.0, 1.0);
    inst.G = gamma_rel * inst.A.norm() / G0.norm() * G0;
    inst.v.resize(h);
    for (int i = 0; i < h; ++i) inst.v(i) = rng.normal();
    inst.v *= rho_norm / inst.v.norm();

    const Eigen::MatrixXd G = inst.G;
    const Eigen::VectorXd v = inst.v;
    inst.gamma = [G](const Eigen::VectorXd& tau) -> Eigen::MatrixXd { return std::cos(tau.norm()) * G; };
    inst.rho = [v](const Eigen::VectorXd& tau) -> Eigen::VectorXd { return v * (1.0 + 0.1 * std::sin(tau(0))); };
    return inst;
}

ControlSystem make_system(const std::vector<SymField>& fields, Structure s) {
    ControlSystem sys;
    sys.variables = var_names(fields.front().size());
    for (std::size_t i = 0; i < fields.size(); ++i) sys.fields.push_back({"f" + std::to_string(i + 1), fields[i]});
    sys.structure = s;
    return sys;
}

}  // namespace stla::testing
