#include "stla/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>
#include <thread>

#include "stla/hamiltonian.hpp"
#include "stla/jet.hpp"
#include "stla/petrov.hpp"

namespace stla::engine {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double factorial(int k) {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
}

std::vector<double> as_vector(const Eigen::VectorXd& x) { return {x.data(), x.data() + x.size()}; }

std::vector<jet::ScalarGerm> lift_all(const std::vector<expr::Expr>& fs, const std::vector<double>& x, int degree) {
    std::vector<jet::ScalarGerm> out;
    out.reserve(fs.size());
    for (const auto& e : fs) out.push_back(jet::lift(e, x, degree));
    return out;
}

std::vector<jet::VectorGerm> lift_fields(const std::vector<VectorFieldDef>& defs, const std::vector<double>& x,
                                         int degree) {
    std::vector<jet::VectorGerm> out;
    out.reserve(defs.size());
    for (const auto& d : defs) out.push_back(lift_field(d, x, std::max(degree, 0)));
    return out;
}

double tolerance_for(double scale, const Options& opts) { return opts.tol_rel * std::max(1.0, scale); }

// Jacobian of the functions at x, one row per function.
Eigen::MatrixXd jacobian_at(const std::vector<expr::Expr>& fs, const std::vector<double>& x) {
    const std::size_t n = x.size();
    Eigen::MatrixXd J(static_cast<Eigen::Index>(fs.size()), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < fs.size(); ++r) {
        const auto g = jet::lift(fs[r], x, 1);
        for (std::size_t j = 0; j < n; ++j)
            J(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = g.poly.coefficient(jet::MultiIndex::unit(j));
    }
    return J;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

// Raw coefficients and scale of a group on a list of functions, orders 1..K.
ham::HamCoeffs group_sequence(const ControlSystem& sys, const std::vector<expr::Expr>& functions,
                              const std::vector<double>& x, const GroupSpec& group, int K) {
    const auto defs = resolve_group(sys, group);
    if (defs.empty()) raise(ErrorKind::DegenerateInput, "empty group");
    const auto fields = lift_fields(defs, x, K - 1);
    const auto us = lift_all(functions, x, K);
    return ham::boxplus_sequence(fields, us, K);
}

// Lowest-order coefficients (|| (+)^r I(x_o) ||, r < k) of a group's trajectory.
ham::HamCoeffs trajectory_sequence(const ControlSystem& sys, const std::vector<double>& x, const GroupSpec& group,
                                   int K) {
    const auto fields = lift_fields(resolve_group(sys, group), x, K);
    return ham::trajectory_coeffs(fields, K);
}

double petrov_constant(const Eigen::MatrixXd& A) {
    const auto block = petrov::select_invertible_block(A);
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(block.A1);
    const double M = 1.5 / svd.singularValues().minCoeff();
    const Eigen::VectorXd b_o = petrov::null_witness(A, M + 1.0);
    return b_o.norm() + 1.0 + M;
}

void finish_span(StlaCertificate& cert) {
    if (!cert.span || !cert.span->verdict) return;
    try {
        cert.K = petrov_constant(cert.A);
        cert.eccentricity = pspan::eccentricity(cert.span->lambda);
    } catch (const Error&) {
        cert.K = kInf;
    }
}

void set_margin(StlaCertificate& cert) {
    cert.worst_margin = kInf;
    cert.tolerance = 0.0;
    for (const auto& g : cert.groups) {
        cert.tolerance = std::max(cert.tolerance, g.tolerance);
        if (g.max_vanishing > 0.0) cert.worst_margin = std::min(cert.worst_margin, g.tolerance / g.max_vanishing);
    }
}

void fail(StlaCertificate& cert, ErrorKind kind, std::string detail) {
    if (cert.failure) return;
    cert.certified = false;
    cert.failure = kind;
    cert.detail = std::move(detail);
}

// ---- sampled dependence structure --------------------------------------------

using VarSet = std::vector<bool>;

struct DependenceProbe {
    std::vector<double> x_o;
    std::vector<std::vector<double>> samples;
    double tol_rel;

    // Variables the expression depends on: jet coefficients at x_o, then
    // first partial derivatives at the sample points.
    VarSet operator()(const expr::Expr& e) const {
        const std::size_t n = x_o.size();
        VarSet dep(n, false);
        try {
            const auto g = jet::lift(e, x_o, 3);
            const double tol = tol_rel * std::max(1.0, g.poly.max_abs_coefficient());
            for (std::size_t j = 0; j < n; ++j) dep[j] = g.poly.involves(j, tol);
            for (std::size_t j = 0; j < n; ++j) {
                if (dep[j]) continue;
                const expr::Program d(expr::symbolic_partial(e, j));
                for (const auto& p : samples)
                    if (std::fabs(d(p)) > tol) {
                        dep[j] = true;
                        break;
                    }
            }
        } catch (const Error&) {
            dep.assign(n, true);
        }
        return dep;
    }
};

DependenceProbe make_probe(const ControlSystem& sys, const std::vector<double>& x, const Options& opts) {
    return DependenceProbe{x, ball_points(x, sys.radius, 8, opts.seed), opts.tol_rel};
}

// Du . f_a for every declared field, one expression per function.
std::vector<expr::Expr> lie_derivatives(const ControlSystem& sys, const std::vector<expr::Expr>& fs) {
    std::vector<expr::Expr> out;
    for (const auto& f : sys.fields)
        for (const auto& u : fs) {
            expr::Expr acc;
            for (std::size_t j = 0; j < sys.dim(); ++j) acc = acc + expr::symbolic_partial(u, j) * f.components[j];
            out.push_back(acc);
        }
    return out;
}

std::string var_list(const ControlSystem& sys, const VarSet& s) {
    std::string out = "{";
    bool first = true;
    for (std::size_t j = 0; j < s.size(); ++j)
        if (s[j]) {
            out += (first ? "" : ",") + sys.variables[j];
            first = false;
        }
    return out + "}";
}

// (+)^r I_l(x_o) = 0 for r < k_i, every group and every l in `coords`.
std::optional<std::string> trajectory_vanishes(const ControlSystem& sys, const std::vector<double>& x,
                                               const std::vector<GroupCheck>& groups, const VarSet& coords,
                                               const Options& opts) {
    for (const auto& g : groups) {
        if (g.order < 2) continue;
        const auto tc = trajectory_sequence(sys, x, g.group, g.order - 1);
        const double tol = tolerance_for(tc.scale, opts);
        for (int r = 1; r < g.order; ++r)
            for (std::size_t l = 0; l < coords.size(); ++l)
                if (coords[l] && std::fabs(tc.order(r)[l]) > tol)
                    return "group " + g.group.key() + ": order " + std::to_string(r) + " trajectory coefficient of " +
                           sys.variables[l] + " is " + fmt(tc.order(r)[l]);
    }
    return std::nullopt;
}

SideCondition strict_extra(const ControlSystem& sys, const std::vector<double>& x,
                           const std::vector<GroupCheck>& groups, const Options& opts) {
    SideCondition c{"strict-extra", false, ""};
    const auto bad = trajectory_vanishes(sys, x, groups, VarSet(sys.dim(), true), opts);
    c.holds = !bad;
    c.how = bad ? *bad : "trajectory coefficients (+)^r I(x_o) vanish for r < k_i on every group";
    return c;
}

SideCondition restricted_vars(const ControlSystem& sys, const std::vector<double>& x,
                              const std::vector<expr::Expr>& fs, const std::vector<GroupCheck>& groups,
                              const Options& opts, std::vector<std::size_t>& chosen) {
    SideCondition c{"restricted-vars", false, ""};
    const std::size_t n = sys.dim();
    const auto probe = make_probe(sys, x, opts);
    auto unite = [](VarSet& a, const VarSet& b) {
        bool grew = false;
        for (std::size_t j = 0; j < a.size(); ++j)
            if (b[j] && !a[j]) a[j] = grew = true;
        return grew;
    };

    VarSet needed(n, false);
    for (const auto& e : lie_derivatives(sys, fs)) unite(needed, probe(e));
    // Components F_l, l in S, must themselves depend only on S.
    auto closure = [&](VarSet s) {
        for (bool grew = true; grew;) {
            grew = false;
            for (std::size_t l = 0; l < n; ++l)
                if (s[l])
                    for (const auto& f : sys.fields) grew = unite(s, probe(f.components[l])) || grew;
        }
        return s;
    };

    VarSet S(n, false);
    if (opts.restricted_vars.empty()) {
        S = closure(needed);
    } else {
        for (auto l : opts.restricted_vars) {
            if (l >= n) raise(ErrorKind::Config, "restricted variable index out of range");
            S[l] = true;
        }
        const VarSet closed = closure(S);
        VarSet with_needed = S;
        unite(with_needed, needed);
        if (closed != S || with_needed != S) {
            c.how = "declared set " + var_list(sys, S) + " is not closed: Du.F and F_l need " +
                    var_list(sys, closure(with_needed));
            return c;
        }
    }
    chosen.clear();
    for (std::size_t l = 0; l < n; ++l)
        if (S[l]) chosen.push_back(l);

    if (const auto bad = trajectory_vanishes(sys, x, groups, S, opts)) {
        c.how = "restricted set " + var_list(sys, S) + ": " + *bad;
        return c;
    }
    c.holds = true;
    c.how = "sampled structural check (jets at x_o and 8 points of B_R): Du.F and F_l for l in " + var_list(sys, S) +
            " depend only on " + var_list(sys, S) + "; trajectory coefficients vanish there for r < k_i";
    return c;
}

SideCondition block_structure(const ControlSystem& sys, const std::vector<double>& x,
                              const std::vector<expr::Expr>& fs, const std::vector<GroupCheck>& groups,
                              const Options& opts) {
    SideCondition c{"block-structure", false, ""};
    const std::size_t n = sys.dim();
    const std::size_t q = fs.size();
    if (q > n) {
        c.how = "more functions than coordinates";
        return c;
    }
    const Eigen::MatrixXd J = jacobian_at(fs, x);
    const auto lead = J.leftCols(static_cast<Eigen::Index>(q));
    if (q > 0 && pspan::rank(lead) < static_cast<int>(q)) {
        c.how = "leading " + std::to_string(q) + " Jacobian columns are singular";
        return c;
    }
    VarSet trailing(n, false);
    for (std::size_t l = q; l < n; ++l) trailing[l] = true;
    const auto probe = make_probe(sys, x, opts);
    for (std::size_t l = q; l < n; ++l)
        for (const auto& f : sys.fields) {
            const VarSet dep = probe(f.components[l]);
            for (std::size_t j = 0; j < q; ++j)
                if (dep[j]) {
                    c.how = "component " + sys.variables[l] + " of field " + f.name + " depends on " + sys.variables[j];
                    return c;
                }
        }
    if (const auto bad = trajectory_vanishes(sys, x, groups, trailing, opts)) {
        c.how = *bad;
        return c;
    }
    c.holds = true;
    c.how = "leading Jacobian block invertible; trailing components " + var_list(sys, trailing) +
            " depend only on themselves (sampled structural check); trajectory coefficients vanish there";
    return c;
}

struct Candidate {
    int order = 0;
    Eigen::VectorXd direction;
};

}  // namespace

std::string GroupSpec::key() const {
    std::string k;
    for (std::size_t i = 0; i < fields.size(); ++i) k += (i ? "," : "") + fields[i];
    return k + "|" + std::to_string(order);
}

const char* to_string(TargetKind k) noexcept {
    switch (k) {
        case TargetKind::Fat: return "fat";
        case TargetKind::Point: return "point";
        case TargetKind::Manifold: return "manifold";
    }
    return "point";
}

const char* to_string(ManifoldVariant v) noexcept {
    switch (v) {
        case ManifoldVariant::StrictExtra: return "strict-extra";
        case ManifoldVariant::RestrictedVars: return "restricted-vars";
        case ManifoldVariant::BlockStructure: return "block-structure";
        case ManifoldVariant::Auto: return "auto";
    }
    return "auto";
}

const char* to_string(Theorem t) noexcept {
    switch (t) {
        case Theorem::Fat: return "fat";
        case Theorem::Point: return "point";
        case Theorem::Manifold: return "manifold";
        case Theorem::ManifoldBoundary: return "manifold-boundary";
        case Theorem::CorollaryRestricted: return "corollary-restricted";
        case Theorem::CorollaryBlock: return "corollary-block";
    }
    return "point";
}

std::vector<VectorFieldDef> resolve_group(const ControlSystem& sys, const GroupSpec& group) {
    const auto palette = expand_palette(sys);
    std::vector<VectorFieldDef> out;
    out.reserve(group.fields.size());
    for (const auto& name : group.fields) {
        auto it = std::find_if(palette.begin(), palette.end(), [&](const auto& f) { return f.name == name; });
        if (it != palette.end())
            out.push_back(*it);
        else if (sys.has_field(name))
            out.push_back(sys.field(name));
        else
            out.push_back(combine_fields(sys, name));
    }
    return out;
}

std::vector<expr::Expr> identity_functions(const ControlSystem& sys) {
    std::vector<expr::Expr> out;
    for (std::size_t i = 0; i < sys.dim(); ++i) out.push_back(expr::Expr::variable(i, sys.variables[i]));
    return out;
}

std::vector<expr::Expr> certified_functions(const ControlSystem& sys, const TargetDef& target) {
    switch (target.kind) {
        case TargetKind::Fat:
            if (target.comparison) return {*target.comparison};
            return target.functions;
        case TargetKind::Point: return identity_functions(sys);
        case TargetKind::Manifold: {
            auto fs = target.functions;
            if (target.boundary) fs.push_back(*target.boundary);
            return fs;
        }
    }
    return {};
}

GroupCheck check_group(const ControlSystem& sys, const std::vector<expr::Expr>& functions, const Eigen::VectorXd& x_o,
                       const GroupSpec& group, const Options& opts) {
    if (functions.empty()) raise(ErrorKind::DegenerateInput, "no target functions");
    const int K = group.order > 0 ? group.order : opts.k_max;
    const auto x = as_vector(x_o);
    const auto hc = group_sequence(sys, functions, x, group, K);

    GroupCheck out;
    out.group = group;
    out.tolerance = tolerance_for(hc.scale, opts);
    int k = 0;
    for (int r = 1; r <= K && k == 0; ++r) {
        const auto& v = hc.order(r);
        const auto it = std::max_element(v.begin(), v.end(), [](double a, double b) { return std::fabs(a) < std::fabs(b); });
        if (std::fabs(*it) > out.tolerance) {
            if (group.order > 0 && r < group.order)
                throw OrderClaimFailed(r, *it, "group " + group.key() + ": order " + std::to_string(r) +
                                                   " coefficient " + fmt(*it) + " does not vanish");
            k = r;
        } else {
            out.max_vanishing = std::max(out.max_vanishing, std::fabs(*it));
        }
    }
    if (k == 0) {
        const auto& v = hc.order(K);
        double worst = 0.0;
        for (double c : v) worst = std::fabs(c) > std::fabs(worst) ? c : worst;
        throw OrderClaimFailed(K, worst, "group " + group.key() + ": no nonvanishing coefficient up to order " +
                                             std::to_string(K));
    }
    if (k == 1 && group.fields.size() > 1)
        raise(ErrorKind::DegenerateInput, "group " + group.key() + ": first-order groups must contain a single field");

    out.order = k;
    out.group.order = k;
    out.raw.assign(hc.orders.begin(), hc.orders.begin() + k);
    out.component_orders.assign(functions.size(), k);
    const auto& top = out.raw.back();
    out.column = Eigen::Map<const Eigen::VectorXd>(top.data(), static_cast<Eigen::Index>(top.size())) / factorial(k);
    return out;
}

StlaCertificate certify_fat(const ControlSystem& sys, const TargetDef& target, const Eigen::VectorXd& x_o,
                            const std::vector<GroupSpec>& groups, const Options& opts) {
    const auto fs = certified_functions(sys, target);
    if (fs.empty()) raise(ErrorKind::Config, "fat target without inequality functions");
    const auto x = as_vector(x_o);

    StlaCertificate cert;
    cert.theorem = Theorem::Fat;
    cert.target = TargetKind::Fat;
    cert.x_o = x_o;
    cert.on_boundary = true;
    cert.bounds = estimate_bounds(sys, x, opts.seed);

    const Eigen::MatrixXd J = jacobian_at(fs, x);
    for (Eigen::Index r = 0; r < J.rows(); ++r)
        if (J.row(r).norm() <= tolerance_for(J.row(r).cwiseAbs().maxCoeff(), opts))
            raise(ErrorKind::GradientVanishes, "gradient of target function " + std::to_string(r + 1) + " vanishes at x_o");

    if (target.comparison) {
        SideCondition c{"comparison-local-max", true, "caller assertion: u - Phi has a local maximum at x_o"};
        if (opts.spot_check_comparison) {
            std::vector<expr::Program> us;
            for (const auto& u : target.functions) us.emplace_back(u);
            const expr::Program phi(*target.comparison);
            auto gap = [&](const std::vector<double>& p) {
                double worst = -kInf;
                for (const auto& u : us) worst = std::max(worst, u(p) - phi(p));
                return worst;
            };
            const double g0 = gap(x);
            for (const auto& p : ball_points(x, sys.radius, 100, opts.seed)) {
                const double g = gap(p);
                if (g > g0 + tolerance_for(std::fabs(g0), opts)) {
                    c.holds = false;
                    c.how = "sampled point violates the local maximum of u - Phi by " + fmt(g - g0);
                    break;
                }
            }
            if (c.holds) c.how += " (spot-checked on 100 points of B_R(x_o))";
        }
        cert.side_conditions.push_back(c);
        if (!c.holds) fail(cert, ErrorKind::SideConditionFailed, c.how);
    }

    for (const auto& g : groups) {
        try {
            const int K = g.order > 0 ? g.order : opts.k_max;
            const auto hc = group_sequence(sys, fs, x, g, K);
            GroupCheck gc;
            gc.group = g;
            gc.tolerance = tolerance_for(hc.scale, opts);
            gc.component_orders.assign(fs.size(), 0);
            std::string why;
            for (std::size_t c = 0; c < fs.size() && why.empty(); ++c) {
                for (int r = 1; r <= K; ++r) {
                    const double v = hc.order(r)[c];
                    if (std::fabs(v) <= gc.tolerance) {
                        gc.max_vanishing = std::max(gc.max_vanishing, std::fabs(v));
                        continue;
                    }
                    if (v > 0.0)
                        why = "function " + std::to_string(c + 1) + ": order " + std::to_string(r) + " coefficient " +
                              fmt(v) + " is positive";
                    gc.component_orders[c] = r;
                    break;
                }
                if (why.empty() && gc.component_orders[c] == 0)
                    why = "function " + std::to_string(c + 1) + ": no nonvanishing coefficient up to order " +
                          std::to_string(K);
            }
            if (why.empty()) {
                gc.order = *std::max_element(gc.component_orders.begin(), gc.component_orders.end());
                if (g.order > 0 && gc.order != g.order)
                    why = "claimed order " + std::to_string(g.order) + " but the decrease rate has order " +
                          std::to_string(gc.order);
            }
            if (!why.empty()) {
                cert.rejected.push_back({g, why});
                continue;
            }
            gc.group.order = gc.order;
            gc.raw.assign(hc.orders.begin(), hc.orders.begin() + gc.order);
            gc.column.resize(static_cast<Eigen::Index>(fs.size()));
            for (std::size_t c = 0; c < fs.size(); ++c) {
                const int k = gc.component_orders[c];
                gc.column(static_cast<Eigen::Index>(c)) = hc.order(k)[c] / factorial(k);
            }
            cert.groups.push_back(std::move(gc));
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Domain || e.kind() == ErrorKind::Config) throw;
            cert.rejected.push_back({g, e.what()});
        }
    }
    std::stable_sort(cert.groups.begin(), cert.groups.end(),
                     [](const GroupCheck& a, const GroupCheck& b) { return a.order < b.order; });
    set_margin(cert);
    if (cert.groups.empty()) {
        fail(cert, ErrorKind::NoGroupQualifies, "no group has a decrease rate at x_o");
        return cert;
    }
    const auto& best = cert.groups.front();
    cert.k_bar = best.order;
    cert.exponent = 1.0 / best.order;
    cert.A = best.column;
    if (!cert.failure) {
        cert.certified = true;
        cert.detail = "decrease rate of order " + std::to_string(best.order) + " with group " + best.group.key();
    }
    return cert;
}

namespace {

void collect_groups(const ControlSystem& sys, const std::vector<expr::Expr>& fs, const Eigen::VectorXd& x_o,
                    const std::vector<GroupSpec>& groups, const Options& opts, StlaCertificate& cert) {
    for (const auto& g : groups) {
        try {
            cert.groups.push_back(check_group(sys, fs, x_o, g, opts));
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Domain || e.kind() == ErrorKind::Config) throw;
            cert.rejected.push_back({g, e.what()});
        }
    }
    set_margin(cert);
    for (const auto& g : cert.groups) cert.k_bar = std::max(cert.k_bar, g.order);
    cert.exponent = cert.k_bar > 0 ? 1.0 / cert.k_bar : 0.0;
}

}  // namespace

StlaCertificate certify_point(const ControlSystem& sys, const Eigen::VectorXd& x_o,
                              const std::vector<GroupSpec>& groups, const Options& opts) {
    StlaCertificate cert;
    cert.theorem = Theorem::Point;
    cert.target = TargetKind::Point;
    cert.x_o = x_o;
    cert.bounds = estimate_bounds(sys, as_vector(x_o), opts.seed);
    collect_groups(sys, identity_functions(sys), x_o, groups, opts, cert);

    const auto n = static_cast<Eigen::Index>(sys.dim());
    cert.A.resize(n, static_cast<Eigen::Index>(cert.groups.size()));
    for (std::size_t i = 0; i < cert.groups.size(); ++i) cert.A.col(static_cast<Eigen::Index>(i)) = cert.groups[i].column;
    if (cert.groups.empty()) {
        fail(cert, ErrorKind::NotPositiveBasis, "no group verified its order claim");
        return cert;
    }
    cert.span = pspan::is_positive_basis(cert.A);
    if (!cert.span->verdict) {
        fail(cert, ErrorKind::NotPositiveBasis, cert.span->reason);
        return cert;
    }
    finish_span(cert);
    cert.certified = true;
    cert.detail = "columns form a positive basis; order " + std::to_string(cert.k_bar);
    return cert;
}

StlaCertificate certify_manifold(const ControlSystem& sys, const TargetDef& target, const Eigen::VectorXd& x_o,
                                 const std::vector<GroupSpec>& groups, ManifoldVariant variant, const Options& opts) {
    if (target.functions.empty()) raise(ErrorKind::Config, "manifold target without equations");
    const auto x = as_vector(x_o);
    const auto fs = certified_functions(sys, target);
    const std::size_t h = target.functions.size();

    const Eigen::MatrixXd J = jacobian_at(fs, x);
    if (pspan::rank(J) < static_cast<int>(fs.size()))
        raise(ErrorKind::RankDeficientJacobian,
              "target gradients are linearly dependent at x_o (rank " + std::to_string(pspan::rank(J)) + " < " +
                  std::to_string(fs.size()) + ")");

    StlaCertificate cert;
    cert.target = TargetKind::Manifold;
    cert.x_o = x_o;
    cert.on_boundary = target.boundary.has_value();
    cert.bounds = estimate_bounds(sys, x, opts.seed);
    collect_groups(sys, fs, x_o, groups, opts, cert);

    const auto m = static_cast<Eigen::Index>(cert.groups.size());
    cert.A.resize(static_cast<Eigen::Index>(h), m);
    if (cert.on_boundary) cert.s = Eigen::VectorXd(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        auto& g = cert.groups[static_cast<std::size_t>(i)];
        cert.A.col(i) = g.column.head(static_cast<Eigen::Index>(h));
        if (cert.on_boundary) {
            g.s = g.column(static_cast<Eigen::Index>(h));
            (*cert.s)(i) = *g.s;
        }
    }

    if (cert.groups.empty()) {
        fail(cert, ErrorKind::NotPositiveBasis, "no group verified its order claim");
    } else {
        bool degenerate = false;
        for (Eigen::Index i = 0; i < m; ++i) degenerate = degenerate || cert.A.col(i).norm() == 0.0;
        if (degenerate) {
            fail(cert, ErrorKind::NotPositiveBasis, "a group changes only the boundary function");
        } else {
            cert.span = cert.on_boundary ? pspan::check_boundary(cert.A, *cert.s) : pspan::is_positive_basis(cert.A);
            if (!cert.span->verdict) fail(cert, ErrorKind::NotPositiveBasis, cert.span->reason);
        }
    }

    std::vector<ManifoldVariant> order;
    if (variant == ManifoldVariant::Auto)
        order = {ManifoldVariant::StrictExtra, ManifoldVariant::RestrictedVars, ManifoldVariant::BlockStructure};
    else
        order = {variant};

    std::optional<ManifoldVariant> passed;
    for (auto v : order) {
        SideCondition c;
        std::vector<std::size_t> chosen;
        switch (v) {
            case ManifoldVariant::StrictExtra: c = strict_extra(sys, x, cert.groups, opts); break;
            case ManifoldVariant::RestrictedVars: c = restricted_vars(sys, x, fs, cert.groups, opts, chosen); break;
            case ManifoldVariant::BlockStructure: c = block_structure(sys, x, fs, cert.groups, opts); break;
            case ManifoldVariant::Auto: break;
        }
        cert.side_conditions.push_back(c);
        if (c.holds) {
            passed = v;
            cert.restricted_vars = chosen;
            break;
        }
    }
    if (!passed || *passed == ManifoldVariant::StrictExtra)
        cert.theorem = cert.on_boundary ? Theorem::ManifoldBoundary : Theorem::Manifold;
    else
        cert.theorem = *passed == ManifoldVariant::RestrictedVars ? Theorem::CorollaryRestricted : Theorem::CorollaryBlock;

    if (!passed) {
        std::string why = "no variant side condition holds";
        for (const auto& c : cert.side_conditions) why += "; " + c.name + ": " + c.how;
        fail(cert, ErrorKind::SideConditionFailed, why);
    }
    if (cert.failure) return cert;
    if (!cert.on_boundary) finish_span(cert);
    else if (cert.span) cert.eccentricity = cert.span->lambda.size() ? pspan::eccentricity(cert.span->lambda) : 0.0;
    cert.certified = true;
    cert.detail = std::string("conditions hold via ") + to_string(*passed) + "; order " + std::to_string(cert.k_bar);
    return cert;
}

StlaCertificate certify(const ControlSystem& sys, const TargetDef& target, const Eigen::VectorXd& x_o,
                        const std::vector<GroupSpec>& groups, ManifoldVariant variant, const Options& opts) {
    if (x_o.size() != static_cast<Eigen::Index>(sys.dim()))
        raise(ErrorKind::DimensionMismatch, "base point dimension differs from the state dimension");
    switch (target.kind) {
        case TargetKind::Fat: return certify_fat(sys, target, x_o, groups, opts);
        case TargetKind::Point: return certify_point(sys, x_o, groups, opts);
        case TargetKind::Manifold: return certify_manifold(sys, target, x_o, groups, variant, opts);
    }
    raise(ErrorKind::Config, "unknown target kind");
}

SearchResult search_groups(const ControlSystem& sys, const TargetDef& target, const Eigen::VectorXd& x_o,
                           const SearchLimits& limits, const Options& opts) {
    SearchResult result;
    const auto palette = expand_palette(sys);
    if (palette.empty() || limits.length_max < 1 || limits.k_max < 1) return result;
    const auto x = as_vector(x_o);
    const auto fs = certified_functions(sys, target);
    const int K = limits.k_max;
    const auto fields = lift_fields(palette, x, K - 1);
    const auto us = lift_all(fs, x, K);
    const bool fat = target.kind == TargetKind::Fat;

    // Tuples are numbered length by length, each in mixed radix over the palette.
    const std::size_t p = palette.size();
    std::vector<std::size_t> offsets{0};
    std::size_t total = 0;
    for (int len = 1; len <= limits.length_max; ++len) {
        std::size_t count = 1;
        for (int i = 0; i < len && count <= limits.budget; ++i) count *= p;
        total += count;
        offsets.push_back(total);
        if (total >= limits.budget) {
            result.budget_exhausted = total > limits.budget || len < limits.length_max;
            total = limits.budget;
            break;
        }
    }

    auto decode = [&](std::size_t idx) {
        std::size_t len = 1;
        while (idx >= offsets[len]) ++len;
        std::size_t rest = idx - offsets[len - 1];
        std::vector<std::size_t> t(len);
        for (std::size_t i = len; i-- > 0;) {
            t[i] = rest % p;
            rest /= p;
        }
        return t;
    };

    std::vector<std::optional<Candidate>> found(total);
    std::vector<std::exception_ptr> errors(total);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        std::vector<jet::VectorGerm> tuple;
        for (std::size_t idx; (idx = next.fetch_add(1)) < total;) {
            try {
                const auto t = decode(idx);
                tuple.clear();
                for (auto i : t) tuple.push_back(fields[i]);
                const auto hc = ham::boxplus_sequence(tuple, us, K);
                const double tol = tolerance_for(hc.scale, opts);
                Candidate c;
                c.direction = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fs.size()));
                if (fat) {
                    bool ok = true;
                    for (std::size_t comp = 0; comp < fs.size() && ok; ++comp) {
                        int k = 0;
                        for (int r = 1; r <= K && k == 0; ++r)
                            if (std::fabs(hc.order(r)[comp]) > tol) k = r;
                        ok = k > 0 && hc.order(k)[comp] < 0.0;
                        if (ok) {
                            c.direction(static_cast<Eigen::Index>(comp)) = hc.order(k)[comp] / factorial(k);
                            c.order = std::max(c.order, k);
                        }
                    }
                    if (!ok) continue;
                } else {
                    for (int r = 1; r <= K && c.order == 0; ++r)
                        for (double v : hc.order(r))
                            if (std::fabs(v) > tol) c.order = r;
                    if (c.order == 0) continue;
                    const auto& top = hc.order(c.order);
                    for (std::size_t comp = 0; comp < fs.size(); ++comp)
                        c.direction(static_cast<Eigen::Index>(comp)) = top[comp] / factorial(c.order);
                }
                if (c.order == 1 && t.size() > 1) continue;
                found[idx] = std::move(c);
            } catch (...) {
                errors[idx] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 8);
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < std::min(threads, total); ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    result.evaluated = total;

    struct Hit {
        GroupSpec spec;
        std::size_t length;
        Eigen::VectorXd direction;
    };
    std::vector<Hit> hits;
    for (std::size_t idx = 0; idx < total; ++idx) {
        if (!found[idx]) continue;
        const auto t = decode(idx);
        GroupSpec g;
        for (auto i : t) g.fields.push_back(palette[i].name);
        g.order = found[idx]->order;
        hits.push_back({std::move(g), t.size(), found[idx]->direction});
    }
    std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
        if (a.spec.order != b.spec.order) return a.spec.order < b.spec.order;
        if (a.length != b.length) return a.length < b.length;
        return a.spec.key() < b.spec.key();
    });
    std::vector<const Hit*> kept;
    for (const auto& hit : hits) {
        const bool dup = std::any_of(kept.begin(), kept.end(), [&](const Hit* k) {
            if (k->spec.order != hit.spec.order) return false;
            const double denom = k->direction.norm() * hit.direction.norm();
            return denom > 0.0 && k->direction.dot(hit.direction) / denom > 0.999;
        });
        if (dup) continue;
        kept.push_back(&hit);
        if (limits.max_groups > 0 && kept.size() >= limits.max_groups) break;
    }
    for (const auto* k : kept) result.groups.push_back(k->spec);
    return result;
}

}  // namespace stla::engine
