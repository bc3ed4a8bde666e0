#include "stla/identities.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "stla/error.hpp"

namespace stla::ham {

namespace {

// v.grad u at the base point; u is cut to the degree v can support.
double grad_dot(const VectorGerm& v, const ScalarGerm& u) {
    return apply(v, u.poly.truncated(std::min(u.degree_cap(), v.degree_cap() + 1))).value();
}

std::vector<double> concat(std::initializer_list<std::vector<double>> parts) {
    std::vector<double> out;
    for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
}

std::vector<double> scaled(std::vector<double> v, double s) {
    for (auto& x : v) x *= s;
    return v;
}

std::vector<double> plus(std::vector<double> a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}

VectorGerm sum(std::span<const VectorGerm> fields) {
    VectorGerm s = fields.front();
    for (std::size_t i = 1; i < fields.size(); ++i) s = s + fields[i];
    return s;
}

std::vector<double> trajectory_order(std::span<const VectorGerm> fields, int k) {
    return trajectory_coeffs(fields, k).order(k);
}

}  // namespace

double Comparison::relative_error() const {
    double diff = 0.0, scale = 1.0;
    for (std::size_t i = 0; i < lhs.size(); ++i) {
        diff = std::max(diff, std::abs(lhs[i] - rhs[i]));
        scale = std::max({scale, std::abs(lhs[i]), std::abs(rhs[i])});
    }
    return diff / scale;
}

Comparison method_agreement(std::span<const VectorGerm> fields, const ScalarGerm& u, int k) {
    return {{boxplus_power(fields, u, k, Method::Multinomial)}, {boxplus_power(fields, u, k, Method::Recursive)}};
}

Comparison second_order_pair(const VectorGerm& f, const VectorGerm& g, const ScalarGerm& u) {
    const VectorGerm pair[] = {f, g};
    return {{boxplus_power(pair, u, 2)}, {ham_power(f + g, u, 2) + grad_dot(lie_bracket(f, g), u)}};
}

Comparison second_order_multi(std::span<const VectorGerm> fields, const ScalarGerm& u) {
    double rhs = ham_power(sum(fields), u, 2);
    for (std::size_t i = 0; i < fields.size(); ++i)
        for (std::size_t j = i + 1; j < fields.size(); ++j) rhs += grad_dot(lie_bracket(fields[i], fields[j]), u);
    return {{boxplus_power(fields, u, 2)}, {rhs}};
}

Comparison second_order_multi_identity(std::span<const VectorGerm> fields) {
    const VectorGerm s = sum(fields);
    std::vector<double> rhs = directional(s, s).value();
    for (std::size_t i = 0; i < fields.size(); ++i)
        for (std::size_t j = i + 1; j < fields.size(); ++j) rhs = plus(rhs, lie_bracket(fields[i], fields[j]).value());
    return {trajectory_order(fields, 2), rhs};
}

Comparison homogeneity(const VectorGerm& f, const VectorGerm& g, const ScalarGerm& u, double lambda, int k) {
    const VectorGerm scaled_pair[] = {lambda * f, lambda * g};
    const VectorGerm pair[] = {f, g};
    return {{boxplus_power(scaled_pair, u, k)}, {std::pow(lambda, k) * boxplus_power(pair, u, k)}};
}

Comparison sign_rule(const VectorGerm& f, const VectorGerm& g, const ScalarGerm& u, int k) {
    const VectorGerm negated[] = {-f, -g};
    const VectorGerm pair[] = {f, g};
    return {{boxplus_power(negated, u, k)}, {(k % 2 == 0 ? 1.0 : -1.0) * boxplus_power(pair, u, k)}};
}

Comparison doubling_rule(const VectorGerm& f, const ScalarGerm& u, int k) {
    const VectorGerm twice[] = {f, f};
    return {{boxplus_power(twice, u, k)}, {std::pow(2.0, k) * ham_power(f, u, k)}};
}

Comparison bracket_quadruple(const VectorGerm& f, const VectorGerm& g, const ScalarGerm& u) {
    const VectorGerm quad[] = {f, g, -f, -g};
    const auto seq = boxplus_sequence(quad, u, 2);
    return {{seq.order(1)[0], seq.order(2)[0]}, {0.0, 2.0 * grad_dot(lie_bracket(f, g), u)}};
}

Comparison bracket_ten(const VectorGerm& f, const VectorGerm& g, const VectorGerm& h) {
    const VectorGerm ten[] = {f, g, -f, -g, h, g, f, -g, -f, -h};
    const auto seq = trajectory_coeffs(ten, 3);
    const std::vector<double> zero(f.dim(), 0.0);
    return {concat({seq.order(1), seq.order(2), seq.order(3)}),
            concat({zero, zero, scaled(lie_bracket(lie_bracket(f, g), h).value(), 6.0)})};
}

Comparison balanced_pair(const VectorGerm& f, const VectorGerm& g, const ScalarGerm& u, int k) {
    const VectorGerm pair[] = {f, g};
    return {{boxplus_power(pair, u, k + 1)}, {(k % 2 == 0 ? 1.0 : -1.0) * grad_dot(ad_power(g, f, k), u)}};
}

Comparison linear_recursion(const VectorGerm& f, const VectorGerm& g, int k) {
    if (k < 2) raise(ErrorKind::DegenerateInput, "linear_recursion: the recursion starts at order 2");
    const VectorGerm s = f + g;
    VectorGerm F = directional(s, s) + lie_bracket(f, g);
    for (int j = 2; j < k; ++j) F = directional(F, s) + lie_bracket(F, g);
    const VectorGerm pair[] = {f, g};
    return {trajectory_order(pair, k), F.value()};
}

Comparison bch_third(const VectorGerm& f, const VectorGerm& g) {
    const VectorGerm pair[] = {f, g};
    const VectorGerm s = f + g;
    const VectorGerm single[] = {s};
    const VectorGerm b = lie_bracket(f, g);
    auto rhs = scaled(trajectory_order(single, 3), 1.0 / 6.0);
    rhs = plus(rhs, scaled(plus(directional(b, s).value(), directional(s, b).value()), 0.25));
    rhs = plus(rhs, scaled(plus(ad_power(f, g, 2).value(), ad_power(g, f, 2).value()), 1.0 / 12.0));
    return {scaled(trajectory_order(pair, 3), 1.0 / 6.0), rhs};
}

Comparison affine_quadruple(const VectorGerm& fo, const VectorGerm& f1, double eps) {
    const VectorGerm f = fo + eps * f1;
    const VectorGerm g = fo - eps * f1;
    const VectorGerm quad[] = {f, g, g, f};
    const auto seq = trajectory_coeffs(quad, 3);
    const std::vector<double> zero(fo.dim(), 0.0);
    const auto third =
        plus(scaled(ad_power(fo, f1, 2).value(), 12.0 * eps), scaled(ad_power(f1, fo, 2).value(), 4.0 * eps * eps));
    return {concat({seq.order(1), seq.order(2), seq.order(3)}), concat({zero, zero, third})};
}

std::vector<IdentityCheck> run_identity_suite(const ControlSystem& sys, const std::vector<expr::Expr>& functions,
                                              const Eigen::VectorXd& x0, const IdentitySuiteOptions& opts) {
    const std::vector<double> base(x0.data(), x0.data() + x0.size());
    const int degree = std::max(opts.k_max, 4) + 2;
    const auto palette = expand_palette(sys);
    std::vector<VectorGerm> fields;
    std::vector<std::string> names;
    for (const auto& p : palette) {
        fields.push_back(lift_field(p, base, degree));
        names.push_back(p.name);
    }
    std::vector<ScalarGerm> us;
    std::vector<std::string> u_names;
    if (functions.empty()) {
        for (std::size_t i = 0; i < sys.dim(); ++i) {
            us.push_back(jet::lift(expr::Expr::variable(i, sys.variables[i]), base, degree));
            u_names.push_back(sys.variables[i]);
        }
    } else {
        for (std::size_t i = 0; i < functions.size(); ++i) {
            us.push_back(jet::lift(functions[i], base, degree));
            u_names.push_back("u" + std::to_string(i + 1));
        }
    }

    std::vector<IdentityCheck> checks;
    auto record = [&](const std::string& name, const std::string& instance, const Comparison& c) {
        auto it = std::find_if(checks.begin(), checks.end(), [&](const IdentityCheck& ch) { return ch.name == name; });
        if (it == checks.end()) {
            IdentityCheck fresh;
            fresh.name = name;
            checks.push_back(std::move(fresh));
            it = checks.end() - 1;
        }
        const double err = c.relative_error();
        ++it->instances;
        if (it->instances == 1 || err > it->max_error) {
            it->max_error = err;
            it->worst = instance;
        }
        if (!(err <= opts.tol_rel)) it->passed = false;
    };

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < fields.size() && pairs.size() < opts.max_pairs; ++i)
        for (std::size_t j = 0; j < fields.size() && pairs.size() < opts.max_pairs; ++j)
            if (i != j) pairs.emplace_back(i, j);

    for (std::size_t i = 0; i < fields.size(); ++i)
        for (std::size_t a = 0; a < us.size(); ++a)
            for (int k = 1; k <= opts.k_max; ++k)
                record("doubling rule", names[i] + " | " + u_names[a] + " | k=" + std::to_string(k),
                       doubling_rule(fields[i], us[a], k));

    for (auto [i, j] : pairs) {
        const auto& f = fields[i];
        const auto& g = fields[j];
        const std::string pair_name = names[i] + "," + names[j];
        const VectorGerm pair[] = {f, g};
        for (std::size_t a = 0; a < us.size(); ++a) {
            const std::string inst = pair_name + " | " + u_names[a];
            for (int k = 1; k <= opts.k_max; ++k) {
                const std::string ik = inst + " | k=" + std::to_string(k);
                record("multinomial = recursive", ik, method_agreement(pair, us[a], k));
                record("homogeneity", ik, homogeneity(f, g, us[a], 2.0, k));
                record("sign rule", ik, sign_rule(f, g, us[a], k));
            }
            record("second order pair", inst, second_order_pair(f, g, us[a]));
            record("bracket quadruple", inst, bracket_quadruple(f, g, us[a]));
        }
        // Beyond order 2 the recursion needs g affine.
        bool g_affine = true;
        for (const auto& c : g.components)
            for (const auto& [alpha, coef] : c.terms())
                if (alpha.total() >= 2 && std::abs(coef) > vanishing_tolerance(field_scale(pair))) g_affine = false;
        for (int k = 2; k <= (g_affine ? opts.k_max : 2); ++k)
            record("linear recursion", pair_name + " | k=" + std::to_string(k), linear_recursion(f, g, k));
        record("bch third term", pair_name, bch_third(f, g));

        const VectorGerm s = f + g;
        const auto s_value = s.value();
        const double scale = field_scale(pair);
        const double tol = vanishing_tolerance(scale);
        if (std::all_of(s_value.begin(), s_value.end(), [&](double v) { return std::abs(v) <= tol; })) {
            bool flat = true;
            for (const auto& c : s.components)
                for (const auto& [alpha, coef] : c.terms())
                    if (alpha.total() == 1 && std::abs(coef) > tol) flat = false;
            const int k_top = flat ? 3 : 1;
            for (std::size_t a = 0; a < us.size(); ++a)
                for (int k = 1; k <= k_top; ++k)
                    record("balanced pair", pair_name + " | " + u_names[a] + " | k=" + std::to_string(k),
                           balanced_pair(f, g, us[a], k));
        }
    }

    if (fields.size() >= 2) {
        const std::size_t m = std::min<std::size_t>(fields.size(), 4);
        const std::span<const VectorGerm> head(fields.data(), m);
        std::string head_name;
        for (std::size_t i = 0; i < m; ++i) head_name += (i ? "," : "") + names[i];
        for (std::size_t a = 0; a < us.size(); ++a) {
            record("second order multi", head_name + " | " + u_names[a], second_order_multi(head, us[a]));
            for (int k = 1; k <= opts.k_max; ++k)
                record("multinomial = recursive", head_name + " | " + u_names[a] + " | k=" + std::to_string(k),
                       method_agreement(head, us[a], k));
        }
        record("second order multi", head_name + " | I", second_order_multi_identity(head));
    }

    std::size_t triples = 0;
    for (auto [i, j] : pairs) {
        for (std::size_t l = 0; l < fields.size() && triples < 8; ++l) {
            if (l == i || l == j) continue;
            record("bracket ten-tuple", names[i] + "," + names[j] + "," + names[l],
                   bracket_ten(fields[i], fields[j], fields[l]));
            ++triples;
        }
    }

    if (sys.structure == Structure::Affine) {
        const VectorGerm fo = lift_field(sys.field(sys.drift), base, degree);
        const auto fo_value = fo.value();
        const double tol = vanishing_tolerance(field_scale(std::span<const VectorGerm>(&fo, 1)));
        if (std::all_of(fo_value.begin(), fo_value.end(), [&](double v) { return std::abs(v) <= tol; })) {
            for (const auto& c : sys.controls) {
                const VectorGerm f1 = lift_field(sys.field(c), base, degree);
                for (double eps : {1.0, 0.5})
                    record("affine quadruple", sys.drift + "," + c + " | eps=" + std::to_string(eps),
                           affine_quadruple(fo, f1, eps));
            }
        }
    }
    return checks;
}

}  // namespace stla::ham
