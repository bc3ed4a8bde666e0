#include "stla/system.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "stla/error.hpp"

namespace stla {

const char* to_string(Structure s) noexcept {
    switch (s) {
        case Structure::General: return "general";
        case Structure::Symmetric: return "symmetric";
        case Structure::Convex: return "convex";
        case Structure::Affine: return "affine";
    }
    return "general";
}

void ControlSystem::validate() const {
    if (variables.empty()) raise(ErrorKind::Config, "system declares no state variables");
    if (variables.size() > jet::kMaxVars)
        raise(ErrorKind::Config, "at most " + std::to_string(jet::kMaxVars) + " state variables are supported");
    for (std::size_t i = 0; i < fields.size(); ++i) {
        const auto& f = fields[i];
        if (f.components.size() != dim())
            raise(ErrorKind::DimensionMismatch, "field '" + f.name + "' has " + std::to_string(f.components.size()) +
                                                    " components but the state has dimension " + std::to_string(dim()));
        for (std::size_t j = 0; j < i; ++j)
            if (fields[j].name == f.name) raise(ErrorKind::Config, "field '" + f.name + "' is declared twice");
    }
    if (structure == Structure::Affine) {
        if (!has_field(drift)) raise(ErrorKind::Config, "affine drift '" + drift + "' is not a declared field");
        for (const auto& c : controls)
            if (!has_field(c)) raise(ErrorKind::Config, "affine control field '" + c + "' is not declared");
    }
    if (!(radius > 0.0)) raise(ErrorKind::Config, "locality radius must be positive");
}

bool ControlSystem::has_field(std::string_view name) const noexcept {
    return std::any_of(fields.begin(), fields.end(), [&](const auto& f) { return f.name == name; });
}

const VectorFieldDef& ControlSystem::field(std::string_view name) const {
    for (const auto& f : fields)
        if (f.name == name) return f;
    raise(ErrorKind::Config, "unknown field '" + std::string(name) + "'");
}

namespace {

std::string strip_spaces(std::string_view text) {
    std::string out;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
    return out;
}

VectorFieldDef linear_combination(const ControlSystem& sys, const std::vector<double>& coef, std::string name) {
    VectorFieldDef out{std::move(name), std::vector<expr::Expr>(sys.dim())};
    for (std::size_t j = 0; j < coef.size(); ++j) {
        const double c = coef[j];
        if (c == 0.0) continue;
        for (std::size_t i = 0; i < sys.dim(); ++i) {
            const expr::Expr& e = sys.fields[j].components[i];
            const expr::Expr term = c == 1.0 ? e : c == -1.0 ? -e : expr::Expr::constant(c) * e;
            out.components[i] = out.components[i] + term;
        }
    }
    return out;
}

std::string signed_name(const std::string& base, double sign, const std::string& field) {
    return base + (sign > 0 ? "+" : "-") + field;
}

}  // namespace

VectorFieldDef combine_fields(const ControlSystem& sys, std::string_view text) {
    std::vector<std::string> names;
    for (const auto& f : sys.fields) names.push_back(f.name);

    expr::Expr e;
    try {
        e = expr::parse(text, names);
    } catch (const Error& err) {
        raise(ErrorKind::Config, "field combination '" + std::string(text) + "': " + err.what());
    }
    const std::vector<double> zero(names.size(), 0.0);
    if (expr::eval_point(e, zero) != 0.0)
        raise(ErrorKind::Config, "field combination '" + std::string(text) + "' has a constant term");
    std::vector<double> coef(names.size(), 0.0);
    for (std::size_t j = 0; j < names.size(); ++j) {
        const expr::Expr d = expr::symbolic_partial(e, j);
        if (d.kind() != expr::NodeKind::Constant)
            raise(ErrorKind::Config, "field combination '" + std::string(text) + "' is not linear in the fields");
        coef[j] = d.constant_value();
    }
    return linear_combination(sys, coef, strip_spaces(text));
}

std::vector<VectorFieldDef> expand_palette(const ControlSystem& sys) {
    std::vector<VectorFieldDef> out;
    auto index_of = [&](const std::string& name) {
        for (std::size_t j = 0; j < sys.fields.size(); ++j)
            if (sys.fields[j].name == name) return j;
        raise(ErrorKind::Config, "unknown field '" + name + "'");
    };

    switch (sys.structure) {
        case Structure::Affine: {
            const std::size_t d = index_of(sys.drift);
            std::vector<double> coef(sys.fields.size(), 0.0);
            coef[d] = 1.0;
            out.push_back(linear_combination(sys, coef, sys.drift));
            for (const auto& c : sys.controls)
                for (double sign : {1.0, -1.0}) {
                    auto k = coef;
                    k[index_of(c)] += sign;
                    out.push_back(linear_combination(sys, k, signed_name(sys.drift, sign, c)));
                }
            if (sys.controls.size() >= 2) {
                const std::size_t p = sys.controls.size();
                for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << p); ++bits) {
                    auto k = coef;
                    std::string name = sys.drift;
                    for (std::size_t i = 0; i < p; ++i) {
                        const double sign = (bits >> i) & 1u ? -1.0 : 1.0;
                        k[index_of(sys.controls[i])] += sign;
                        name = signed_name(name, sign, sys.controls[i]);
                    }
                    out.push_back(linear_combination(sys, k, name));
                }
            }
            break;
        }
        case Structure::Symmetric:
            for (const auto& f : sys.fields) {
                out.push_back(f);
                VectorFieldDef neg{"-" + f.name, {}};
                for (const auto& c : f.components) neg.components.push_back(-c);
                out.push_back(std::move(neg));
            }
            break;
        case Structure::General:
        case Structure::Convex: out = sys.fields; break;
    }
    return out;
}

CompiledField::CompiledField(const VectorFieldDef& def) : name_(def.name) {
    const std::size_t n = def.components.size();
    for (const auto& c : def.components) comps_.emplace_back(c);
    jac_.reserve(n * n);
    for (const auto& c : def.components)
        for (std::size_t j = 0; j < n; ++j) jac_.emplace_back(expr::symbolic_partial(c, j));
}

void CompiledField::eval(std::span<const double> x, std::span<double> out) const {
    for (std::size_t i = 0; i < comps_.size(); ++i) out[i] = comps_[i](x);
}

std::vector<double> CompiledField::operator()(std::span<const double> x) const {
    std::vector<double> out(comps_.size());
    eval(x, out);
    return out;
}

void CompiledField::jacobian(std::span<const double> x, std::span<double> out) const {
    for (std::size_t k = 0; k < jac_.size(); ++k) out[k] = jac_[k](x);
}

jet::VectorGerm lift_field(const VectorFieldDef& f, std::span<const double> x0, int degree) {
    return jet::lift(std::span<const expr::Expr>(f.components), x0, degree);
}

std::vector<double> halton(std::uint64_t index, std::size_t dim, std::uint64_t seed) {
    static constexpr std::array<std::uint64_t, 16> kPrimes{2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
    if (dim > kPrimes.size()) raise(ErrorKind::DimensionMismatch, "Halton sequence supports at most 16 dimensions");
    std::vector<double> p(dim);
    const std::uint64_t k0 = index + 1 + seed * 7919;
    for (std::size_t d = 0; d < dim; ++d) {
        const std::uint64_t base = kPrimes[d];
        double f = 1.0;
        double r = 0.0;
        for (std::uint64_t k = k0; k > 0; k /= base) {
            f /= static_cast<double>(base);
            r += f * static_cast<double>(k % base);
        }
        p[d] = r;
    }
    return p;
}

std::vector<std::vector<double>> ball_points(std::span<const double> center, double R, std::size_t count,
                                             std::uint64_t seed) {
    const std::size_t n = center.size();
    std::vector<std::vector<double>> pts;
    pts.reserve(count);
    for (std::uint64_t k = 0; pts.size() < count; ++k) {
        if (k > 100000 * (count + 1)) raise(ErrorKind::InsufficientSamples, "could not sample the ball");
        auto h = halton(k, n, seed);
        double norm2 = 0.0;
        for (auto& v : h) {
            v = 2.0 * v - 1.0;
            norm2 += v * v;
        }
        if (norm2 > 1.0) continue;
        for (std::size_t i = 0; i < n; ++i) h[i] = center[i] + R * h[i];
        pts.push_back(std::move(h));
    }
    return pts;
}

SystemBounds estimate_bounds(const ControlSystem& sys, std::span<const double> x_o, std::uint64_t seed) {
    const std::size_t n = sys.dim();
    if (x_o.size() != n) raise(ErrorKind::DimensionMismatch, "base point has the wrong dimension");
    auto pts = ball_points(x_o, sys.radius, 512, seed);
    pts.emplace_back(x_o.begin(), x_o.end());

    double sup_f = 0.0;
    double sup_df = 0.0;
    std::vector<double> val(n);
    Eigen::MatrixXd jac(n, n);
    std::vector<double> jbuf(n * n);
    for (const auto& def : expand_palette(sys)) {
        const CompiledField f(def);
        for (const auto& p : pts) {
            f.eval(p, val);
            double s = 0.0;
            for (double v : val) s += v * v;
            sup_f = std::max(sup_f, std::sqrt(s));
            f.jacobian(p, jbuf);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = jbuf[i * n + j];
            sup_df = std::max(sup_df, Eigen::JacobiSVD<Eigen::MatrixXd>(jac).singularValues()(0));
        }
    }
    SystemBounds b;
    b.R = sys.radius;
    b.M = 1.25 * sup_f;
    b.L = 1.25 * sup_df;
    b.sigma = b.M > 0.0 ? b.R / (2.0 * b.M) : std::numeric_limits<double>::infinity();
    return b;
}

}  // namespace stla
