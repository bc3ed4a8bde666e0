#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stla/expr.hpp"
#include "stla/jet.hpp"

namespace stla {

/// An available vector field f(x) = F(x, a) for one fixed control value.
struct VectorFieldDef {
    std::string name;
    std::vector<expr::Expr> components;
};

enum class Structure { General, Symmetric, Convex, Affine };

const char* to_string(Structure s) noexcept;

struct ControlSystem {
    std::vector<std::string> variables;
    /// Fields as declared by the user.
    std::vector<VectorFieldDef> fields;
    Structure structure = Structure::General;
    /// Affine systems: F = drift + sum a_i controls[i] with a in [-1, 1]^p.
    std::string drift;
    std::vector<std::string> controls;
    /// Locality radius R.
    double radius = 1.0;

    std::size_t dim() const noexcept { return variables.size(); }

    /// Throws Error(DimensionMismatch) on a wrong component count and
    /// Error(Config) on duplicate or unknown names.
    void validate() const;

    const VectorFieldDef& field(std::string_view name) const;
    bool has_field(std::string_view name) const noexcept;
};

/// Evaluate a named linear combination of declared fields, written with the
/// expression grammar over field names: "f0+f1", "-g", "0.5*f1 - 0.5*f2".
/// Throws Error(Config) when the text is not a homogeneous linear combination.
VectorFieldDef combine_fields(const ControlSystem& sys, std::string_view text);

/// Finite palette of available fields.
///
/// Affine: drift, drift +- each control and, with two or more controls, every
/// vertex drift + sum +-control. Symmetric: every declared field and its negation.
/// General and convex: the declared fields.
std::vector<VectorFieldDef> expand_palette(const ControlSystem& sys);

/// A field compiled for repeated numeric evaluation.
class CompiledField {
public:
    CompiledField() = default;
    explicit CompiledField(const VectorFieldDef& def);

    const std::string& name() const noexcept { return name_; }
    std::size_t dim() const noexcept { return comps_.size(); }

    void eval(std::span<const double> x, std::span<double> out) const;
    std::vector<double> operator()(std::span<const double> x) const;

    /// Jacobian, row-major (out[i * n + j] = d f_i / d x_j).
    void jacobian(std::span<const double> x, std::span<double> out) const;

private:
    std::string name_;
    std::vector<expr::Program> comps_;
    std::vector<expr::Program> jac_;
};

/// Germ of a field at x0.
jet::VectorGerm lift_field(const VectorFieldDef& f, std::span<const double> x0, int degree);

struct SystemBounds {
    double R = 0.0;
    double L = 0.0;
    double M = 0.0;
    /// R / (2 M): trajectories from B_{R/2}(x_o) stay in B_R(x_o) up to this time.
    double sigma = 0.0;
};

/// k-th point of the Halton sequence in [0,1)^dim, offset by the seed.
std::vector<double> halton(std::uint64_t index, std::size_t dim, std::uint64_t seed = 0);

/// `count` deterministic quasi-random points of the closed ball B_R(center).
std::vector<std::vector<double>> ball_points(std::span<const double> center, double R, std::size_t count,
                                             std::uint64_t seed = 0);

/// Sampled sup bounds of |F| and |DF| over B_R(x_o) on 512 points (plus x_o),
/// each multiplied by 1.25.
SystemBounds estimate_bounds(const ControlSystem& sys, std::span<const double> x_o, std::uint64_t seed = 0);

}  // namespace stla
